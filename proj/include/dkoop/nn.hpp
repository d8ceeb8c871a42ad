#pragma once

// Small dense neural-network core in double precision: MLP and single-layer LSTM
// forward passes that keep exactly what their hand-derived backward passes need,
// plus Adam. Every operation works on column batches (one column per sample).

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dkoop/error.hpp"
#include "dkoop/serialize.hpp"
#include "dkoop/trajectory.hpp"

namespace dkoop::nn {

enum class Activation { Elu, Linear };

inline const char* to_string(Activation a) { return a == Activation::Elu ? "elu" : "linear"; }

inline Activation activation_from_string(const std::string& s) {
    if (s == "elu") return Activation::Elu;
    if (s == "linear") return Activation::Linear;
    throw DataError("unknown activation '" + s + "'");
}

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }

/// Named view onto one parameter tensor; biases appear as single-column matrices.
struct ParamView {
    std::string name;
    Eigen::Map<Mat> value;
};

inline ParamView view_of(std::string name, Mat& m) { return {std::move(name), Eigen::Map<Mat>(m.data(), m.rows(), m.cols())}; }
inline ParamView view_of(std::string name, Vec& v) { return {std::move(name), Eigen::Map<Mat>(v.data(), v.size(), 1)}; }

namespace detail {

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
inline void fill_uniform(Mat& m, Eigen::Index fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
}

inline void fill_uniform(Vec& v, Eigen::Index fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index r = 0; r < v.size(); ++r) v(r) = dist(rng);
}

inline void check_cache(std::uint64_t cache_version, const void* cache_owner, std::uint64_t version, const void* owner,
                        const char* what) {
    if (cache_owner != owner || cache_version != version)
        throw PreconditionError(std::string(what) + ": stale cache (parameters changed or belong to another model)");
}

}  // namespace detail

// ---------------------------------------------------------------- MLP

struct DenseLayer {
    Mat W;  // out x in
    Vec b;  // out
    Activation act = Activation::Linear;
};

struct MlpParams {
    std::vector<DenseLayer> layers;
    std::uint64_t version = 0;

    Eigen::Index input_size() const { return layers.empty() ? 0 : layers.front().W.cols(); }
    Eigen::Index output_size() const { return layers.empty() ? 0 : layers.back().W.rows(); }

    /// sizes = {in, hidden..., out}; ELU on hidden layers, linear output.
    static MlpParams init(std::span<const int> sizes, std::mt19937_64& rng) {
        ::dkoop::detail::require(sizes.size() >= 2, "MlpParams::init: need at least input and output size");
        MlpParams p;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            DenseLayer layer{Mat(sizes[l + 1], sizes[l]), Vec(sizes[l + 1]),
                             l + 2 == sizes.size() ? Activation::Linear : Activation::Elu};
            detail::fill_uniform(layer.W, sizes[l], rng);
            detail::fill_uniform(layer.b, sizes[l], rng);
            p.layers.push_back(std::move(layer));
        }
        return p;
    }

    static MlpParams zeros_like(const MlpParams& o) {
        MlpParams p;
        for (const auto& l : o.layers) p.layers.push_back({Mat::Zero(l.W.rows(), l.W.cols()), Vec::Zero(l.b.size()), l.act});
        return p;
    }

    void validate() const {
        ::dkoop::detail::require(!layers.empty(), "MlpParams: no layers");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            ::dkoop::detail::require(layers[l].b.size() == layers[l].W.rows(), "MlpParams: bias size mismatch");
            if (l > 0)
                ::dkoop::detail::require(layers[l].W.cols() == layers[l - 1].W.rows(), "MlpParams: layer sizes do not chain");
        }
        ::dkoop::detail::require(layers.back().act == Activation::Linear, "MlpParams: output layer must be linear");
    }

    void append_views(const std::string& prefix, std::vector<ParamView>& out) {
        ++version;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            out.push_back(view_of(prefix + ".W" + std::to_string(l), layers[l].W));
            out.push_back(view_of(prefix + ".b" + std::to_string(l), layers[l].b));
        }
    }
};

struct MlpCache {
    std::vector<Mat> inputs;  // input of each layer
    std::vector<Mat> pre;     // pre-activation of each layer
    Mat output;
    std::uint64_t version = 0;
    const MlpParams* owner = nullptr;
};

inline MlpCache mlp_forward(const MlpParams& p, const Mat& X) {
    ::dkoop::detail::require(!p.layers.empty(), "mlp_forward: empty network");
    ::dkoop::detail::require(X.rows() == p.input_size(), "mlp_forward: input has " + std::to_string(X.rows()) +
                                                             " rows, network expects " + std::to_string(p.input_size()));
    MlpCache c;
    c.version = p.version;
    c.owner = &p;
    c.inputs.reserve(p.layers.size());
    c.pre.reserve(p.layers.size());
    Mat a = X;
    for (const auto& layer : p.layers) {
        Mat z = layer.W * a;
        z.colwise() += layer.b;
        c.inputs.push_back(std::move(a));
        a = layer.act == Activation::Elu ? Mat((z.array() > 0.0).select(z.array(), z.array().exp() - 1.0)) : z;
        c.pre.push_back(std::move(z));
    }
    c.output = std::move(a);
    return c;
}

/// Accumulates parameter gradients into grad and returns d loss / d X.
inline Mat mlp_backward(const MlpParams& p, const MlpCache& c, const Mat& d_out, MlpParams& grad) {
    detail::check_cache(c.version, c.owner, p.version, &p, "mlp_backward");
    ::dkoop::detail::require(d_out.rows() == c.output.rows() && d_out.cols() == c.output.cols(),
                             "mlp_backward: upstream gradient shape mismatch");
    Mat d = d_out;
    for (std::size_t l = p.layers.size(); l-- > 0;) {
        const DenseLayer& layer = p.layers[l];
        if (layer.act == Activation::Elu)
            d.array() *= (c.pre[l].array() > 0.0).select(1.0, c.pre[l].array().exp());
        grad.layers[l].W.noalias() += d * c.inputs[l].transpose();
        grad.layers[l].b += d.rowwise().sum();
        d = layer.W.transpose() * d;
    }
    return d;
}

// ---------------------------------------------------------------- LSTM

/// Single LSTM layer:
///   i = s(Wi x + Ui h + bi), f = s(Wf x + Uf h + bf), g = tanh(Wg x + Ug h + bg),
///   o = s(Wo x + Uo h + bo), c' = f*c + i*g, h' = o*tanh(c').
struct LstmParams {
    Mat Wi, Wf, Wg, Wo;  // hidden x input
    Mat Ui, Uf, Ug, Uo;  // hidden x hidden
    Vec bi, bf, bg, bo;
    std::uint64_t version = 0;

    Eigen::Index input_size() const { return Wi.cols(); }
    Eigen::Index hidden_size() const { return Wi.rows(); }

    /// Uniform(+-1/sqrt(fan_in)) weights with fan_in = input + hidden; forget bias 1.
    static LstmParams init(Eigen::Index input, Eigen::Index hidden, std::mt19937_64& rng) {
        LstmParams p = zeros(input, hidden);
        const Eigen::Index fan_in = input + hidden;
        for (Mat* m : {&p.Wi, &p.Wf, &p.Wg, &p.Wo, &p.Ui, &p.Uf, &p.Ug, &p.Uo}) detail::fill_uniform(*m, fan_in, rng);
        for (Vec* v : {&p.bi, &p.bg, &p.bo}) detail::fill_uniform(*v, fan_in, rng);
        p.bf.setOnes();
        return p;
    }

    static LstmParams zeros(Eigen::Index input, Eigen::Index hidden) {
        LstmParams p;
        for (Mat* m : {&p.Wi, &p.Wf, &p.Wg, &p.Wo}) *m = Mat::Zero(hidden, input);
        for (Mat* m : {&p.Ui, &p.Uf, &p.Ug, &p.Uo}) *m = Mat::Zero(hidden, hidden);
        for (Vec* v : {&p.bi, &p.bf, &p.bg, &p.bo}) *v = Vec::Zero(hidden);
        return p;
    }

    void validate() const {
        const Eigen::Index H = hidden_size(), I = input_size();
        ::dkoop::detail::require(H >= 1 && I >= 1, "LstmParams: empty layer");
        for (const Mat* m : {&Wi, &Wf, &Wg, &Wo})
            ::dkoop::detail::require(m->rows() == H && m->cols() == I, "LstmParams: input weight shape mismatch");
        for (const Mat* m : {&Ui, &Uf, &Ug, &Uo})
            ::dkoop::detail::require(m->rows() == H && m->cols() == H, "LstmParams: recurrent weight shape mismatch");
        for (const Vec* v : {&bi, &bf, &bg, &bo}) ::dkoop::detail::require(v->size() == H, "LstmParams: bias shape mismatch");
    }

    void append_views(const std::string& prefix, std::vector<ParamView>& out) {
        ++version;
        out.push_back(view_of(prefix + ".Wi", Wi));
        out.push_back(view_of(prefix + ".Wf", Wf));
        out.push_back(view_of(prefix + ".Wg", Wg));
        out.push_back(view_of(prefix + ".Wo", Wo));
        out.push_back(view_of(prefix + ".Ui", Ui));
        out.push_back(view_of(prefix + ".Uf", Uf));
        out.push_back(view_of(prefix + ".Ug", Ug));
        out.push_back(view_of(prefix + ".Uo", Uo));
        out.push_back(view_of(prefix + ".bi", bi));
        out.push_back(view_of(prefix + ".bf", bf));
        out.push_back(view_of(prefix + ".bg", bg));
        out.push_back(view_of(prefix + ".bo", bo));
    }
};

struct LstmStepCache {
    Mat x, h_prev, c_prev;
    Mat gates;  // activated gates stacked as [i; f; g; o] (4*hidden x batch)
    Mat c, tanh_c;
};

struct LstmCache {
    std::vector<LstmStepCache> steps;
    Mat h;  // final hidden state (hidden x batch)
    Mat c;  // final cell state
    std::uint64_t version = 0;
    const LstmParams* owner = nullptr;
};

namespace detail {
inline Mat sigmoid(const Mat& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }
// tanh(z) = 1 - 2 / (exp(2z) + 1); Eigen vectorizes exp but not tanh for doubles.
inline Mat tanh(const Mat& z) { return (1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0)).matrix(); }

struct StackedLstm {
    Mat W;  // 4H x I
    Mat U;  // 4H x H
    Vec b;  // 4H
};

inline StackedLstm stack(const LstmParams& p) {
    const Eigen::Index H = p.hidden_size();
    StackedLstm s{Mat(4 * H, p.input_size()), Mat(4 * H, H), Vec(4 * H)};
    s.W << p.Wi, p.Wf, p.Wg, p.Wo;
    s.U << p.Ui, p.Uf, p.Ug, p.Uo;
    s.b << p.bi, p.bf, p.bg, p.bo;
    return s;
}
}  // namespace detail

/// Runs the recursion from h0 = c0 = 0 over sequence[0..T-1] (each input x batch).
inline LstmCache lstm_forward(const LstmParams& p, std::span<const Mat> sequence) {
    ::dkoop::detail::require(!sequence.empty(), "lstm_forward: empty sequence");
    p.validate();
    const Eigen::Index H = p.hidden_size();
    const Eigen::Index batch = sequence.front().cols();
    const detail::StackedLstm S = detail::stack(p);
    LstmCache cache;
    cache.version = p.version;
    cache.owner = &p;
    cache.steps.reserve(sequence.size());
    Mat h = Mat::Zero(H, batch);
    Mat c = Mat::Zero(H, batch);
    Mat z(4 * H, batch);
    for (const Mat& x : sequence) {
        ::dkoop::detail::require(x.rows() == p.input_size() && x.cols() == batch, "lstm_forward: input shape mismatch");
        LstmStepCache s;
        z.noalias() = S.W * x;
        z.noalias() += S.U * h;
        z.colwise() += S.b;
        s.gates.resize(4 * H, batch);
        s.gates.topRows(2 * H) = detail::sigmoid(z.topRows(2 * H));
        s.gates.middleRows(2 * H, H) = detail::tanh(z.middleRows(2 * H, H));
        s.gates.bottomRows(H) = detail::sigmoid(z.bottomRows(H));
        const auto i = s.gates.topRows(H).array();
        const auto f = s.gates.middleRows(H, H).array();
        const auto g = s.gates.middleRows(2 * H, H).array();
        const auto o = s.gates.bottomRows(H).array();
        s.c = (f * c.array() + i * g).matrix();
        s.tanh_c = detail::tanh(s.c);
        s.x = x;
        s.h_prev = std::move(h);
        s.c_prev = std::move(c);
        h = (o * s.tanh_c.array()).matrix();
        c = s.c;
        cache.steps.push_back(std::move(s));
    }
    cache.h = std::move(h);
    cache.c = std::move(c);
    return cache;
}

/// Backpropagation through time from d loss / d h_final. Accumulates into grad; when
/// d_inputs is given it receives d loss / d x_t for every step.
inline void lstm_backward(const LstmParams& p, const LstmCache& cache, const Mat& dh_final, LstmParams& grad,
                          std::vector<Mat>* d_inputs = nullptr) {
    detail::check_cache(cache.version, cache.owner, p.version, &p, "lstm_backward");
    ::dkoop::detail::require(dh_final.rows() == cache.h.rows() && dh_final.cols() == cache.h.cols(),
                             "lstm_backward: upstream gradient shape mismatch");
    const Eigen::Index H = p.hidden_size();
    const detail::StackedLstm S = detail::stack(p);
    detail::StackedLstm G{Mat::Zero(S.W.rows(), S.W.cols()), Mat::Zero(S.U.rows(), S.U.cols()), Vec::Zero(S.b.size())};
    if (d_inputs) d_inputs->assign(cache.steps.size(), Mat());
    Mat dh = dh_final;
    Mat dc = Mat::Zero(dh.rows(), dh.cols());
    Mat dz(4 * H, dh.cols());
    for (std::size_t t = cache.steps.size(); t-- > 0;) {
        const LstmStepCache& s = cache.steps[t];
        const auto i = s.gates.topRows(H).array();
        const auto f = s.gates.middleRows(H, H).array();
        const auto g = s.gates.middleRows(2 * H, H).array();
        const auto o = s.gates.bottomRows(H).array();
        const auto tc = s.tanh_c.array();
        dc.array() += dh.array() * o * (1.0 - tc.square());
        dz.topRows(H) = (dc.array() * g * i * (1.0 - i)).matrix();
        dz.middleRows(H, H) = (dc.array() * s.c_prev.array() * f * (1.0 - f)).matrix();
        dz.middleRows(2 * H, H) = (dc.array() * i * (1.0 - g.square())).matrix();
        dz.bottomRows(H) = (dh.array() * tc * o * (1.0 - o)).matrix();
        dc.array() *= f;

        G.W.noalias() += dz * s.x.transpose();
        G.U.noalias() += dz * s.h_prev.transpose();
        G.b += dz.rowwise().sum();
        if (d_inputs) (*d_inputs)[t] = S.W.transpose() * dz;
        dh.noalias() = S.U.transpose() * dz;
    }
    grad.Wi += G.W.topRows(H);
    grad.Wf += G.W.middleRows(H, H);
    grad.Wg += G.W.middleRows(2 * H, H);
    grad.Wo += G.W.bottomRows(H);
    grad.Ui += G.U.topRows(H);
    grad.Uf += G.U.middleRows(H, H);
    grad.Ug += G.U.middleRows(2 * H, H);
    grad.Uo += G.U.bottomRows(H);
    grad.bi += G.b.head(H);
    grad.bf += G.b.segment(H, H);
    grad.bg += G.b.segment(2 * H, H);
    grad.bo += G.b.tail(H);
}

// ---------------------------------------------------------------- Adam

struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step = 0;
    std::vector<Mat> m;
    std::vector<Mat> v;
};

/// Bias-corrected Adam update of params in place. Moment buffers are created lazily
/// with the shapes of params.
inline void adam_step(std::span<ParamView> params, std::span<const ParamView> grads, AdamState& st) {
    ::dkoop::detail::require(params.size() == grads.size(), "adam_step: parameter/gradient count mismatch");
    if (st.m.empty()) {
        for (const auto& p : params) {
            st.m.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
            st.v.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
        }
    }
    ::dkoop::detail::require(st.m.size() == params.size(), "adam_step: optimizer state does not match parameters");
    for (std::size_t i = 0; i < params.size(); ++i) {
        ::dkoop::detail::require(params[i].value.rows() == grads[i].value.rows() &&
                                     params[i].value.cols() == grads[i].value.cols() &&
                                     st.m[i].rows() == params[i].value.rows() && st.m[i].cols() == params[i].value.cols(),
                                 "adam_step: shape mismatch for " + params[i].name);
        if (!grads[i].value.allFinite()) throw NumericalError("adam_step: non-finite gradient for " + params[i].name);
    }
    ++st.step;
    const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto g = grads[i].value.array();
        st.m[i].array() = st.beta1 * st.m[i].array() + (1.0 - st.beta1) * g;
        st.v[i].array() = st.beta2 * st.v[i].array() + (1.0 - st.beta2) * g.square();
        params[i].value.array() -=
            st.learning_rate * (st.m[i].array() / c1) / ((st.v[i].array() / c2).sqrt() + st.epsilon);
    }
}

// ---------------------------------------------------------------- serialization

inline constexpr int kParamsVersion = 1;

/// {"format": "dkoop-nn", "version", "tensors": [{"name", "rows", "cols", "data"}, ...]}
inline io::json params_to_json(std::span<const ParamView> views) {
    io::json tensors = io::json::array();
    for (const auto& v : views) {
        io::json t{{"name", v.name}};
        t.update(io::mat_to_json(v.value));
        tensors.push_back(std::move(t));
    }
    return io::json{{"format", "dkoop-nn"}, {"version", kParamsVersion}, {"tensors", std::move(tensors)}};
}

/// Loads into existing tensors; names, order and shapes must match exactly.
inline void params_from_json(const io::json& doc, std::span<ParamView> views) {
    io::check_header(doc, "dkoop-nn", kParamsVersion);
    const auto& tensors = doc.at("tensors");
    if (tensors.size() != views.size()) throw DataError("parameter document: tensor count mismatch");
    for (std::size_t i = 0; i < views.size(); ++i) {
        const auto& t = tensors[i];
        if (t.at("name") != views[i].name) throw DataError("parameter document: expected tensor '" + views[i].name + "'");
        Mat m = io::mat_from_json(t);
        if (m.rows() != views[i].value.rows() || m.cols() != views[i].value.cols())
            throw DataError("parameter document: shape mismatch for '" + views[i].name + "'");
        views[i].value = m;
    }
}

}  // namespace dkoop::nn
