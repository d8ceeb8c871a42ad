#pragma once

// Deep Koopman model with an LSTM history encoder.
//
//   h_k      = LSTM(H_k)                       final hidden state over the history window
//   z_k      = encoder([x_k; h_k])             lifted state
//   z_{k+1}  = A z_k + B u_k                   linear latent dynamics
//   x_k      = decoder(z_k)
//
// Training loss per window (batch loss is the mean over windows):
//   w_rec   |x_k - dec(z_k)|^2
// + w_step  |xhat_{k+1} - x_{k+1}|^2
// + w_pred  sum_i |xhat_{k+i} - x_{k+i}|^2
// + w_lpred sum_i |zhat_{k+i} - enc(x_{k+i}, LSTM(H_{k+i}))|^2
// with zhat_{k+i} rolled out linearly from zhat_k = z_k (the encoder runs once).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dkoop/dataset.hpp"
#include "dkoop/error.hpp"
#include "dkoop/nn.hpp"
#include "dkoop/serialize.hpp"
#include "dkoop/trajectory.hpp"

namespace dkoop::dko {

using dataset::HistoryWindow;
using dataset::SupervisionWindow;

struct Architecture {
    int n_states = 2;
    int n_inputs = 1;
    int lstm_hidden = 8;
    std::vector<int> encoder_hidden{60, 60};
    int latent = 40;
    std::vector<int> decoder_hidden{60, 60};

    void validate() const {
        ::dkoop::detail::require(n_states >= 1 && n_inputs >= 1 && lstm_hidden >= 1 && latent >= 1,
                                 "Architecture: sizes must be positive");
        for (int h : encoder_hidden) ::dkoop::detail::require(h >= 1, "Architecture: empty encoder layer");
        for (int h : decoder_hidden) ::dkoop::detail::require(h >= 1, "Architecture: empty decoder layer");
    }

    bool operator==(const Architecture&) const = default;
};

struct LossWeights {
    double rec = 0.0;
    double step = 1.0;
    double pred = 10.0;
    double lpred = 1.0;

    void validate() const {
        ::dkoop::detail::require(rec >= 0 && step >= 0 && pred >= 0 && lpred >= 0, "LossWeights: weights must be >= 0");
    }

    bool operator==(const LossWeights&) const = default;
};

struct LossBreakdown {
    double rec = 0.0;
    double step = 0.0;
    double pred = 0.0;
    double lpred = 0.0;
    double total = 0.0;
};

struct DeepKoopmanModel {
    Architecture arch;
    nn::LstmParams lstm;
    nn::MlpParams encoder;
    nn::MlpParams decoder;
    Mat A;  // latent x latent
    Mat B;  // latent x n_inputs
    std::uint64_t version = 0;

    /// Layers use U(+-1/sqrt(fan_in)); A and B follow the same rule with fan_in = latent.
    static DeepKoopmanModel init(const Architecture& arch, std::uint64_t seed) {
        arch.validate();
        std::mt19937_64 rng(seed);
        DeepKoopmanModel m;
        m.arch = arch;
        m.lstm = nn::LstmParams::init(arch.n_states + arch.n_inputs, arch.lstm_hidden, rng);
        std::vector<int> enc{arch.n_states + arch.lstm_hidden};
        enc.insert(enc.end(), arch.encoder_hidden.begin(), arch.encoder_hidden.end());
        enc.push_back(arch.latent);
        m.encoder = nn::MlpParams::init(enc, rng);
        std::vector<int> dec{arch.latent};
        dec.insert(dec.end(), arch.decoder_hidden.begin(), arch.decoder_hidden.end());
        dec.push_back(arch.n_states);
        m.decoder = nn::MlpParams::init(dec, rng);
        m.A.resize(arch.latent, arch.latent);
        m.B.resize(arch.latent, arch.n_inputs);
        nn::detail::fill_uniform(m.A, arch.latent, rng);
        nn::detail::fill_uniform(m.B, arch.latent, rng);
        return m;
    }

    static DeepKoopmanModel zeros_like(const DeepKoopmanModel& o) {
        DeepKoopmanModel g;
        g.arch = o.arch;
        g.lstm = nn::LstmParams::zeros(o.lstm.input_size(), o.lstm.hidden_size());
        g.encoder = nn::MlpParams::zeros_like(o.encoder);
        g.decoder = nn::MlpParams::zeros_like(o.decoder);
        g.A = Mat::Zero(o.A.rows(), o.A.cols());
        g.B = Mat::Zero(o.B.rows(), o.B.cols());
        return g;
    }

    void validate() const {
        arch.validate();
        lstm.validate();
        encoder.validate();
        decoder.validate();
        ::dkoop::detail::require(lstm.input_size() == arch.n_states + arch.n_inputs, "model: LSTM input size mismatch");
        ::dkoop::detail::require(encoder.input_size() == arch.n_states + lstm.hidden_size(),
                                 "model: encoder input must be n_states + lstm hidden");
        ::dkoop::detail::require(encoder.output_size() == arch.latent && decoder.input_size() == arch.latent,
                                 "model: latent size mismatch");
        ::dkoop::detail::require(decoder.output_size() == arch.n_states, "model: decoder output must be n_states");
        ::dkoop::detail::require(A.rows() == arch.latent && A.cols() == arch.latent, "model: A must be latent x latent");
        ::dkoop::detail::require(B.rows() == arch.latent && B.cols() == arch.n_inputs, "model: B must be latent x inputs");
    }

    /// Mutable views over every trainable tensor in a fixed order. Taking views
    /// invalidates outstanding forward tapes.
    std::vector<nn::ParamView> views() {
        ++version;
        std::vector<nn::ParamView> v;
        lstm.append_views("lstm", v);
        encoder.append_views("encoder", v);
        decoder.append_views("decoder", v);
        v.push_back(nn::view_of("A_K", A));
        v.push_back(nn::view_of("B_K", B));
        return v;
    }

    bool all_finite() const {
        auto finite = [](const nn::MlpParams& p) {
            return std::all_of(p.layers.begin(), p.layers.end(),
                               [](const nn::DenseLayer& l) { return l.W.allFinite() && l.b.allFinite(); });
        };
        const auto& l = lstm;
        return finite(encoder) && finite(decoder) && A.allFinite() && B.allFinite() && l.Wi.allFinite() &&
               l.Wf.allFinite() && l.Wg.allFinite() && l.Wo.allFinite() && l.Ui.allFinite() && l.Uf.allFinite() &&
               l.Ug.allFinite() && l.Uo.allFinite() && l.bi.allFinite() && l.bf.allFinite() && l.bg.allFinite() &&
               l.bo.allFinite();
    }
};

namespace detail {

inline std::vector<Mat> history_sequence(const Mat& H) {
    std::vector<Mat> seq;
    seq.reserve(static_cast<std::size_t>(H.cols()));
    for (Eigen::Index t = 0; t < H.cols(); ++t) seq.emplace_back(H.col(t));
    return seq;
}

inline void check_history(const DeepKoopmanModel& m, const Vec& x, const Mat& H) {
    ::dkoop::detail::require(x.size() == m.arch.n_states, "encode: state dimension mismatch");
    ::dkoop::detail::require(H.rows() == m.arch.n_states + m.arch.n_inputs && H.cols() >= 1,
                             "encode: history must have n_states + n_inputs rows and at least one column");
}

}  // namespace detail

/// LSTM final hidden state of the history window.
inline Vec history_code(const DeepKoopmanModel& m, const HistoryWindow& H) {
    const auto seq = detail::history_sequence(H.H);
    return nn::lstm_forward(m.lstm, seq).h.col(0);
}

inline Vec encode(const DeepKoopmanModel& m, const Vec& x_k, const HistoryWindow& H) {
    detail::check_history(m, x_k, H.H);
    Vec in(m.arch.n_states + m.arch.lstm_hidden);
    in << x_k, history_code(m, H);
    return nn::mlp_forward(m.encoder, in).output.col(0);
}

inline Vec decode(const DeepKoopmanModel& m, const Vec& z) {
    ::dkoop::detail::require(z.size() == m.arch.latent, "decode: latent dimension mismatch");
    return nn::mlp_forward(m.decoder, z).output.col(0);
}

struct Rollout {
    Mat Z;  // zhat_{k+1} .. zhat_{k+N}
    Mat X;  // xhat_{k+1} .. xhat_{k+N}
};

/// Propagates latent states zhat_{k+i} = A zhat_{k+i-1} + B u_{k+i-1} (encoder used once)
/// from an initial latent state; u_seq is n_inputs x N.
inline Mat propagate_latent(const DeepKoopmanModel& m, const Vec& z0, const Mat& u_seq) {
    ::dkoop::detail::require(z0.size() == m.arch.latent, "propagate_latent: latent dimension mismatch");
    ::dkoop::detail::require(u_seq.rows() == m.arch.n_inputs, "propagate_latent: input dimension mismatch");
    Mat Z(m.arch.latent, u_seq.cols());
    Vec z = z0;
    for (Eigen::Index i = 0; i < u_seq.cols(); ++i) {
        z = m.A * z + m.B * u_seq.col(i);
        Z.col(i) = z;
    }
    return Z;
}

inline Rollout rollout(const DeepKoopmanModel& m, const Vec& x_k, const HistoryWindow& H, const Mat& u_seq) {
    Rollout r;
    r.Z = propagate_latent(m, encode(m, x_k, H), u_seq);
    r.X = u_seq.cols() > 0 ? nn::mlp_forward(m.decoder, r.Z).output : Mat(m.arch.n_states, 0);
    return r;
}

/// Everything the backward pass needs from one batched forward evaluation.
struct Tape {
    Eigen::Index batch = 0;
    Eigen::Index horizon = 0;
    bool with_latent = false;
    LossWeights weights;
    Mat X_true;  // n x batch*(N+1), block i holds x_{k+i}
    Mat U;       // m x batch*N, block i holds u_{k+i}
    nn::LstmCache lstm;
    nn::MlpCache enc;
    Mat Zhat;  // latent x batch*(N+1), block 0 = encoded z_k
    nn::MlpCache dec;
    LossBreakdown loss;
    std::uint64_t version = 0;
    const DeepKoopmanModel* owner = nullptr;
};

/// Batched forward pass over windows that share eta_H and N_L. The latent-loss
/// encodings of future states are skipped only when w_lpred == 0 and all_terms is false.
inline Tape forward(const DeepKoopmanModel& m, std::span<const SupervisionWindow> windows, const LossWeights& w,
                    bool all_terms = true) {
    w.validate();
    ::dkoop::detail::require(!windows.empty(), "dko forward: empty batch");
    const Eigen::Index eta = windows.front().eta_H();
    const Eigen::Index N = windows.front().horizon();
    const Eigen::Index n = m.arch.n_states;
    const Eigen::Index nu = m.arch.n_inputs;
    for (const auto& win : windows) {
        ::dkoop::detail::require(win.eta_H() == eta && win.horizon() == N,
                                 "dko forward: windows in a batch must share eta_H and N_L");
        ::dkoop::detail::require(win.trajectory().n_states() == n && win.trajectory().n_inputs() == nu,
                                 "dko forward: window dimensions do not match the model");
    }

    Tape t;
    t.batch = static_cast<Eigen::Index>(windows.size());
    t.horizon = N;
    t.with_latent = all_terms || w.lpred > 0.0;
    t.weights = w;
    t.version = m.version;
    t.owner = &m;
    const Eigen::Index b = t.batch;
    const Eigen::Index blocks = N + 1;
    const Eigen::Index enc_blocks = t.with_latent ? blocks : 1;

    t.X_true.resize(n, b * blocks);
    t.U.resize(nu, b * N);
    for (Eigen::Index j = 0; j < b; ++j) {
        const auto& win = windows[static_cast<std::size_t>(j)];
        const Trajectory& tr = win.trajectory();
        for (Eigen::Index i = 0; i <= N; ++i) t.X_true.col(i * b + j) = tr.X.col(win.k() + i);
        for (Eigen::Index i = 0; i < N; ++i) t.U.col(i * b + j) = tr.U.col(win.k() + i);
    }

    // LSTM over the (extended) histories: column i*b + j encodes x_{k_j + i}.
    std::vector<Mat> seq(static_cast<std::size_t>(eta), Mat(n + nu, b * enc_blocks));
    for (Eigen::Index j = 0; j < b; ++j) {
        const auto& win = windows[static_cast<std::size_t>(j)];
        const Trajectory& tr = win.trajectory();
        for (Eigen::Index i = 0; i < enc_blocks; ++i) {
            const Eigen::Index start = win.k() + i - eta;
            const Eigen::Index col = i * b + j;
            for (Eigen::Index s = 0; s < eta; ++s) {
                seq[static_cast<std::size_t>(s)].col(col).head(n) = tr.X.col(start + s);
                seq[static_cast<std::size_t>(s)].col(col).tail(nu) = tr.U.col(start + s);
            }
        }
    }
    t.lstm = nn::lstm_forward(m.lstm, seq);

    Mat enc_in(n + m.arch.lstm_hidden, b * enc_blocks);
    enc_in.topRows(n) = t.X_true.leftCols(b * enc_blocks);
    enc_in.bottomRows(m.arch.lstm_hidden) = t.lstm.h;
    t.enc = nn::mlp_forward(m.encoder, enc_in);
    const Mat& Zenc = t.enc.output;

    t.Zhat.resize(m.arch.latent, b * blocks);
    t.Zhat.leftCols(b) = Zenc.leftCols(b);
    for (Eigen::Index i = 1; i <= N; ++i) {
        t.Zhat.middleCols(i * b, b).noalias() = m.A * t.Zhat.middleCols((i - 1) * b, b);
        t.Zhat.middleCols(i * b, b).noalias() += m.B * t.U.middleCols((i - 1) * b, b);
    }
    t.dec = nn::mlp_forward(m.decoder, t.Zhat);
    const Mat& Xhat = t.dec.output;

    const double inv_b = 1.0 / static_cast<double>(b);
    LossBreakdown& L = t.loss;
    L.rec = (Xhat.leftCols(b) - t.X_true.leftCols(b)).squaredNorm() * inv_b;
    L.step = (Xhat.middleCols(b, b) - t.X_true.middleCols(b, b)).squaredNorm() * inv_b;
    L.pred = (Xhat.rightCols(b * N) - t.X_true.rightCols(b * N)).squaredNorm() * inv_b;
    L.lpred = t.with_latent ? (t.Zhat.rightCols(b * N) - Zenc.rightCols(b * N)).squaredNorm() * inv_b : 0.0;
    L.total = w.rec * L.rec + w.step * L.step + w.pred * L.pred + w.lpred * L.lpred;
    return t;
}

/// Exact gradient of tape.loss.total with respect to every parameter, returned in a
/// model-shaped container (BPTT through the LSTM and the N_L-step latent rollout).
inline DeepKoopmanModel backward(const DeepKoopmanModel& m, const Tape& t) {
    if (t.owner != &m || t.version != m.version)
        throw PreconditionError("dko backward: stale tape (model parameters changed since forward)");
    const Eigen::Index b = t.batch;
    const Eigen::Index N = t.horizon;
    const LossWeights& w = t.weights;
    const double s = 2.0 / static_cast<double>(b);
    DeepKoopmanModel g = DeepKoopmanModel::zeros_like(m);

    const Mat& Xhat = t.dec.output;
    Mat dX = Mat::Zero(Xhat.rows(), Xhat.cols());
    if (w.rec != 0.0) dX.leftCols(b) = (s * w.rec) * (Xhat.leftCols(b) - t.X_true.leftCols(b));
    dX.rightCols(b * N) = (s * w.pred) * (Xhat.rightCols(b * N) - t.X_true.rightCols(b * N));
    dX.middleCols(b, b) += (s * w.step) * (Xhat.middleCols(b, b) - t.X_true.middleCols(b, b));
    Mat dZ = nn::mlp_backward(m.decoder, t.dec, dX, g.decoder);

    const Mat& Zenc = t.enc.output;
    Mat dZenc = Mat::Zero(Zenc.rows(), Zenc.cols());
    if (t.with_latent && w.lpred != 0.0) {
        const Mat D = (s * w.lpred) * (t.Zhat.rightCols(b * N) - Zenc.rightCols(b * N));
        dZ.rightCols(b * N) += D;
        dZenc.rightCols(b * N) = -D;
    }
    for (Eigen::Index i = N; i >= 1; --i) {
        const auto dzi = dZ.middleCols(i * b, b);
        g.A.noalias() += dzi * t.Zhat.middleCols((i - 1) * b, b).transpose();
        g.B.noalias() += dzi * t.U.middleCols((i - 1) * b, b).transpose();
        dZ.middleCols((i - 1) * b, b).noalias() += m.A.transpose() * dzi;
    }
    dZenc.leftCols(b) += dZ.leftCols(b);

    const Mat dIn = nn::mlp_backward(m.encoder, t.enc, dZenc, g.encoder);
    nn::lstm_backward(m.lstm, t.lstm, dIn.bottomRows(m.arch.lstm_hidden), g.lstm);
    return g;
}

inline LossBreakdown loss(const DeepKoopmanModel& m, std::span<const SupervisionWindow> windows, const LossWeights& w) {
    return forward(m, windows, w).loss;
}

inline LossBreakdown loss(const DeepKoopmanModel& m, const SupervisionWindow& window, const LossWeights& w) {
    return loss(m, std::span<const SupervisionWindow>(&window, 1), w);
}

// ---------------------------------------------------------------- training

struct TrainConfig {
    int epochs = 1500;
    int batch_size = 100;
    double learning_rate = 1e-3;
    int horizon = 30;  // N_L
    int eta_H = 25;
    int stride = 1;
    std::uint64_t seed = 0;
    LossWeights weights;
    double clip_norm = 0.0;  // 0 disables global-norm clipping

    void validate() const {
        ::dkoop::detail::require(epochs >= 0, "TrainConfig: epochs must be >= 0");
        ::dkoop::detail::require(batch_size >= 1, "TrainConfig: batch size must be >= 1");
        ::dkoop::detail::require(horizon >= 1 && eta_H >= 1 && stride >= 1, "TrainConfig: N_L, eta_H, stride must be >= 1");
        ::dkoop::detail::require(learning_rate > 0.0, "TrainConfig: learning rate must be positive");
        ::dkoop::detail::require(clip_norm >= 0.0, "TrainConfig: clip_norm must be >= 0");
        weights.validate();
    }

    bool operator==(const TrainConfig&) const = default;
};

struct EpochLog {
    int epoch = 0;
    LossBreakdown mean;  // mean over windows of the pre-update batch losses
};

struct TrainResult {
    DeepKoopmanModel model;
    std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Mini-batch Adam over windows shuffled once per epoch. Deterministic for a fixed seed.
inline TrainResult train_from(DeepKoopmanModel model, std::span<const SupervisionWindow> windows, const TrainConfig& cfg,
                              const EpochCallback& on_epoch = {}) {
    cfg.validate();
    model.validate();
    ::dkoop::detail::require(!windows.empty(), "train: no training windows");
    for (const auto& w : windows)
        ::dkoop::detail::require(w.eta_H() == cfg.eta_H && w.horizon() == cfg.horizon,
                                 "train: window eta_H / N_L differ from the configuration");

    TrainResult result;
    nn::AdamState adam;
    adam.learning_rate = cfg.learning_rate;
    std::vector<std::size_t> order(windows.size());
    std::vector<SupervisionWindow> batch;
    batch.reserve(static_cast<std::size_t>(cfg.batch_size));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::seed_seq sseq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                           static_cast<std::uint32_t>(epoch), 0x5eedu};
        std::mt19937_64 rng(sseq);
        std::shuffle(order.begin(), order.end(), rng);

        EpochLog log{epoch, {}};
        for (std::size_t start = 0, bi = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size), ++bi) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) batch.push_back(windows[order[i]]);

            const Tape tape = forward(model, batch, cfg.weights, false);
            if (!std::isfinite(tape.loss.total))
                throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(bi));
            const double share = static_cast<double>(batch.size()) / static_cast<double>(order.size());
            log.mean.rec += share * tape.loss.rec;
            log.mean.step += share * tape.loss.step;
            log.mean.pred += share * tape.loss.pred;
            log.mean.lpred += share * tape.loss.lpred;
            log.mean.total += share * tape.loss.total;

            DeepKoopmanModel grad = backward(model, tape);
            auto gv = grad.views();
            if (cfg.clip_norm > 0.0) {
                double sq = 0.0;
                for (const auto& v : gv) sq += v.value.squaredNorm();
                const double norm = std::sqrt(sq);
                if (norm > cfg.clip_norm)
                    for (auto& v : gv) v.value *= cfg.clip_norm / norm;
            }
            auto pv = model.views();
            nn::adam_step(pv, gv, adam);
        }
        result.log.push_back(log);
        if (on_epoch) on_epoch(log);
    }
    result.model = std::move(model);
    return result;
}

inline TrainResult train(std::span<const SupervisionWindow> windows, const TrainConfig& cfg, const Architecture& arch,
                         const EpochCallback& on_epoch = {}) {
    return train_from(DeepKoopmanModel::init(arch, cfg.seed), windows, cfg, on_epoch);
}

// ---------------------------------------------------------------- checkpoint

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    DeepKoopmanModel model;
    dataset::Normalizer normalizer;
    TrainConfig config;
};

inline io::json to_json(const Architecture& a) {
    return io::json{{"n_states", a.n_states},         {"n_inputs", a.n_inputs}, {"lstm_hidden", a.lstm_hidden},
                    {"encoder_hidden", a.encoder_hidden}, {"latent", a.latent},     {"decoder_hidden", a.decoder_hidden}};
}

inline Architecture architecture_from_json(const io::json& j) {
    Architecture a;
    a.n_states = j.at("n_states").get<int>();
    a.n_inputs = j.at("n_inputs").get<int>();
    a.lstm_hidden = j.at("lstm_hidden").get<int>();
    a.encoder_hidden = j.at("encoder_hidden").get<std::vector<int>>();
    a.latent = j.at("latent").get<int>();
    a.decoder_hidden = j.at("decoder_hidden").get<std::vector<int>>();
    a.validate();
    return a;
}

inline io::json to_json(const TrainConfig& c) {
    return io::json{{"epochs", c.epochs},
                    {"batch_size", c.batch_size},
                    {"learning_rate", c.learning_rate},
                    {"horizon", c.horizon},
                    {"eta_H", c.eta_H},
                    {"stride", c.stride},
                    {"seed", c.seed},
                    {"weights", {{"rec", c.weights.rec}, {"step", c.weights.step}, {"pred", c.weights.pred}, {"lpred", c.weights.lpred}}},
                    {"clip_norm", c.clip_norm}};
}

inline TrainConfig train_config_from_json(const io::json& j) {
    TrainConfig c;
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.horizon = j.at("horizon").get<int>();
    c.eta_H = j.at("eta_H").get<int>();
    c.stride = j.at("stride").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto& w = j.at("weights");
    c.weights = {w.at("rec").get<double>(), w.at("step").get<double>(), w.at("pred").get<double>(),
                 w.at("lpred").get<double>()};
    c.clip_norm = j.at("clip_norm").get<double>();
    c.validate();
    return c;
}

inline io::json to_json(const dataset::Normalizer& nz) {
    return io::json{{"state_shift", io::mat_to_json(nz.state_shift)},
                    {"state_scale", io::mat_to_json(nz.state_scale)},
                    {"input_shift", io::mat_to_json(nz.input_shift)},
                    {"input_scale", io::mat_to_json(nz.input_scale)}};
}

inline dataset::Normalizer normalizer_from_json(const io::json& j) {
    return {io::vec_from_json(j.at("state_shift")), io::vec_from_json(j.at("state_scale")),
            io::vec_from_json(j.at("input_shift")), io::vec_from_json(j.at("input_scale"))};
}

inline io::json to_json(const Checkpoint& ck) {
    DeepKoopmanModel copy = ck.model;
    std::vector<nn::ParamView> views;
    copy.lstm.append_views("lstm", views);
    copy.encoder.append_views("encoder", views);
    copy.decoder.append_views("decoder", views);
    io::json acts = io::json::object();
    for (const auto* mlp : {&ck.model.encoder, &ck.model.decoder}) {
        io::json list = io::json::array();
        for (const auto& l : mlp->layers) list.push_back(nn::to_string(l.act));
        acts[mlp == &ck.model.encoder ? "encoder" : "decoder"] = std::move(list);
    }
    return io::json{{"format", "dkoop-dko"},
                    {"version", kCheckpointVersion},
                    {"architecture", to_json(ck.model.arch)},
                    {"activations", std::move(acts)},
                    {"eta_H", ck.config.eta_H},
                    {"horizon", ck.config.horizon},
                    {"train_config", to_json(ck.config)},
                    {"normalizer", to_json(ck.normalizer)},
                    {"A_K", io::mat_to_json(ck.model.A)},
                    {"B_K", io::mat_to_json(ck.model.B)},
                    {"networks", nn::params_to_json(views)}};
}

inline Checkpoint checkpoint_from_json(const io::json& j) {
    io::check_header(j, "dkoop-dko", kCheckpointVersion);
    try {
        Checkpoint ck;
        ck.config = train_config_from_json(j.at("train_config"));
        if (j.at("eta_H").get<int>() != ck.config.eta_H || j.at("horizon").get<int>() != ck.config.horizon)
            throw DataError("dko checkpoint: eta_H / horizon disagree with the training configuration");
        ck.model = DeepKoopmanModel::init(architecture_from_json(j.at("architecture")), 0);
        const auto& acts = j.at("activations");
        for (auto* mlp : {&ck.model.encoder, &ck.model.decoder}) {
            const auto& list = acts.at(mlp == &ck.model.encoder ? "encoder" : "decoder");
            if (list.size() != mlp->layers.size()) throw DataError("dko checkpoint: activation count mismatch");
            for (std::size_t l = 0; l < mlp->layers.size(); ++l)
                mlp->layers[l].act = nn::activation_from_string(list[l].get<std::string>());
        }
        std::vector<nn::ParamView> views;
        ck.model.lstm.append_views("lstm", views);
        ck.model.encoder.append_views("encoder", views);
        ck.model.decoder.append_views("decoder", views);
        nn::params_from_json(j.at("networks"), views);
        ck.model.A = io::mat_from_json(j.at("A_K"));
        ck.model.B = io::mat_from_json(j.at("B_K"));
        ck.normalizer = normalizer_from_json(j.at("normalizer"));
        ck.model.validate();
        return ck;
    } catch (const io::json::exception& e) {
        throw DataError(std::string("dko checkpoint: ") + e.what());
    } catch (const PreconditionError& e) {
        throw DataError(std::string("dko checkpoint: ") + e.what());
    }
}

}  // namespace dkoop::dko
