#pragma once

// Extended DMD with control: a fixed dictionary of observables (monomials, optional
// square roots, delayed inputs) and a ridge least-squares fit of z+ = A z + B u.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "dkoop/error.hpp"
#include "dkoop/serialize.hpp"
#include "dkoop/trajectory.hpp"

namespace dkoop::edmd {

/// Lifted vector layout:
///   [1, x1, x2, x1^2, x1 x2, x2^2, ..., (sqrt x1, sqrt x2), u_{k-1}, ..., u_{k-n_delays}]
/// Monomials are grouped by total degree; inside a degree the exponent tuples are in
/// lexicographic order of their variable multisets (x1x1 < x1x2 < x2x2).
struct DictionarySpec {
    int n_states = 2;
    int n_inputs = 1;
    int degree = 2;
    bool include_sqrt = true;
    int n_delays = 20;
    /// Negative levels are clamped to 0 before the square root instead of raising.
    bool clamp_negative = false;

    void validate() const {
        detail::require(n_states >= 1 && n_inputs >= 1, "DictionarySpec: need n_states, n_inputs >= 1");
        detail::require(degree >= 1, "DictionarySpec: degree must be >= 1");
        detail::require(n_delays >= 0, "DictionarySpec: n_delays must be >= 0");
    }

    bool operator==(const DictionarySpec&) const = default;
};

/// Monomials of total degree <= d as lists of variable indices (empty = constant term).
inline std::vector<std::vector<int>> monomials(int n, int d) {
    std::vector<std::vector<int>> out{{}};
    std::vector<std::vector<int>> layer{{}};
    for (int deg = 1; deg <= d; ++deg) {
        std::vector<std::vector<int>> next;
        for (const auto& base : layer) {
            const int start = base.empty() ? 0 : base.back();
            for (int v = start; v < n; ++v) {
                auto t = base;
                t.push_back(v);
                next.push_back(std::move(t));
            }
        }
        out.insert(out.end(), next.begin(), next.end());
        layer = std::move(next);
    }
    return out;
}

inline long binomial(int n, int k) {
    long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

inline Eigen::Index lifted_dim(const DictionarySpec& s) {
    return binomial(s.n_states + s.degree, s.degree) + (s.include_sqrt ? s.n_states : 0) +
           static_cast<Eigen::Index>(s.n_delays) * s.n_inputs;
}

/// Raw state x_i sits right after the constant term.
inline std::vector<Eigen::Index> state_indices(const DictionarySpec& s) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(s.n_states));
    for (int i = 0; i < s.n_states; ++i) idx[static_cast<std::size_t>(i)] = 1 + i;
    return idx;
}

/// past_inputs holds n_delays * n_inputs values, most recent sample first.
inline Vec lift(const Vec& x, std::span<const double> past_inputs, const DictionarySpec& s) {
    s.validate();
    detail::require(x.size() == s.n_states, "lift: state dimension mismatch");
    detail::require(past_inputs.size() == static_cast<std::size_t>(s.n_delays * s.n_inputs),
                    "lift: past input count must equal n_delays * n_inputs");
    Vec z(lifted_dim(s));
    Eigen::Index j = 0;
    for (const auto& mono : monomials(s.n_states, s.degree)) {
        double v = 1.0;
        for (int var : mono) v *= x(var);
        z(j++) = v;
    }
    if (s.include_sqrt) {
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            double xi = x(i);
            if (xi < 0.0) {
                if (!s.clamp_negative)
                    throw DomainError("lift: negative state " + std::to_string(xi) + " under square-root dictionary");
                xi = 0.0;
            }
            z(j++) = std::sqrt(xi);
        }
    }
    for (double u : past_inputs) z(j++) = u;
    return z;
}

struct EdmdModel {
    DictionarySpec spec;
    Mat A;
    Mat B;
    double ridge = 0.0;
    /// Root-mean-square one-step residual on the fitting data.
    double residual_rms = 0.0;

    std::vector<Eigen::Index> state_indices() const { return edmd::state_indices(spec); }
};

struct Snapshots {
    Mat Z0;  // p x N
    Mat U;   // m x N
    Mat Z1;  // p x N
};

/// All transitions k -> k+1 of a trajectory that have n_delays inputs of history.
inline Snapshots make_snapshots(const Trajectory& traj, const DictionarySpec& s) {
    detail::require(traj.n_states() == s.n_states && traj.n_inputs() == s.n_inputs,
                    "make_snapshots: trajectory dimensions do not match dictionary");
    const Eigen::Index T = traj.length();
    const Eigen::Index first = s.n_delays;
    const Eigen::Index N = std::max<Eigen::Index>(T - first, 0);
    const Eigen::Index p = lifted_dim(s);
    const Eigen::Index m = s.n_inputs;
    Snapshots snap{Mat(p, N), Mat(m, N), Mat(p, N)};

    std::vector<double> past(static_cast<std::size_t>(s.n_delays * m));
    auto fill_past = [&](Eigen::Index k) {
        std::size_t j = 0;
        for (Eigen::Index d = 1; d <= s.n_delays; ++d)
            for (Eigen::Index c = 0; c < m; ++c) past[j++] = traj.U(c, k - d);
    };
    for (Eigen::Index t = 0; t < N; ++t) {
        const Eigen::Index k = first + t;
        fill_past(k);
        snap.Z0.col(t) = lift(traj.X.col(k), past, s);
        fill_past(k + 1);
        snap.Z1.col(t) = lift(traj.X.col(k + 1), past, s);
        snap.U.col(t) = traj.U.col(k);
    }
    return snap;
}

struct FitResult {
    Mat A;
    Mat B;
    double residual_rms = 0.0;
};

/// [A B] = argmin sum_k |z1_k - A z0_k - B u_k|^2 + ridge |[A B]|_F^2 via the regularized
/// normal equations and a Cholesky factorization.
inline FitResult fit(const Mat& Z0, const Mat& U, const Mat& Z1, double ridge) {
    const Eigen::Index p = Z0.rows();
    const Eigen::Index m = U.rows();
    const Eigen::Index N = Z0.cols();
    detail::require(Z1.rows() == p && Z1.cols() == N && U.cols() == N, "edmd fit: snapshot shapes disagree");
    detail::require(ridge >= 0.0, "edmd fit: ridge must be non-negative");
    detail::require(N >= p + m, "edmd fit: need at least p + m snapshot pairs (have " + std::to_string(N) +
                                    ", need " + std::to_string(p + m) + ")");
    if (!Z0.allFinite() || !U.allFinite() || !Z1.allFinite()) throw NumericalError("edmd fit: non-finite data");

    Mat Psi(p + m, N);
    Psi << Z0, U;
    Mat G = Mat::Zero(p + m, p + m);
    G.selfadjointView<Eigen::Lower>().rankUpdate(Psi);
    G = G.selfadjointView<Eigen::Lower>();
    G.diagonal().array() += ridge;
    const Mat C = Psi * Z1.transpose();  // (p+m) x p

    Eigen::LLT<Mat> llt(G);
    const double rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
    if (llt.info() != Eigen::Success || rcond < 1e-15) {
        if (ridge == 0.0)
            throw NumericalError("edmd fit: Gram matrix is singular or rank deficient (rcond=" + std::to_string(rcond) +
                                 "); use a positive ridge");
        throw NumericalError("edmd fit: regularized Gram matrix is not positive definite");
    }
    const Mat K = llt.solve(C).transpose();  // p x (p+m)
    FitResult r{K.leftCols(p), K.rightCols(m), 0.0};
    r.residual_rms = std::sqrt((Z1 - K * Psi).squaredNorm() / static_cast<double>(N * p));
    return r;
}

inline EdmdModel fit_trajectory(const Trajectory& traj, const DictionarySpec& spec, double ridge) {
    spec.validate();
    const Snapshots s = make_snapshots(traj, spec);
    FitResult r = fit(s.Z0, s.U, s.Z1, ridge);
    return {spec, std::move(r.A), std::move(r.B), ridge, r.residual_rms};
}

enum class RolloutMode {
    Linear,  // z+ = A z + B u, never re-lifted
    Relift,  // decode states and rebuild the dictionary every step (diagnostic only)
};

/// Open-loop prediction of x_1..x_N (n x N) from x_0, the n_delays inputs preceding
/// it (most recent first) and U = [u_0 .. u_{N-1}].
inline Mat predict_rollout(const EdmdModel& model, const Vec& x0, std::span<const double> past_inputs, const Mat& U,
                           Eigen::Index N, RolloutMode mode = RolloutMode::Linear) {
    const DictionarySpec& s = model.spec;
    detail::require(U.rows() == s.n_inputs && U.cols() >= N, "predict_rollout: input sequence too short");
    const auto idx = model.state_indices();
    Vec z = lift(x0, past_inputs, s);
    std::vector<double> past(past_inputs.begin(), past_inputs.end());
    Mat out(s.n_states, N);
    for (Eigen::Index k = 0; k < N; ++k) {
        z = model.A * z + model.B * U.col(k);
        for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i), k) = z(idx[i]);
        if (mode == RolloutMode::Relift) {
            if (!past.empty()) {
                past.erase(past.end() - s.n_inputs, past.end());
                past.insert(past.begin(), U.col(k).data(), U.col(k).data() + s.n_inputs);
            }
            DictionarySpec relax = s;
            relax.clamp_negative = true;
            z = lift(out.col(k), past, relax);
        }
    }
    return out;
}

inline constexpr int kModelVersion = 1;

inline io::json to_json(const EdmdModel& m) {
    return io::json{{"format", "dkoop-edmd"},
                    {"version", kModelVersion},
                    {"dictionary",
                     {{"n_states", m.spec.n_states},
                      {"n_inputs", m.spec.n_inputs},
                      {"degree", m.spec.degree},
                      {"include_sqrt", m.spec.include_sqrt},
                      {"n_delays", m.spec.n_delays},
                      {"clamp_negative", m.spec.clamp_negative}}},
                    {"lifted_dim", lifted_dim(m.spec)},
                    {"ridge", m.ridge},
                    {"residual_rms", m.residual_rms},
                    {"A", io::mat_to_json(m.A)},
                    {"B", io::mat_to_json(m.B)}};
}

inline EdmdModel from_json(const io::json& j) {
    io::check_header(j, "dkoop-edmd", kModelVersion);
    try {
        EdmdModel m;
        const auto& d = j.at("dictionary");
        m.spec.n_states = d.at("n_states").get<int>();
        m.spec.n_inputs = d.at("n_inputs").get<int>();
        m.spec.degree = d.at("degree").get<int>();
        m.spec.include_sqrt = d.at("include_sqrt").get<bool>();
        m.spec.n_delays = d.at("n_delays").get<int>();
        m.spec.clamp_negative = d.at("clamp_negative").get<bool>();
        m.spec.validate();
        m.ridge = j.at("ridge").get<double>();
        m.residual_rms = j.at("residual_rms").get<double>();
        m.A = io::mat_from_json(j.at("A"));
        m.B = io::mat_from_json(j.at("B"));
        const Eigen::Index p = lifted_dim(m.spec);
        if (m.A.rows() != p || m.A.cols() != p || m.B.rows() != p || m.B.cols() != m.spec.n_inputs)
            throw DataError("edmd model: matrix shapes do not match dictionary");
        return m;
    } catch (const io::json::exception& e) {
        throw DataError(std::string("edmd model: ") + e.what());
    } catch (const PreconditionError& e) {
        throw DataError(std::string("edmd model: ") + e.what());
    }
}

}  // namespace dkoop::edmd
