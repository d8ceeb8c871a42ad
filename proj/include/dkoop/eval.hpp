#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "dkoop/dataset.hpp"
#include "dkoop/dko.hpp"
#include "dkoop/edmd.hpp"
#include "dkoop/error.hpp"
#include "dkoop/sim.hpp"
#include "dkoop/trajectory.hpp"

namespace dkoop::eval {

using Complex = std::complex<double>;

/// Mean over all samples and channels of |pred - truth|.
inline double mae(const Mat& pred, const Mat& truth) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
        throw PreconditionError("mae: shape mismatch (" + std::to_string(pred.rows()) + "x" + std::to_string(pred.cols()) +
                                " vs " + std::to_string(truth.rows()) + "x" + std::to_string(truth.cols()) + ")");
    detail::require(pred.size() > 0, "mae: empty trajectories");
    return (pred - truth).cwiseAbs().mean();
}

/// Open-loop prediction of x_{start+1} .. x_{start+N} from the measured state and
/// history available at sample `start` of `measured`.
inline Mat full_test_rollout(const edmd::EdmdModel& model, const Trajectory& measured, Eigen::Index start, Eigen::Index N) {
    const Eigen::Index nd = model.spec.n_delays;
    const Eigen::Index m = model.spec.n_inputs;
    if (start < nd) throw PreconditionError("full_test_rollout: eDMD needs " + std::to_string(nd) + " warm-up samples");
    detail::require(N >= 0 && start + N <= measured.length(), "full_test_rollout: horizon exceeds test data");
    std::vector<double> past;
    past.reserve(static_cast<std::size_t>(nd * m));
    for (Eigen::Index d = 1; d <= nd; ++d)
        for (Eigen::Index c = 0; c < m; ++c) past.push_back(measured.U(c, start - d));
    return edmd::predict_rollout(model, measured.X.col(start), past, measured.U.middleCols(start, N), N);
}

/// Same contract for the deep model; `measured` is in physical units and the
/// checkpoint normalizer is applied on the way in and inverted on the way out.
inline Mat full_test_rollout(const dko::Checkpoint& ck, const Trajectory& measured, Eigen::Index start, Eigen::Index N) {
    const Eigen::Index eta = ck.config.eta_H;
    if (start < eta) throw PreconditionError("full_test_rollout: deep model needs " + std::to_string(eta) + " warm-up samples");
    detail::require(N >= 0 && start + N <= measured.length(), "full_test_rollout: horizon exceeds test data");
    const Trajectory norm = ck.normalizer.apply(measured);
    const auto H = dataset::build_history(norm, start, eta);
    const dko::Rollout r = dko::rollout(ck.model, norm.X.col(start), H, norm.U.middleCols(start, N));
    return ck.normalizer.invert_states(r.X);
}

inline Eigen::Index warmup_samples(const edmd::EdmdModel& m) { return m.spec.n_delays; }
inline Eigen::Index warmup_samples(const dko::Checkpoint& ck) { return ck.config.eta_H; }

/// Diagnostic: restart the open-loop rollout from measured data every `window` samples.
template <class Model>
Mat windowed_rollout(const Model& model, const Trajectory& measured, Eigen::Index start, Eigen::Index N, Eigen::Index window) {
    detail::require(window >= 1, "windowed_rollout: window must be >= 1");
    Mat out(measured.n_states(), N);
    for (Eigen::Index s = 0; s < N; s += window) {
        const Eigen::Index len = std::min(window, N - s);
        out.middleCols(s, len) = full_test_rollout(model, measured, start + s, len);
    }
    return out;
}

/// Discrete eigenvalues exp(lambda Ts) of the plant Jacobian at h1 = h2 = h_star.
inline std::vector<Complex> linearized_truth_eigs(const sim::TankParams& p, double h_star) {
    p.validate();
    if (!(h_star > 0.0)) throw DomainError("linearized_truth_eigs: operating level must be positive (sqrt derivative is singular at 0)");
    const double r = std::sqrt(h_star);
    // Lower-triangular Jacobian: eigenvalues are its diagonal.
    const double l1 = -p.k1 / (2.0 * p.F1 * r);
    const double l2 = -p.k2 / (2.0 * p.F2 * r);
    return {Complex(std::exp(l1 * p.Ts), 0.0), Complex(std::exp(l2 * p.Ts), 0.0)};
}

inline Mat linearized_jacobian(const sim::TankParams& p, double h_star) {
    if (!(h_star > 0.0)) throw DomainError("linearized_jacobian: operating level must be positive");
    const double r = std::sqrt(h_star);
    Mat J(2, 2);
    J << -p.k1 / (2.0 * p.F1 * r), 0.0, p.k1 / (2.0 * p.F2 * r), -p.k2 / (2.0 * p.F2 * r);
    return J;
}

/// Orders by modulus (descending), then real part, then imaginary part.
inline void sort_spectrum(std::vector<Complex>& ev) {
    std::sort(ev.begin(), ev.end(), [](const Complex& a, const Complex& b) {
        const double ma = std::abs(a), mb = std::abs(b);
        if (ma != mb) return ma > mb;
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
}

inline std::vector<Complex> model_eigs(const Mat& A) {
    detail::require(A.rows() == A.cols(), "model_eigs: matrix must be square");
    if (!A.allFinite()) throw NumericalError("model_eigs: non-finite matrix");
    if (A.rows() == 0) return {};
    Eigen::EigenSolver<Mat> es;
    es.setMaxIterations(100 * static_cast<Eigen::Index>(A.rows()));
    es.compute(A, false);
    if (es.info() != Eigen::Success)
        throw NumericalError("model_eigs: QR iteration did not converge within " +
                             std::to_string(100 * A.rows()) + " iterations for a " + std::to_string(A.rows()) + "x" +
                             std::to_string(A.cols()) + " matrix");
    std::vector<Complex> ev(es.eigenvalues().data(), es.eigenvalues().data() + A.rows());
    sort_spectrum(ev);
    return ev;
}

/// Largest-modulus eigenvalue with zero imaginary part; NaN when none exists.
inline double dominant_real_eigenvalue(const std::vector<Complex>& sorted) {
    for (const auto& e : sorted)
        if (e.imag() == 0.0) return e.real();
    return std::numeric_limits<double>::quiet_NaN();
}

struct ModelResult {
    std::string name;
    double mae = 0.0;
    double mae_percent = 0.0;
    std::vector<Complex> eigs;
    Mat prediction;  // n x N
};

struct EvalReport {
    double Ts = 1.0;
    Eigen::Index warmup = 0;  // predictions cover test samples warmup+1 .. T
    Mat truth;                // clean states over the same samples
    double operating_level = 1.0;
    std::vector<Complex> truth_eigs;
    std::vector<ModelResult> models;

    /// Pins the best model to 100%.
    void normalize() {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& m : models) best = std::min(best, m.mae);
        for (auto& m : models)
            m.mae_percent = best > 0.0 ? 100.0 * m.mae / best
                                       : (m.mae == 0.0 ? 100.0 : std::numeric_limits<double>::infinity());
    }
};

}  // namespace dkoop::eval
