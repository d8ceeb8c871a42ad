#pragma once

#include <cmath>
#include <memory>
#include <utility>
#include <vector>

#include "dkoop/error.hpp"
#include "dkoop/trajectory.hpp"

namespace dkoop::dataset {

/// H = [x_{k-eta} .. x_{k-1}; u_{k-eta} .. u_{k-1}], oldest column first.
struct HistoryWindow {
    Mat H;

    Eigen::Index length() const { return H.cols(); }
};

inline HistoryWindow build_history(const Trajectory& traj, Eigen::Index k, Eigen::Index eta_H) {
    detail::require(eta_H >= 1, "build_history: eta_H must be >= 1");
    if (k < eta_H || k > traj.length())
        throw PreconditionError("build_history: index " + std::to_string(k) + " has no full history of length " +
                                std::to_string(eta_H));
    const Eigen::Index n = traj.n_states();
    const Eigen::Index m = traj.n_inputs();
    HistoryWindow w;
    w.H.resize(n + m, eta_H);
    w.H.topRows(n) = traj.X.middleCols(k - eta_H, eta_H);
    w.H.bottomRows(m) = traj.U.middleCols(k - eta_H, eta_H);
    return w;
}

/// Contiguous split. Train receives the first ceil(T/2) samples (x_k, u_k) plus the
/// state that closes its last transition, which is also the test half's initial state.
inline std::pair<Trajectory, Trajectory> split_train_test(const Trajectory& traj) {
    const Eigen::Index T = traj.length();
    detail::require(T >= 2, "split_train_test: need at least 2 samples");
    const Eigen::Index a = (T + 1) / 2;
    Trajectory train{traj.X.leftCols(a + 1), traj.U.leftCols(a), traj.Ts};
    Trajectory test{traj.X.rightCols(T - a + 1), traj.U.rightCols(T - a), traj.Ts};
    return {std::move(train), std::move(test)};
}

/// One supervised training example anchored at time k of a shared trajectory.
/// Windows are views: they keep the trajectory alive and copy nothing.
class SupervisionWindow {
public:
    SupervisionWindow(std::shared_ptr<const Trajectory> traj, Eigen::Index k, Eigen::Index eta_H, Eigen::Index N_L)
        : traj_(std::move(traj)), k_(k), eta_(eta_H), horizon_(N_L) {
        detail::require(traj_ != nullptr, "SupervisionWindow: null trajectory");
        detail::require(eta_ >= 1 && horizon_ >= 1, "SupervisionWindow: eta_H and N_L must be >= 1");
        detail::require(k_ >= eta_ && k_ + horizon_ <= traj_->length(),
                        "SupervisionWindow: window exceeds trajectory");
    }

    Eigen::Index k() const { return k_; }
    Eigen::Index eta_H() const { return eta_; }
    Eigen::Index horizon() const { return horizon_; }
    const Trajectory& trajectory() const { return *traj_; }

    HistoryWindow history() const { return build_history(*traj_, k_, eta_); }
    Vec x_k() const { return traj_->X.col(k_); }
    /// u_k .. u_{k+N_L-1}
    Mat u_future() const { return traj_->U.middleCols(k_, horizon_); }
    /// x_{k+1} .. x_{k+N_L}
    Mat x_future() const { return traj_->X.middleCols(k_ + 1, horizon_); }
    /// True history ending just before k+i, i in [1, N_L]; encodes x_{k+i} for the latent loss.
    HistoryWindow extended_history(Eigen::Index i) const {
        detail::require(i >= 1 && i <= horizon_, "extended_history: offset out of range");
        return build_history(*traj_, k_ + i, eta_);
    }

private:
    std::shared_ptr<const Trajectory> traj_;
    Eigen::Index k_;
    Eigen::Index eta_;
    Eigen::Index horizon_;
};

inline std::vector<SupervisionWindow> make_windows(std::shared_ptr<const Trajectory> traj, Eigen::Index eta_H,
                                                   Eigen::Index N_L, Eigen::Index stride) {
    detail::require(traj != nullptr, "make_windows: null trajectory");
    detail::require(eta_H >= 1 && N_L >= 1 && stride >= 1, "make_windows: eta_H, N_L and stride must be >= 1");
    std::vector<SupervisionWindow> out;
    const Eigen::Index T = traj->length();
    if (T < eta_H + N_L) return out;
    out.reserve(static_cast<std::size_t>((T - eta_H - N_L) / stride + 1));
    for (Eigen::Index k = eta_H; k + N_L <= T; k += stride) out.emplace_back(traj, k, eta_H, N_L);
    return out;
}

/// Per-channel affine map v' = (v - shift) / scale.
struct Normalizer {
    Vec state_shift;
    Vec state_scale;
    Vec input_shift;
    Vec input_scale;

    Mat apply_states(const Mat& X) const {
        return (X.colwise() - state_shift).array().colwise() / state_scale.array();
    }
    Mat apply_inputs(const Mat& U) const {
        return (U.colwise() - input_shift).array().colwise() / input_scale.array();
    }
    Mat invert_states(const Mat& Xn) const {
        return (Xn.array().colwise() * state_scale.array()).matrix().colwise() + state_shift;
    }
    Mat invert_inputs(const Mat& Un) const {
        return (Un.array().colwise() * input_scale.array()).matrix().colwise() + input_shift;
    }
    Trajectory apply(const Trajectory& t) const {
        check(t);
        return {apply_states(t.X), apply_inputs(t.U), t.Ts};
    }
    Trajectory invert(const Trajectory& t) const {
        check(t);
        return {invert_states(t.X), invert_inputs(t.U), t.Ts};
    }

    bool operator==(const Normalizer& o) const {
        return state_shift == o.state_shift && state_scale == o.state_scale && input_shift == o.input_shift &&
               input_scale == o.input_scale;
    }

private:
    void check(const Trajectory& t) const {
        detail::require(t.n_states() == state_shift.size() && t.n_inputs() == input_shift.size(),
                        "Normalizer: channel count mismatch");
    }
};

/// States: zero mean / unit (population) variance over the training states.
/// Inputs: (q - q_min) / (q_max - q_min). Degenerate channels keep scale 1.
inline Normalizer fit_normalizer(const Trajectory& train, double q_min, double q_max) {
    detail::require(train.X.cols() >= 1, "fit_normalizer: empty trajectory");
    Normalizer nz;
    const Eigen::Index n = train.n_states();
    const Eigen::Index m = train.n_inputs();
    nz.state_shift = train.X.rowwise().mean();
    nz.state_scale.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if ((train.X.row(i).array() == train.X(i, 0)).all()) {
            nz.state_shift(i) = train.X(i, 0);
            nz.state_scale(i) = 1.0;
            continue;
        }
        const double var = (train.X.row(i).array() - nz.state_shift(i)).square().mean();
        const double sd = std::sqrt(var);
        nz.state_scale(i) = sd > 0.0 ? sd : 1.0;
    }
    nz.input_shift = Vec::Constant(m, q_min);
    nz.input_scale = Vec::Constant(m, q_max > q_min ? q_max - q_min : 1.0);
    return nz;
}

}  // namespace dkoop::dataset
