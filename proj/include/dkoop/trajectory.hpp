#pragma once

#include <Eigen/Dense>

#include "dkoop/error.hpp"

namespace dkoop {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Sampled trajectory: states x_0..x_T (n x (T+1)) and inputs u_0..u_{T-1} (m x T).
/// A "sample" k is the pair (x_k, u_k); x_T closes the last transition.
struct Trajectory {
    Mat X;
    Mat U;
    double Ts = 1.0;

    Eigen::Index n_states() const { return X.rows(); }
    Eigen::Index n_inputs() const { return U.rows(); }
    /// Number of input samples T.
    Eigen::Index length() const { return U.cols(); }

    void validate() const {
        detail::require(X.cols() == U.cols() + 1,
                        "Trajectory: X must have exactly one more column than U");
        detail::require(Ts > 0.0, "Trajectory: sampling period must be positive");
        if (!X.allFinite() || !U.allFinite()) throw DataError("Trajectory: non-finite entries");
    }
};

}  // namespace dkoop
