#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>

#include "dkoop/dataset.hpp"
#include "dkoop/dko.hpp"

namespace dkoop::dko {

/// Compares the analytic gradient of the full loss against central differences on a
/// small random instance of the given weights (LSTM hidden 3, latent 4, N_L = 3).
/// Returns the largest relative error |a - f| / max(|a|, |f|, floor), where the floor is
/// 1e4 eps |L| / step (the quotient's rounding resolution scaled to the 1e-4 threshold).
inline double finite_difference_check(const LossWeights& weights, std::uint64_t seed, double step = 1e-5) {
    Architecture arch;
    arch.lstm_hidden = 3;
    arch.encoder_hidden = {5, 5};
    arch.latent = 4;
    arch.decoder_hidden = {5, 5};
    DeepKoopmanModel model = DeepKoopmanModel::init(arch, seed);
    std::mt19937_64 rng(seed + 17);
    std::normal_distribution<double> nd(0.0, 1.0);
    auto traj = std::make_shared<Trajectory>();
    traj->X = Mat::NullaryExpr(2, 16, [&] { return nd(rng); });
    traj->U = Mat::NullaryExpr(1, 15, [&] { return nd(rng); });
    const auto windows = dataset::make_windows(traj, 4, 3, 4);

    const Tape tape = forward(model, windows, weights);
    const double floor = std::max(1e-6, 1e4 * std::numeric_limits<double>::epsilon() * std::abs(tape.loss.total) / step);
    DeepKoopmanModel grad = backward(model, tape);
    auto gv = grad.views();
    auto pv = model.views();
    double worst = 0.0;
    for (std::size_t t = 0; t < pv.size(); ++t) {
        for (Eigen::Index i = 0; i < pv[t].value.size(); ++i) {
            double& p = pv[t].value.data()[i];
            const double orig = p;
            p = orig + step;
            const double up = loss(model, windows, weights).total;
            p = orig - step;
            const double down = loss(model, windows, weights).total;
            p = orig;
            const double fd = (up - down) / (2.0 * step);
            const double an = gv[t].value.data()[i];
            worst = std::max(worst, std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), floor}));
        }
    }
    return worst;
}

}  // namespace dkoop::dko
