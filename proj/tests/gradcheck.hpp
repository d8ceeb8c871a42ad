#pragma once

// Central finite-difference oracle for the deep Koopman loss. Test-only; it touches
// the model exclusively through forward evaluations.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "dkoop/dko.hpp"

namespace dkoop::oracle {

struct SmallInstance {
    dko::DeepKoopmanModel model;
    std::shared_ptr<const Trajectory> traj;
    std::vector<dataset::SupervisionWindow> windows;
};

/// LSTM hidden 3, latent 4, N_L = 3, random data and parameters.
inline SmallInstance make_small_instance(std::uint64_t seed, int n_windows = 3) {
    dko::Architecture arch;
    arch.lstm_hidden = 3;
    arch.encoder_hidden = {5, 5};
    arch.latent = 4;
    arch.decoder_hidden = {5, 5};
    SmallInstance inst;
    inst.model = dko::DeepKoopmanModel::init(arch, seed);
    std::mt19937_64 rng(seed ^ 0xabcdefULL);
    std::normal_distribution<double> nd(0.0, 1.0);
    auto tr = std::make_shared<Trajectory>();
    const Eigen::Index T = 20;
    tr->X = Mat::NullaryExpr(2, T + 1, [&] { return nd(rng); });
    tr->U = Mat::NullaryExpr(1, T, [&] { return nd(rng); });
    tr->Ts = 1.0;
    inst.traj = tr;
    auto all = dataset::make_windows(tr, 4, 3, 3);
    if (all.size() > static_cast<std::size_t>(n_windows)) all.erase(all.begin() + n_windows, all.end());
    inst.windows = std::move(all);
    // perturb every parameter
    for (auto& v : inst.model.views())
        for (Eigen::Index i = 0; i < v.value.size(); ++i) v.value.data()[i] += 0.3 * nd(rng);
    return inst;
}

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst;
};

/// Relative error |a - f| / max(|a|, |f|, floor) over every parameter entry. The floor
/// is 1e4 times the difference quotient's rounding resolution eps |L| / h, so entries
/// below what the quotient can resolve are compared at that resolution.
inline GradCheckResult check_gradients(dko::DeepKoopmanModel model, std::span<const dataset::SupervisionWindow> windows,
                                       const dko::LossWeights& w, double h = 1e-5) {
    const dko::Tape tape = dko::forward(model, windows, w);
    const double floor =
        std::max(1e-6, 1e4 * std::numeric_limits<double>::epsilon() * std::abs(tape.loss.total) / h);
    dko::DeepKoopmanModel grad = dko::backward(model, tape);
    auto gv = grad.views();
    auto pv = model.views();
    GradCheckResult res;
    for (std::size_t t = 0; t < pv.size(); ++t) {
        for (Eigen::Index i = 0; i < pv[t].value.size(); ++i) {
            double& p = pv[t].value.data()[i];
            const double orig = p;
            p = orig + h;
            const double up = dko::loss(model, windows, w).total;
            p = orig - h;
            const double down = dko::loss(model, windows, w).total;
            p = orig;
            const double fd = (up - down) / (2.0 * h);
            const double an = gv[t].value.data()[i];
            const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), floor});
            if (rel > res.max_rel_error) {
                res.max_rel_error = rel;
                res.worst = pv[t].name + "[" + std::to_string(i) + "] analytic=" + std::to_string(an) +
                            " fd=" + std::to_string(fd);
            }
        }
    }
    return res;
}

}  // namespace dkoop::oracle
