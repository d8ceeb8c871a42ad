#pragma once

// Two-tank cascade with input delay:
//   dh1/dt = q(t - tau) - (k1/F1) sqrt(h1)
//   dh2/dt = (k1/F2) sqrt(h1) - (k2/F2) sqrt(h2)
// The inflow q enters dh1/dt directly, so it is a level rate [m/s]. With the
// default F1 = 1 m^2 this coincides with a volumetric flow in m^3/s.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dkoop/error.hpp"
#include "dkoop/trajectory.hpp"

namespace dkoop::sim {

struct TankParams {
    double k1 = 0.015;
    double k2 = 0.015;
    double F1 = 1.0;
    double F2 = 1.0;
    int tau_steps = 20;
    double Ts = 10.0;
    int substeps = 10;  // RK4 steps per sampling interval

    void validate() const {
        detail::require(k1 > 0 && k2 > 0 && F1 > 0 && F2 > 0, "TankParams: k1, k2, F1, F2 must be positive");
        detail::require(Ts > 0, "TankParams: Ts must be positive");
        detail::require(tau_steps >= 0, "TankParams: tau_steps must be >= 0");
        detail::require(substeps >= 1, "TankParams: substeps must be >= 1");
    }

    bool operator==(const TankParams&) const = default;
};

struct TankState {
    double h1 = 0.0;
    double h2 = 0.0;

    bool operator==(const TankState&) const = default;
};

struct TankRate {
    double dh1 = 0.0;
    double dh2 = 0.0;
};

using InputSignal = std::vector<double>;

inline TankRate derivative(TankState s, double delayed_q, const TankParams& p) {
    if (s.h1 < 0.0 || s.h2 < 0.0)
        throw DomainError("tank derivative: negative level (h1=" + std::to_string(s.h1) +
                          ", h2=" + std::to_string(s.h2) + ")");
    detail::require(delayed_q >= 0.0, "tank derivative: inflow must be non-negative");
    const double r1 = std::sqrt(s.h1);
    const double r2 = std::sqrt(s.h2);
    return {delayed_q - (p.k1 / p.F1) * r1, (p.k1 / p.F2) * r1 - (p.k2 / p.F2) * r2};
}

/// Fixed point for a constant inflow q.
inline TankState steady_state(const TankParams& p, double q) {
    const double r1 = q * p.F1 / p.k1;
    const double r2 = q * p.F1 / p.k2;
    return {r1 * r1, r2 * r2};
}

/// Advances one interval of length dt. input_buffer holds the last tau_steps+1
/// commanded inflows, oldest first; its front is q(t - tau) and is held constant
/// over the interval. RK4 stage states and the result are clamped at zero.
inline TankState step(TankState s, std::span<const double> input_buffer, const TankParams& p, double dt) {
    detail::require(dt > 0.0, "tank step: dt must be positive");
    detail::require(!input_buffer.empty(), "tank step: empty input buffer");
    detail::require(input_buffer.size() == static_cast<std::size_t>(p.tau_steps) + 1,
                    "tank step: input buffer must hold tau_steps + 1 samples");
    const double q = input_buffer.front();
    const double h = dt / p.substeps;

    auto clamp = [](TankState x) { return TankState{std::max(x.h1, 0.0), std::max(x.h2, 0.0)}; };
    auto axpy = [](TankState x, double a, TankRate r) { return TankState{x.h1 + a * r.dh1, x.h2 + a * r.dh2}; };

    for (int i = 0; i < p.substeps; ++i) {
        const TankRate k1 = derivative(s, q, p);
        const TankRate k2 = derivative(clamp(axpy(s, 0.5 * h, k1)), q, p);
        const TankRate k3 = derivative(clamp(axpy(s, 0.5 * h, k2)), q, p);
        const TankRate k4 = derivative(clamp(axpy(s, h, k3)), q, p);
        s.h1 += h / 6.0 * (k1.dh1 + 2.0 * k2.dh1 + 2.0 * k3.dh1 + k4.dh1);
        s.h2 += h / 6.0 * (k1.dh2 + 2.0 * k2.dh2 + 2.0 * k3.dh2 + k4.dh2);
        s = clamp(s);
    }
    return s;
}

/// Simulates n_steps sampling intervals. State k+1 is driven by signal[k - tau_steps];
/// commands before t = 0 are zero.
inline Trajectory simulate(const TankParams& p, const InputSignal& signal, TankState x0, std::size_t n_steps) {
    p.validate();
    detail::require(signal.size() >= n_steps, "simulate: signal shorter than n_steps");
    detail::require(x0.h1 >= 0.0 && x0.h2 >= 0.0, "simulate: initial levels must be non-negative");

    const auto tau = static_cast<std::size_t>(p.tau_steps);
    std::vector<double> padded(tau, 0.0);
    padded.insert(padded.end(), signal.begin(), signal.begin() + static_cast<std::ptrdiff_t>(n_steps));

    Trajectory traj;
    traj.Ts = p.Ts;
    traj.X.resize(2, static_cast<Eigen::Index>(n_steps) + 1);
    traj.U.resize(1, static_cast<Eigen::Index>(n_steps));
    traj.X(0, 0) = x0.h1;
    traj.X(1, 0) = x0.h2;
    TankState s = x0;
    for (std::size_t k = 0; k < n_steps; ++k) {
        s = step(s, std::span<const double>(padded).subspan(k, tau + 1), p, p.Ts);
        const auto col = static_cast<Eigen::Index>(k);
        traj.U(0, col) = signal[k];
        traj.X(0, col + 1) = s.h1;
        traj.X(1, col + 1) = s.h2;
    }
    return traj;
}

struct RandomInputSpec {
    double q_min = 0.0;
    double q_max = 0.03;
    int hold_min = 50;
    int hold_max = 200;

    bool operator==(const RandomInputSpec&) const = default;
};

/// Piecewise-constant excitation: segment levels ~ U[q_min, q_max], hold lengths
/// ~ U{hold_min..hold_max} samples.
inline InputSignal generate_random_input(std::uint64_t seed, std::size_t n_steps, const RandomInputSpec& spec) {
    detail::require(spec.q_min <= spec.q_max, "generate_random_input: q_min > q_max");
    detail::require(spec.hold_min >= 1 && spec.hold_min <= spec.hold_max,
                    "generate_random_input: need 1 <= hold_min <= hold_max");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> level(spec.q_min, spec.q_max);
    std::uniform_int_distribution<int> hold(spec.hold_min, spec.hold_max);

    InputSignal q;
    q.reserve(n_steps);
    while (q.size() < n_steps) {
        const double value = spec.q_min == spec.q_max ? spec.q_min : level(rng);
        const auto len = static_cast<std::size_t>(hold(rng));
        for (std::size_t i = 0; i < len && q.size() < n_steps; ++i) q.push_back(value);
    }
    return q;
}

/// Adds i.i.d. N(0, std^2) noise to every state sample; inputs are left untouched.
inline Trajectory add_noise(const Trajectory& traj, double std_dev, std::uint64_t seed) {
    detail::require(std_dev >= 0.0, "add_noise: std must be non-negative");
    Trajectory out = traj;
    if (std_dev == 0.0) return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, std_dev);
    for (Eigen::Index k = 0; k < out.X.cols(); ++k)
        for (Eigen::Index i = 0; i < out.X.rows(); ++i) out.X(i, k) += noise(rng);
    return out;
}

}  // namespace dkoop::sim
