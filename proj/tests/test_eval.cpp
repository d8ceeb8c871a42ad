#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <random>
#include <vector>

#include "dkoop/eval.hpp"
#include "companion.hpp"
#include "toy.hpp"

using namespace dkoop;
using namespace dkoop::eval;
using namespace dkoop::oracle;

namespace {

Mat randn(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    return Mat::NullaryExpr(r, c, [&] { return nd(rng); });
}

}  // namespace

TEST(Mae, IdenticalIsZero) {
    std::mt19937_64 rng(1);
    const Mat a = randn(2, 50, rng);
    EXPECT_EQ(mae(a, a), 0.0);
}

TEST(Mae, ConstantOffset) {
    std::mt19937_64 rng(2);
    const Mat a = randn(2, 50, rng);
    EXPECT_NEAR(mae(a.array() + 0.5, a), 0.5, 1e-12);
}

TEST(Mae, SymmetricAndTranslationCovariant) {
    std::mt19937_64 rng(3);
    const Mat a = randn(2, 40, rng), b = randn(2, 40, rng);
    EXPECT_EQ(mae(a, b), mae(b, a));
    EXPECT_NEAR(mae(a.array() + 3.0, b.array() + 3.0), mae(a, b), 1e-12);
}

TEST(Mae, ShapeMismatch) {
    EXPECT_THROW(mae(Mat::Zero(2, 5), Mat::Zero(2, 4)), PreconditionError);
    EXPECT_THROW(mae(Mat::Zero(1, 5), Mat::Zero(2, 5)), PreconditionError);
}

TEST(Linearization, DefaultPlantAtOneMetre) {
    const auto ev = linearized_truth_eigs(sim::TankParams{}, 1.0);
    ASSERT_EQ(ev.size(), 2u);
    const Mat J = linearized_jacobian(sim::TankParams{}, 1.0);
    EXPECT_NEAR(J(0, 0), -0.0075, 1e-15);
    EXPECT_NEAR(J(1, 1), -0.0075, 1e-15);
    for (const auto& e : ev) {
        EXPECT_NEAR(e.real(), 0.92774, 5e-6);
        EXPECT_NEAR(e.real(), std::exp(-0.075), 1e-15);
        EXPECT_EQ(e.imag(), 0.0);
    }
}

TEST(Linearization, RealAndInsideUnitInterval) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> ud(0.1, 3.0);
    for (int i = 0; i < 50; ++i) {
        const sim::TankParams p{.k1 = 0.01 * ud(rng), .k2 = 0.01 * ud(rng), .F1 = ud(rng), .F2 = ud(rng)};
        for (const auto& e : linearized_truth_eigs(p, ud(rng))) {
            EXPECT_EQ(e.imag(), 0.0);
            EXPECT_GT(e.real(), 0.0);
            EXPECT_LT(e.real(), 1.0);
        }
    }
}

TEST(Linearization, JacobianMatchesFiniteDifferences) {
    const sim::TankParams p{.k1 = 0.02, .k2 = 0.011, .F1 = 1.3, .F2 = 0.8};
    const double h = 1.7, d = 1e-6;
    const Mat J = linearized_jacobian(p, h);
    for (int j = 0; j < 2; ++j) {
        sim::TankState a{h, h}, b{h, h};
        (j == 0 ? a.h1 : a.h2) += d;
        (j == 0 ? b.h1 : b.h2) -= d;
        const auto ra = sim::derivative(a, 0.0, p), rb = sim::derivative(b, 0.0, p);
        EXPECT_NEAR(J(0, j), (ra.dh1 - rb.dh1) / (2 * d), 1e-8);
        EXPECT_NEAR(J(1, j), (ra.dh2 - rb.dh2) / (2 * d), 1e-8);
    }
}

TEST(Linearization, DoublingF1HalvesFirstDiagonal) {
    sim::TankParams p{};
    const double a = linearized_jacobian(p, 2.0)(0, 0);
    p.F1 *= 2.0;
    EXPECT_NEAR(linearized_jacobian(p, 2.0)(0, 0), a / 2.0, 1e-17);
}

TEST(Linearization, ZeroLevelIsSingular) {
    EXPECT_THROW(linearized_truth_eigs(sim::TankParams{}, 0.0), DomainError);
    EXPECT_THROW(linearized_jacobian(sim::TankParams{}, -1.0), DomainError);
}

TEST(Eigs, Diagonal) {
    Mat A = Mat::Zero(2, 2);
    A(0, 0) = 0.5;
    A(1, 1) = 0.9;
    const auto ev = model_eigs(A);
    EXPECT_NEAR(ev[0].real(), 0.9, 1e-15);
    EXPECT_NEAR(ev[1].real(), 0.5, 1e-15);
    EXPECT_EQ(dominant_real_eigenvalue(ev), ev[0].real());
}

TEST(Eigs, ScaledRotation) {
    const double r = 0.8, th = 0.3;
    Mat A(2, 2);
    A << r * std::cos(th), -r * std::sin(th), r * std::sin(th), r * std::cos(th);
    const auto ev = model_eigs(A);
    ASSERT_EQ(ev.size(), 2u);
    for (const auto& e : ev) {
        EXPECT_NEAR(std::abs(e), r, 1e-14);
        EXPECT_NEAR(std::abs(std::arg(e)), th, 1e-14);
    }
    EXPECT_NEAR(ev[0].imag(), -ev[1].imag(), 1e-14);
    EXPECT_TRUE(std::isnan(dominant_real_eigenvalue(ev)));
}

TEST(Eigs, CompanionOracleOnRandomMatrices) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const Mat A = randn(6, 6, rng) / 2.0;
        const auto ev = model_eigs(A);
        const auto roots = poly_roots(charpoly(A));
        EXPECT_LT(spectrum_distance(ev, roots), 1e-8) << trial;
        for (std::size_t i = 1; i < ev.size(); ++i) EXPECT_GE(std::abs(ev[i - 1]), std::abs(ev[i]));
    }
}

TEST(Eigs, OracleSelfCheckOnKnownPolynomial) {
    // (z - 0.5)(z + 0.25)(z^2 - z + 0.5): roots 0.5, -0.25, 0.5 +- 0.5i
    const auto r = poly_roots({-0.0625, 0.0, 0.625, -1.25, 1.0});
    const std::vector<std::complex<double>> want{{0.5, 0}, {-0.25, 0}, {0.5, 0.5}, {0.5, -0.5}};
    EXPECT_LT(spectrum_distance(r, want), 1e-12);
}

TEST(Eigs, SimilarityInvariance) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        const Mat A = randn(8, 8, rng) / 3.0;
        const Mat T = Mat::Identity(8, 8) + 0.2 * randn(8, 8, rng);
        const Mat S = T.inverse() * A * T;
        EXPECT_LT(spectrum_distance(model_eigs(A), model_eigs(S)), 1e-8);
    }
}

TEST(Eigs, RejectsBadInput) {
    EXPECT_THROW(model_eigs(Mat::Zero(2, 3)), PreconditionError);
    Mat A = Mat::Identity(2, 2);
    A(0, 1) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(model_eigs(A), NumericalError);
}

TEST(Rollout, EdmdAndDeepModelShareTheStartIndex) {
    const auto q = sim::generate_random_input(7, 400, {});
    const Trajectory t = sim::simulate(sim::TankParams{}, q, {1.0, 1.0}, 400);
    const edmd::EdmdModel em = edmd::fit_trajectory(t, edmd::DictionarySpec{}, 1e-8);
    dko::TrainConfig cfg;
    const dko::Checkpoint ck{dko::DeepKoopmanModel::init(dko::Architecture{}, 1),
                             dataset::fit_normalizer(t, 0.0, 0.03), cfg};
    const Eigen::Index warm = std::max(warmup_samples(em), warmup_samples(ck));
    EXPECT_EQ(warm, 25);
    const Eigen::Index N = t.length() - warm;
    const Mat a = full_test_rollout(em, t, warm, N);
    const Mat b = full_test_rollout(ck, t, warm, N);
    EXPECT_EQ(a.cols(), N);
    EXPECT_EQ(b.cols(), N);
    // one step ahead of the shared start both predict x_{warm+1}
    EXPECT_LT(std::abs(a(0, 0) - t.X(0, warm + 1)), 0.05);
    EXPECT_THROW(full_test_rollout(em, t, 19, 10), PreconditionError);
    EXPECT_THROW(full_test_rollout(ck, t, 24, 10), PreconditionError);
    EXPECT_THROW(full_test_rollout(em, t, warm, N + 1), PreconditionError);
}

TEST(Rollout, ExactToyOracleHasZeroMae) {
    const auto toy = oracle::make_linear_toy(4, 300, 8);
    const dko::DeepKoopmanModel m = oracle::exact_toy_model(toy);
    dko::TrainConfig cfg;
    cfg.eta_H = 5;
    dataset::Normalizer identity{Vec::Zero(4), Vec::Ones(4), Vec::Zero(1), Vec::Ones(1)};
    const dko::Checkpoint ck{m, identity, cfg};
    const Mat pred = full_test_rollout(ck, *toy.traj, 5, 295);
    EXPECT_LT(mae(pred, toy.traj->X.rightCols(295)), 1e-12);
    // same on the eDMD side: a degree-1 dictionary without delays is the linear plant itself
    const edmd::DictionarySpec s{.n_states = 4, .n_inputs = 1, .degree = 1, .include_sqrt = false, .n_delays = 0};
    const edmd::EdmdModel em = edmd::fit_trajectory(*toy.traj, s, 0.0);
    EXPECT_LT(mae(full_test_rollout(em, *toy.traj, 5, 295), toy.traj->X.rightCols(295)), 1e-10);
}

TEST(Rollout, WindowedRestartsFromMeasurements) {
    const auto toy = oracle::make_linear_toy(2, 100, 9);
    const edmd::DictionarySpec s{.n_states = 2, .n_inputs = 1, .degree = 1, .include_sqrt = false, .n_delays = 0};
    const edmd::EdmdModel em = edmd::fit_trajectory(*toy.traj, s, 0.0);
    const Mat full = full_test_rollout(em, *toy.traj, 0, 100);
    const Mat win = windowed_rollout(em, *toy.traj, 0, 100, 7);
    EXPECT_LT((full - win).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Report, BestModelPinnedAtHundred) {
    EvalReport r;
    r.models = {{"a", 0.3, 0, {}, {}}, {"b", 0.15, 0, {}, {}}, {"c", 0.6, 0, {}, {}}};
    r.normalize();
    EXPECT_DOUBLE_EQ(r.models[0].mae_percent, 200.0);
    EXPECT_DOUBLE_EQ(r.models[1].mae_percent, 100.0);
    EXPECT_DOUBLE_EQ(r.models[2].mae_percent, 400.0);
    EvalReport one;
    one.models = {{"only", 0.42, 0, {}, {}}};
    one.normalize();
    EXPECT_EQ(one.models[0].mae_percent, 100.0);
}
