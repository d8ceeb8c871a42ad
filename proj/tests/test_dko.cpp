#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "dkoop/dko.hpp"
#include "dkoop/gradient_check.hpp"
#include "gradcheck.hpp"
#include "toy.hpp"

using namespace dkoop;
using namespace dkoop::dko;
using dkoop::dataset::HistoryWindow;

namespace {

Mat randn(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    return Mat::NullaryExpr(r, c, [&] { return nd(rng); });
}

DeepKoopmanModel default_model(std::uint64_t seed) { return DeepKoopmanModel::init(Architecture{}, seed); }

}  // namespace

TEST(Model, DefaultShapes) {
    DeepKoopmanModel m = default_model(1);
    EXPECT_NO_THROW(m.validate());
    EXPECT_EQ(m.lstm.input_size(), 3);
    EXPECT_EQ(m.lstm.hidden_size(), 8);
    EXPECT_EQ(m.encoder.input_size(), 10);
    EXPECT_EQ(m.encoder.output_size(), 40);
    ASSERT_EQ(m.encoder.layers.size(), 3u);
    EXPECT_EQ(m.encoder.layers[0].W.rows(), 60);
    EXPECT_EQ(m.encoder.layers[1].W.rows(), 60);
    EXPECT_EQ(m.decoder.input_size(), 40);
    EXPECT_EQ(m.decoder.output_size(), 2);
    EXPECT_EQ(m.A.rows(), 40);
    EXPECT_EQ(m.A.cols(), 40);
    EXPECT_EQ(m.B.rows(), 40);
    EXPECT_EQ(m.B.cols(), 1);
}

TEST(Encode, DeterministicAndBitRepeatable) {
    const DeepKoopmanModel m = default_model(2);
    std::mt19937_64 rng(3);
    const Vec x = randn(2, 1, rng);
    const HistoryWindow H{randn(3, 25, rng)};
    const Vec a = encode(m, x, H);
    const Vec b = encode(m, x, H);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.size(), 40);
    EXPECT_EQ(decode(m, a), decode(m, b));
}

TEST(Encode, SensitiveToOldestHistoryColumn) {
    const DeepKoopmanModel m = default_model(4);
    std::mt19937_64 rng(5);
    const Vec x = randn(2, 1, rng);
    HistoryWindow H{randn(3, 25, rng)};
    const Vec a = encode(m, x, H);
    H.H.col(0) += Vec::Constant(3, 0.5);
    EXPECT_GT((encode(m, x, H) - a).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Encode, ZeroLstmIgnoresHistory) {
    DeepKoopmanModel m = default_model(6);
    m.lstm = nn::LstmParams::zeros(3, 8);
    std::mt19937_64 rng(7);
    const Vec x = randn(2, 1, rng);
    const Vec a = encode(m, x, HistoryWindow{randn(3, 25, rng)});
    const Vec b = encode(m, x, HistoryWindow{randn(3, 25, rng)});
    EXPECT_EQ(a, b);
}

TEST(Encode, ShapeMismatch) {
    const DeepKoopmanModel m = default_model(8);
    EXPECT_THROW(encode(m, Vec::Zero(3), HistoryWindow{Mat::Zero(3, 25)}), PreconditionError);
    EXPECT_THROW(encode(m, Vec::Zero(2), HistoryWindow{Mat::Zero(2, 25)}), PreconditionError);
    EXPECT_THROW(decode(m, Vec::Zero(39)), PreconditionError);
}

TEST(Decode, ZeroWeightsGiveOutputBias) {
    DeepKoopmanModel m = default_model(9);
    for (auto& l : m.decoder.layers) l.W.setZero();
    std::mt19937_64 rng(10);
    EXPECT_EQ(decode(m, randn(40, 1, rng)), m.decoder.layers.back().b);
}

TEST(Rollout, IdentityDynamicsKeepLatentConstant) {
    DeepKoopmanModel m = default_model(11);
    m.A.setIdentity();
    m.B.setZero();
    std::mt19937_64 rng(12);
    const Vec x = randn(2, 1, rng);
    const HistoryWindow H{randn(3, 25, rng)};
    const Rollout r = rollout(m, x, H, randn(1, 10, rng));
    const Vec z0 = encode(m, x, H);
    for (Eigen::Index i = 0; i < 10; ++i) EXPECT_EQ(Vec(r.Z.col(i)), z0);
}

TEST(Rollout, OneStepAndComposition) {
    const DeepKoopmanModel m = default_model(13);
    std::mt19937_64 rng(14);
    const Vec x = randn(2, 1, rng);
    const HistoryWindow H{randn(3, 25, rng)};
    const Mat u = randn(1, 12, rng);
    const Rollout r = rollout(m, x, H, u);
    Vec z = encode(m, x, H);
    for (Eigen::Index i = 0; i < 12; ++i) {
        z = m.A * z + m.B * u.col(i);
        EXPECT_LT((r.Z.col(i) - z).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + z.cwiseAbs().maxCoeff()));
        EXPECT_LT((r.X.col(i) - decode(m, r.Z.col(i))).cwiseAbs().maxCoeff(), 1e-12);
    }
    const Rollout one = rollout(m, x, H, u.leftCols(1));
    EXPECT_EQ(one.Z.col(0), r.Z.col(0));
}

TEST(Rollout, LatentSuperposition) {
    const DeepKoopmanModel m = default_model(15);
    std::mt19937_64 rng(16);
    const Vec z1 = randn(40, 1, rng), z2 = randn(40, 1, rng);
    const Mat u1 = randn(1, 15, rng), u2 = randn(1, 15, rng);
    const double a = 0.7, b = -1.3;
    const Mat lhs = propagate_latent(m, a * z1 + b * z2, a * u1 + b * u2);
    const Mat rhs = a * propagate_latent(m, z1, u1) + b * propagate_latent(m, z2, u2);
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-10 * (1.0 + rhs.cwiseAbs().maxCoeff()));
}

TEST(Loss, AllWeightsZero) {
    auto inst = oracle::make_small_instance(17);
    const LossBreakdown l = loss(inst.model, inst.windows, LossWeights{0, 0, 0, 0});
    EXPECT_EQ(l.total, 0.0);
}

TEST(Loss, ExactToyModelHasZeroLoss) {
    const auto toy = oracle::make_linear_toy(4, 120, 18);
    const DeepKoopmanModel m = oracle::exact_toy_model(toy);
    const auto windows = dataset::make_windows(toy.traj, 5, 10, 3);
    const LossBreakdown l = loss(m, windows, LossWeights{1, 1, 10, 1});
    EXPECT_LT(l.total, 1e-24);
    EXPECT_LT(l.rec, 1e-26);
    EXPECT_LT(l.lpred, 1e-24);
}

TEST(Loss, BreakdownSumsToTotalAndTermsAreNonnegative) {
    auto inst = oracle::make_small_instance(19);
    const LossWeights w{0.3, 1.7, 10, 0.9};
    const LossBreakdown l = loss(inst.model, inst.windows, w);
    EXPECT_GE(l.rec, 0.0);
    EXPECT_GE(l.step, 0.0);
    EXPECT_GE(l.pred, 0.0);
    EXPECT_GE(l.lpred, 0.0);
    EXPECT_NEAR(w.rec * l.rec + w.step * l.step + w.pred * l.pred + w.lpred * l.lpred, l.total, 1e-12 * l.total);
}

TEST(Loss, MatchesDirectPerWindowEvaluation) {
    auto inst = oracle::make_small_instance(20);
    const auto& m = inst.model;
    double rec = 0, step = 0, pred = 0, lpred = 0;
    for (const auto& w : inst.windows) {
        const Vec z = encode(m, w.x_k(), w.history());
        rec += (decode(m, z) - w.x_k()).squaredNorm();
        const Rollout r = rollout(m, w.x_k(), w.history(), w.u_future());
        step += (r.X.col(0) - w.x_future().col(0)).squaredNorm();
        for (Eigen::Index i = 0; i < w.horizon(); ++i) {
            pred += (r.X.col(i) - w.x_future().col(i)).squaredNorm();
            lpred += (r.Z.col(i) - encode(m, w.x_future().col(i), w.extended_history(i + 1))).squaredNorm();
        }
    }
    const double nb = static_cast<double>(inst.windows.size());
    const LossBreakdown l = loss(m, inst.windows, LossWeights{1, 1, 1, 1});
    EXPECT_NEAR(l.rec, rec / nb, 1e-10 * (1 + rec));
    EXPECT_NEAR(l.step, step / nb, 1e-10 * (1 + step));
    EXPECT_NEAR(l.pred, pred / nb, 1e-10 * (1 + pred));
    EXPECT_NEAR(l.lpred, lpred / nb, 1e-10 * (1 + lpred));
}

TEST(Gradient, FiniteDifferencesOverTwentySeeds) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto inst = oracle::make_small_instance(seed);
        const auto r = oracle::check_gradients(inst.model, inst.windows, LossWeights{0.7, 1, 10, 1});
        EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << seed << ": " << r.worst;
    }
}

TEST(Gradient, DefaultWeights) {
    auto inst = oracle::make_small_instance(21);
    EXPECT_LT(oracle::check_gradients(inst.model, inst.windows, LossWeights{}).max_rel_error, 1e-4);
}

TEST(Gradient, LibraryPrecheckAgrees) { EXPECT_LT(finite_difference_check(LossWeights{}, 5), 1e-4); }

TEST(Gradient, WeightTogglingRemovesExactlyThatTerm) {
    auto inst = oracle::make_small_instance(22);
    const LossWeights full{0.5, 1, 10, 2};
    auto grads = [&](const LossWeights& w) {
        DeepKoopmanModel m = inst.model;
        const Tape t = forward(m, inst.windows, w);
        DeepKoopmanModel g = backward(m, t);
        std::vector<Mat> out;
        for (auto& v : g.views()) out.push_back(v.value);
        return out;
    };
    const auto g_full = grads(full);
    const std::array<LossWeights, 4> singles{LossWeights{0.5, 0, 0, 0}, LossWeights{0, 1, 0, 0}, LossWeights{0, 0, 10, 0},
                                             LossWeights{0, 0, 0, 2}};
    std::array<LossWeights, 4> dropped{full, full, full, full};
    dropped[0].rec = 0;
    dropped[1].step = 0;
    dropped[2].pred = 0;
    dropped[3].lpred = 0;
    for (int term = 0; term < 4; ++term) {
        const auto g_single = grads(singles[term]);
        const auto g_drop = grads(dropped[term]);
        for (std::size_t t = 0; t < g_full.size(); ++t) {
            const double scale = 1.0 + g_full[t].cwiseAbs().maxCoeff();
            EXPECT_LT((g_full[t] - g_drop[t] - g_single[t]).cwiseAbs().maxCoeff(), 1e-10 * scale) << term << " " << t;
        }
    }
    // zero weight: nothing flows
    for (const auto& g : grads(LossWeights{0, 0, 0, 0})) EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gradient, TrainingPathSkipsLatentTermOnlyWhenUnweighted) {
    auto inst = oracle::make_small_instance(23);
    const LossWeights w{0, 1, 10, 0};
    DeepKoopmanModel m = inst.model;
    const Tape a = forward(m, inst.windows, w, true);
    const Tape b = forward(m, inst.windows, w, false);
    EXPECT_NEAR(a.loss.total, b.loss.total, 1e-14 * a.loss.total);
    DeepKoopmanModel ga = backward(m, a);
    DeepKoopmanModel gb = backward(m, b);
    auto va = ga.views();
    auto vb = gb.views();
    for (std::size_t t = 0; t < va.size(); ++t)
        EXPECT_LT((va[t].value - vb[t].value).cwiseAbs().maxCoeff(), 1e-13 * (1.0 + va[t].value.cwiseAbs().maxCoeff()))
            << va[t].name;
}

TEST(Gradient, StaleTapeIsRejected) {
    auto inst = oracle::make_small_instance(24);
    DeepKoopmanModel m = inst.model;
    const Tape t = forward(m, inst.windows, LossWeights{});
    m.views();
    EXPECT_THROW(backward(m, t), PreconditionError);
}

TEST(Train, ZeroEpochsReturnsInitialModel) {
    const auto toy = oracle::make_linear_toy(2, 60, 25);
    const auto windows = dataset::make_windows(toy.traj, 4, 3, 1);
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.eta_H = 4;
    cfg.horizon = 3;
    cfg.seed = 7;
    const Architecture arch = oracle::toy_architecture(2);
    const TrainResult r = train(windows, cfg, arch);
    const DeepKoopmanModel init = DeepKoopmanModel::init(arch, 7);
    EXPECT_EQ(r.model.A, init.A);
    EXPECT_EQ(r.model.encoder.layers[0].W, init.encoder.layers[0].W);
    EXPECT_TRUE(r.log.empty());
}

TEST(Train, FixedSeedIsBitIdentical) {
    auto inst = oracle::make_small_instance(26, 100);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 2;
    cfg.eta_H = 4;
    cfg.horizon = 3;
    cfg.seed = 99;
    const TrainResult a = train_from(inst.model, inst.windows, cfg);
    const TrainResult b = train_from(inst.model, inst.windows, cfg);
    EXPECT_EQ(to_json(Checkpoint{a.model, {}, cfg}).dump(), to_json(Checkpoint{b.model, {}, cfg}).dump());
    ASSERT_EQ(a.log.size(), 3u);
    for (std::size_t e = 0; e < 3; ++e) EXPECT_EQ(a.log[e].mean.total, b.log[e].mean.total);
    cfg.seed = 100;
    const TrainResult c = train_from(inst.model, inst.windows, cfg);
    EXPECT_NE(c.model.A, a.model.A);
}

TEST(Train, ReducesToyLoss) {
    const auto toy = oracle::make_linear_toy(2, 200, 27);
    const auto windows = dataset::make_windows(toy.traj, 4, 5, 1);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.batch_size = 32;
    cfg.learning_rate = 5e-3;
    cfg.eta_H = 4;
    cfg.horizon = 5;
    const TrainResult r = train(windows, cfg, oracle::toy_architecture(2));
    EXPECT_LT(r.log.back().mean.total, 0.1 * r.log.front().mean.total);
}

TEST(Train, RejectsMismatchedWindows) {
    auto inst = oracle::make_small_instance(28);
    TrainConfig cfg;
    cfg.eta_H = 5;
    cfg.horizon = 3;
    EXPECT_THROW(train_from(inst.model, inst.windows, cfg), PreconditionError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    const Architecture arch;
    TrainConfig cfg;
    cfg.seed = 31;
    const dataset::Normalizer nz{(Vec(2) << 1.5, 2.5).finished(), (Vec(2) << 0.7, 0.9).finished(), Vec::Constant(1, 0.0),
                                 Vec::Constant(1, 0.03)};
    const Checkpoint ck{DeepKoopmanModel::init(arch, 3), nz, cfg};
    const std::string text = to_json(ck).dump();
    const Checkpoint back = checkpoint_from_json(io::json::parse(text));
    EXPECT_EQ(back.model.A, ck.model.A);
    EXPECT_EQ(back.model.B, ck.model.B);
    EXPECT_EQ(back.model.lstm.Uo, ck.model.lstm.Uo);
    EXPECT_EQ(back.model.decoder.layers[2].b, ck.model.decoder.layers[2].b);
    EXPECT_EQ(back.normalizer, nz);
    EXPECT_EQ(back.config, cfg);
    EXPECT_EQ(to_json(back).dump(), text);
}

TEST(Checkpoint, IncompatibleVersion) {
    io::json j = to_json(Checkpoint{DeepKoopmanModel::init(Architecture{}, 3), {}, {}});
    j["version"] = 2;
    EXPECT_THROW(checkpoint_from_json(j), DataError);
}
