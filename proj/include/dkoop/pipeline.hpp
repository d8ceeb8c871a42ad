#pragma once

// End-to-end experiment driver: simulate -> train (eDMD known / unknown, deep model)
// -> evaluate. Every file written embeds the hash of the effective configuration.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <memory>
#include <string>
#include <vector>

#include "dkoop/config.hpp"
#include "dkoop/csv.hpp"
#include "dkoop/dataset.hpp"
#include "dkoop/dko.hpp"
#include "dkoop/edmd.hpp"
#include "dkoop/error.hpp"
#include "dkoop/eval.hpp"
#include "dkoop/gradient_check.hpp"
#include "dkoop/serialize.hpp"
#include "dkoop/sim.hpp"
#include "dkoop/svg.hpp"

namespace dkoop::pipeline {

namespace fs = std::filesystem;
using Logger = std::function<void(const std::string&)>;

inline const std::vector<std::string>& families() {
    static const std::vector<std::string> f{"edmd-known", "dko", "edmd-unknown"};
    return f;
}

inline std::string family_label(const std::string& family) {
    if (family == "edmd-known") return "eDMD (known dynamics)";
    if (family == "edmd-unknown") return "eDMD (unknown dynamics)";
    if (family == "dko") return "LSTM Deep Koopman";
    throw ConfigError("unknown model family '" + family + "' (expected edmd-known, edmd-unknown or dko)");
}

struct Context {
    config::RunConfig cfg;
    std::string hash;
    fs::path out;
    Logger log;

    explicit Context(config::RunConfig c, Logger l = {}) : cfg(std::move(c)), log(std::move(l)) {
        cfg.validate();
        hash = config::hash(cfg);
        out = cfg.output_dir;
    }

    void info(const std::string& msg) const {
        if (log) log(msg);
    }

    std::string path(const std::string& name) const { return (out / name).string(); }

    void ensure_out() const {
        std::error_code ec;
        fs::create_directories(out, ec);
        if (ec || !fs::is_directory(out)) throw DataError("cannot create output directory '" + out.string() + "'");
    }

    void write(const std::string& name, const std::string& text) const { io::write_text(path(name), text); }

    void write_json(const std::string& name, io::json doc) const {
        doc["config_hash"] = hash;
        write(name, doc.dump(1) + "\n");
    }

    std::vector<std::pair<std::string, std::string>> csv_meta() const { return {{"config_hash", hash}}; }
};

inline edmd::DictionarySpec dictionary_for(const config::RunConfig& cfg, const std::string& family) {
    edmd::DictionarySpec s;
    s.degree = cfg.edmd.degree;
    s.n_delays = cfg.edmd.n_delays;
    s.include_sqrt = family == "edmd-known";
    // Noisy levels can dip below zero; the square-root terms see them clamped.
    s.clamp_negative = true;
    return s;
}

// ---------------------------------------------------------------- simulate

struct SimulateResult {
    Trajectory clean;
    Trajectory noisy;
};

inline SimulateResult cmd_simulate(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    ctx.ensure_out();
    const auto n = static_cast<std::size_t>(cfg.signal.samples);
    const sim::InputSignal q = sim::generate_random_input(cfg.signal.seed, n, cfg.signal.input);
    SimulateResult r;
    r.clean = sim::simulate(cfg.plant, q, cfg.initial_state, n);
    r.noisy = sim::add_noise(r.clean, cfg.noise.std_dev, cfg.noise.seed);

    const std::string clean_csv = io::trajectory_to_csv(r.clean, ctx.csv_meta());
    const std::string noisy_csv = io::trajectory_to_csv(r.noisy, ctx.csv_meta());
    ctx.write("clean.csv", clean_csv);
    ctx.write("noisy.csv", noisy_csv);

    io::json manifest{{"format", "dkoop-manifest"},
                      {"version", 1},
                      {"samples", cfg.signal.samples},
                      {"Ts", cfg.plant.Ts},
                      {"tau_steps", cfg.plant.tau_steps},
                      {"seeds", {{"signal", cfg.signal.seed}, {"noise", cfg.noise.seed}, {"dko", cfg.dko.train.seed}}},
                      {"config", config::to_json(cfg)},
                      {"files",
                       {{"clean.csv", {{"rows", r.clean.X.cols()}, {"fnv1a", io::fnv1a_hex(clean_csv)}}},
                        {"noisy.csv", {{"rows", r.noisy.X.cols()}, {"fnv1a", io::fnv1a_hex(noisy_csv)}}}}}};
    ctx.write_json("manifest.json", std::move(manifest));
    ctx.info("simulate: " + std::to_string(n) + " samples at Ts=" + io::format_double(cfg.plant.Ts) +
             " s, delay " + std::to_string(cfg.plant.tau_steps) + " samples -> " + ctx.out.string());
    return r;
}

inline Trajectory load_trajectory(const Context& ctx, const std::string& name) {
    const std::string p = ctx.path(name);
    if (!fs::exists(p)) throw DataError("missing dataset '" + p + "' (run the simulate command first)");
    return io::trajectory_from_csv(io::read_text(p)).traj;
}

// ---------------------------------------------------------------- train

struct TrainSummary {
    std::string family;
    Eigen::Index lifted_dim = 0;
    Eigen::Index a_rows = 0, a_cols = 0, b_rows = 0, b_cols = 0;
    double final_loss = 0.0;
};

inline TrainSummary train_edmd(const Context& ctx, const std::string& family, const Trajectory& train) {
    const edmd::DictionarySpec spec = dictionary_for(ctx.cfg, family);
    const edmd::EdmdModel model = edmd::fit_trajectory(train, spec, ctx.cfg.edmd.ridge);
    io::json doc = edmd::to_json(model);
    doc["family"] = family;
    ctx.write_json(family + ".json", std::move(doc));
    ctx.write(family + ".log.csv", "# config_hash=" + ctx.hash + "\nfamily,lifted_dim,snapshots,residual_rms\n" + family +
                                       "," + std::to_string(edmd::lifted_dim(spec)) + "," +
                                       std::to_string(train.length() - spec.n_delays) + "," +
                                       io::format_double(model.residual_rms) + "\n");
    ctx.info("train " + family + ": lifted dimension " + std::to_string(edmd::lifted_dim(spec)) + ", A " +
             std::to_string(model.A.rows()) + "x" + std::to_string(model.A.cols()) + ", B " + std::to_string(model.B.rows()) +
             "x" + std::to_string(model.B.cols()) + ", residual rms " + io::format_double(model.residual_rms));
    return {family, edmd::lifted_dim(spec), model.A.rows(), model.A.cols(), model.B.rows(), model.B.cols(), model.residual_rms};
}

inline TrainSummary train_dko(const Context& ctx, const Trajectory& train) {
    const auto& cfg = ctx.cfg;
    if (cfg.dko.gradient_check) {
        const double err = dko::finite_difference_check(cfg.dko.train.weights, cfg.dko.train.seed);
        if (!(err < 1e-4))
            throw NumericalError("dko gradient pre-check failed: max relative error " + io::format_double(err));
        ctx.info("train dko: gradient pre-check passed (max relative error " + io::format_double(err) + ")");
    }
    const dataset::Normalizer nz =
        dataset::fit_normalizer(train, cfg.signal.input.q_min, cfg.signal.input.q_max);
    auto normalized = std::make_shared<const Trajectory>(nz.apply(train));
    const auto windows =
        dataset::make_windows(normalized, cfg.dko.train.eta_H, cfg.dko.train.horizon, cfg.dko.train.stride);
    if (windows.empty()) throw DataError("train dko: training half too short for eta_H + N_L");
    ctx.info("train dko: " + std::to_string(windows.size()) + " windows, " + std::to_string(cfg.dko.train.epochs) +
             " epochs, batch " + std::to_string(cfg.dko.train.batch_size));

    std::string log_csv = "# config_hash=" + ctx.hash + "\nepoch,total,rec,step,pred,lpred\n";
    const auto t0 = std::chrono::steady_clock::now();
    const int every = std::max(1, cfg.dko.train.epochs / 50);
    auto on_epoch = [&](const dko::EpochLog& e) {
        log_csv += std::to_string(e.epoch) + "," + io::format_double(e.mean.total) + "," + io::format_double(e.mean.rec) +
                   "," + io::format_double(e.mean.step) + "," + io::format_double(e.mean.pred) + "," +
                   io::format_double(e.mean.lpred) + "\n";
        if (e.epoch % every == 0 || e.epoch + 1 == cfg.dko.train.epochs) {
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            char buf[160];
            std::snprintf(buf, sizeof buf, "train dko: epoch %d/%d loss %.6g (step %.4g pred %.4g lpred %.4g) %.0fs",
                          e.epoch + 1, cfg.dko.train.epochs, e.mean.total, e.mean.step, e.mean.pred, e.mean.lpred, secs);
            ctx.info(buf);
        }
    };
    dko::TrainResult res = dko::train(windows, cfg.dko.train, cfg.dko.arch, on_epoch);

    dko::Checkpoint ck{std::move(res.model), nz, cfg.dko.train};
    io::json doc = dko::to_json(ck);
    doc["family"] = "dko";
    ctx.write_json("dko.json", std::move(doc));
    ctx.write("dko.log.csv", log_csv);
    const double final_loss = res.log.empty() ? 0.0 : res.log.back().mean.total;
    ctx.info("train dko: A_K " + std::to_string(ck.model.A.rows()) + "x" + std::to_string(ck.model.A.cols()) + ", B_K " +
             std::to_string(ck.model.B.rows()) + "x" + std::to_string(ck.model.B.cols()));
    return {"dko", ck.model.A.rows(), ck.model.A.rows(), ck.model.A.cols(), ck.model.B.rows(), ck.model.B.cols(), final_loss};
}

inline TrainSummary cmd_train(const Context& ctx, const std::string& family) {
    family_label(family);
    ctx.ensure_out();
    const Trajectory noisy = load_trajectory(ctx, "noisy.csv");
    const auto [train, test] = dataset::split_train_test(noisy);
    if (family == "dko") return train_dko(ctx, train);
    return train_edmd(ctx, family, train);
}

// ---------------------------------------------------------------- evaluate

struct LoadedModel {
    std::string family;
    std::optional<edmd::EdmdModel> edmd;
    std::optional<dko::Checkpoint> dko;

    Eigen::Index warmup() const { return edmd ? eval::warmup_samples(*edmd) : eval::warmup_samples(*dko); }
    const Mat& A() const { return edmd ? edmd->A : dko->model.A; }
    Mat rollout(const Trajectory& measured, Eigen::Index start, Eigen::Index N) const {
        return edmd ? eval::full_test_rollout(*edmd, measured, start, N) : eval::full_test_rollout(*dko, measured, start, N);
    }
};

inline LoadedModel load_model(const Context& ctx, const std::string& family) {
    family_label(family);
    const std::string p = ctx.path(family + ".json");
    if (!fs::exists(p)) throw DataError("missing checkpoint '" + p + "' (run the train command first)");
    const io::json doc = io::parse_json(io::read_text(p), p);
    LoadedModel m{family, {}, {}};
    if (family == "dko")
        m.dko = dko::checkpoint_from_json(doc);
    else
        m.edmd = edmd::from_json(doc);
    return m;
}

inline eval::EvalReport evaluate_models(const Context& ctx, const std::vector<LoadedModel>& models) {
    if (models.empty()) throw ConfigError("evaluate: no models to evaluate");
    const Trajectory clean = load_trajectory(ctx, "clean.csv");
    const Trajectory noisy = load_trajectory(ctx, "noisy.csv");
    if (clean.length() != noisy.length()) throw DataError("evaluate: clean and noisy datasets differ in length");
    const Trajectory clean_test = dataset::split_train_test(clean).second;
    const Trajectory noisy_test = dataset::split_train_test(noisy).second;

    Eigen::Index warmup = 0;
    for (const auto& m : models) warmup = std::max(warmup, m.warmup());
    const Eigen::Index N = noisy_test.length() - warmup;
    if (N <= 0) throw DataError("evaluate: test half shorter than the warm-up");

    eval::EvalReport rep;
    rep.Ts = noisy_test.Ts;
    rep.warmup = warmup;
    rep.truth = clean_test.X.middleCols(warmup + 1, N);
    rep.operating_level = ctx.cfg.eval.operating_level;
    rep.truth_eigs = eval::linearized_truth_eigs(ctx.cfg.plant, rep.operating_level);
    for (const auto& m : models) {
        eval::ModelResult r;
        r.name = m.family;
        r.prediction = m.rollout(noisy_test, warmup, N);
        r.mae = eval::mae(r.prediction, rep.truth);
        r.eigs = eval::model_eigs(m.A());
        ctx.info("evaluate " + m.family + ": MAE " + io::format_double(r.mae) + " m");
        rep.models.push_back(std::move(r));
    }
    rep.normalize();
    return rep;
}

inline std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline void write_report(const Context& ctx, const eval::EvalReport& rep) {
    ctx.ensure_out();
    const std::string meta = "# config_hash=" + ctx.hash + "\n";

    std::string table = meta + "model,MAE [m],MAE [%]\n";
    for (const auto& m : rep.models)
        table += family_label(m.name) + "," + fixed(m.mae, 3) + "," + fixed(m.mae_percent, 0) + "\n";
    ctx.write("mae_table.csv", table);

    // Index k counts test-half samples; time is relative to the start of the test half.
    std::string traces = meta + "k,t,h1_true,h2_true";
    for (const auto& m : rep.models) traces += ",h1_" + m.name + ",h2_" + m.name;
    traces += "\n";
    for (Eigen::Index j = 0; j < rep.truth.cols(); ++j) {
        const Eigen::Index k = rep.warmup + 1 + j;
        traces += std::to_string(k) + "," + io::format_double(static_cast<double>(k) * rep.Ts) + "," +
                  io::format_double(rep.truth(0, j)) + "," + io::format_double(rep.truth(1, j));
        for (const auto& m : rep.models)
            traces += "," + io::format_double(m.prediction(0, j)) + "," + io::format_double(m.prediction(1, j));
        traces += "\n";
    }
    ctx.write("traces.csv", traces);

    std::string eig = meta + "source,index,re,im,modulus\n";
    auto add_eigs = [&](const std::string& src, const std::vector<eval::Complex>& ev) {
        for (std::size_t i = 0; i < ev.size(); ++i)
            eig += src + "," + std::to_string(i) + "," + io::format_double(ev[i].real()) + "," +
                   io::format_double(ev[i].imag()) + "," + io::format_double(std::abs(ev[i])) + "\n";
    };
    add_eigs("truth", rep.truth_eigs);
    for (const auto& m : rep.models) add_eigs(m.name, m.eigs);
    ctx.write("eigenvalues.csv", eig);

    auto eig_json = [](const std::vector<eval::Complex>& ev, std::size_t count) {
        io::json a = io::json::array();
        for (std::size_t i = 0; i < std::min(count, ev.size()); ++i) a.push_back({{"re", ev[i].real()}, {"im", ev[i].imag()}});
        return a;
    };
    io::json models = io::json::array();
    for (const auto& m : rep.models)
        models.push_back({{"family", m.name},
                          {"label", family_label(m.name)},
                          {"mae", m.mae},
                          {"mae_percent", m.mae_percent},
                          {"koopman_dim", static_cast<std::int64_t>(m.eigs.size())},
                          {"dominant_real_eig", eval::dominant_real_eigenvalue(m.eigs)},
                          {"dominant_eigs", eig_json(m.eigs, static_cast<std::size_t>(ctx.cfg.eval.report_eigs))}});
    io::json doc{{"format", "dkoop-report"},
                 {"version", 1},
                 {"warmup", rep.warmup},
                 {"predicted_samples", rep.truth.cols()},
                 {"operating_level", rep.operating_level},
                 {"truth_eigs", eig_json(rep.truth_eigs, rep.truth_eigs.size())},
                 {"models", std::move(models)}};
    ctx.write_json("report.json", std::move(doc));

    static const std::map<std::string, std::string> colors{
        {"edmd-known", "#2ca02c"}, {"dko", "#d62728"}, {"edmd-unknown", "#ff7f0e"}};
    const Eigen::Index shown = std::min<Eigen::Index>(rep.truth.cols(), ctx.cfg.eval.plot_samples);
    std::vector<svg::Panel> trace_panels;
    for (int s = 0; s < 2; ++s) {
        svg::Panel p{"Tank " + std::to_string(s + 1) + " level (test data)", "time [s]", "h" + std::to_string(s + 1) + " [m]", {}};
        svg::Series truth{"simulation", "#1f77b4", {}, {}, false, 2.0};
        for (Eigen::Index j = 0; j < shown; ++j) {
            truth.x.push_back(static_cast<double>(rep.warmup + 1 + j) * rep.Ts);
            truth.y.push_back(rep.truth(s, j));
        }
        p.series.push_back(truth);
        for (const auto& m : rep.models) {
            svg::Series ser{family_label(m.name), colors.at(m.name), truth.x, {}, false, 1.2};
            for (Eigen::Index j = 0; j < shown; ++j) ser.y.push_back(m.prediction(s, j));
            p.series.push_back(std::move(ser));
        }
        trace_panels.push_back(std::move(p));
    }
    ctx.write("predictions.svg", svg::render(trace_panels, "config_hash=" + ctx.hash));

    std::vector<svg::Panel> eig_panels;
    svg::Panel truth_panel{"Linearized plant at h = " + fixed(rep.operating_level, 2) + " m", "Re", "Im", {}, true, true};
    svg::Series ts{"original", "#1f77b4", {}, {}, true, 1.5, "x"};
    for (const auto& e : rep.truth_eigs) ts.x.push_back(e.real()), ts.y.push_back(e.imag());
    truth_panel.series.push_back(ts);
    eig_panels.push_back(truth_panel);
    for (const auto& m : rep.models) {
        svg::Panel p{family_label(m.name) + " Koopman eigenvalues", "Re", "Im", {}, true, true};
        svg::Series se{family_label(m.name), colors.at(m.name), {}, {}, true};
        for (const auto& e : m.eigs) se.x.push_back(e.real()), se.y.push_back(e.imag());
        p.series.push_back(std::move(se));
        p.series.push_back(ts);
        eig_panels.push_back(std::move(p));
    }
    ctx.write("eigenvalues.svg", svg::render(eig_panels, "config_hash=" + ctx.hash, 620.0, 440.0));
}

inline eval::EvalReport cmd_evaluate(const Context& ctx, const std::vector<std::string>& requested) {
    std::vector<std::string> fams = requested;
    if (fams.empty())
        for (const auto& f : families())
            if (fs::exists(ctx.path(f + ".json"))) fams.push_back(f);
    std::vector<LoadedModel> models;
    for (const auto& f : fams) models.push_back(load_model(ctx, f));
    eval::EvalReport rep = evaluate_models(ctx, models);
    write_report(ctx, rep);
    return rep;
}

/// simulate, train every family, evaluate.
inline eval::EvalReport cmd_run(const Context& ctx) {
    cmd_simulate(ctx);
    for (const auto& f : families()) cmd_train(ctx, f);
    return cmd_evaluate(ctx, families());
}

}  // namespace dkoop::pipeline
