#pragma once

// Declarative description of one experiment. The file form is a JSON document; every
// field is written back out, so load(save(cfg)) == cfg.

#include <cstdint>
#include <string>

#include "dkoop/dko.hpp"
#include "dkoop/edmd.hpp"
#include "dkoop/error.hpp"
#include "dkoop/serialize.hpp"
#include "dkoop/sim.hpp"

namespace dkoop::config {

struct SignalConfig {
    std::int64_t samples = 400000;
    sim::RandomInputSpec input;
    std::uint64_t seed = 1;

    bool operator==(const SignalConfig&) const = default;
};

struct NoiseConfig {
    double std_dev = 0.1;
    std::uint64_t seed = 2;

    bool operator==(const NoiseConfig&) const = default;
};

struct EdmdConfig {
    int degree = 2;
    int n_delays = 20;
    double ridge = 1e-8;

    bool operator==(const EdmdConfig&) const = default;
};

struct DkoConfig {
    dko::Architecture arch;
    dko::TrainConfig train = [] {
        dko::TrainConfig t;
        t.seed = 3;
        return t;
    }();
    bool gradient_check = true;

    bool operator==(const DkoConfig&) const = default;
};

struct EvalConfig {
    double operating_level = 1.0;
    int report_eigs = 4;
    std::int64_t plot_samples = 3000;

    bool operator==(const EvalConfig&) const = default;
};

struct RunConfig {
    sim::TankParams plant;
    SignalConfig signal;
    sim::TankState initial_state{1.0, 1.0};
    NoiseConfig noise;
    std::string split_rule = "contiguous-half";
    EdmdConfig edmd;
    DkoConfig dko;
    EvalConfig eval;
    std::string output_dir = "out";

    void validate() const;
    bool operator==(const RunConfig&) const = default;
};

inline void RunConfig::validate() const {
    try {
        plant.validate();
        detail::require(signal.samples >= 2, "signal.samples must be >= 2");
        detail::require(signal.input.q_min <= signal.input.q_max, "signal.q_min must not exceed q_max");
        detail::require(signal.input.q_min >= 0.0, "signal.q_min must be >= 0");
        detail::require(signal.input.hold_min >= 1 && signal.input.hold_min <= signal.input.hold_max,
                        "signal hold range must satisfy 1 <= hold_min <= hold_max");
        detail::require(initial_state.h1 >= 0 && initial_state.h2 >= 0, "initial levels must be >= 0");
        detail::require(noise.std_dev >= 0.0, "noise.std must be >= 0");
        detail::require(split_rule == "contiguous-half", "split.rule must be 'contiguous-half'");
        detail::require(edmd.degree >= 1 && edmd.n_delays >= 0 && edmd.ridge >= 0.0, "invalid edmd section");
        dko.arch.validate();
        detail::require(dko.arch.n_states == 2 && dko.arch.n_inputs == 1,
                        "dko.architecture must have 2 states and 1 input for the tank benchmark");
        dko.train.validate();
        detail::require(eval.operating_level > 0.0, "eval.operating_level must be positive");
        detail::require(eval.report_eigs >= 1 && eval.plot_samples >= 2, "invalid eval section");
        detail::require(!output_dir.empty(), "output_dir must not be empty");
    } catch (const PreconditionError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

inline io::json to_json(const RunConfig& c) {
    return io::json{
        {"format", "dkoop-config"},
        {"version", 1},
        {"plant",
         {{"k1", c.plant.k1},
          {"k2", c.plant.k2},
          {"F1", c.plant.F1},
          {"F2", c.plant.F2},
          {"tau_steps", c.plant.tau_steps},
          {"Ts", c.plant.Ts},
          {"substeps", c.plant.substeps}}},
        {"signal",
         {{"samples", c.signal.samples},
          {"q_min", c.signal.input.q_min},
          {"q_max", c.signal.input.q_max},
          {"hold_min", c.signal.input.hold_min},
          {"hold_max", c.signal.input.hold_max},
          {"seed", c.signal.seed}}},
        {"initial_state", {{"h1", c.initial_state.h1}, {"h2", c.initial_state.h2}}},
        {"noise", {{"std", c.noise.std_dev}, {"seed", c.noise.seed}}},
        {"split", {{"rule", c.split_rule}}},
        {"edmd", {{"degree", c.edmd.degree}, {"n_delays", c.edmd.n_delays}, {"ridge", c.edmd.ridge}}},
        {"dko", {{"architecture", dko::to_json(c.dko.arch)}, {"train", dko::to_json(c.dko.train)}, {"gradient_check", c.dko.gradient_check}}},
        {"eval",
         {{"operating_level", c.eval.operating_level},
          {"report_eigs", c.eval.report_eigs},
          {"plot_samples", c.eval.plot_samples}}},
        {"output_dir", c.output_dir}};
}

/// Missing keys keep their defaults, so a config file only needs what it changes.
inline RunConfig from_json(const io::json& j) {
    RunConfig c;
    auto get = [](const io::json& obj, const char* key, auto& dst) {
        if (obj.contains(key)) dst = obj.at(key).get<std::remove_reference_t<decltype(dst)>>();
    };
    try {
        if (!j.is_object()) throw ConfigError("config: top level must be an object");
        if (j.contains("format") && j["format"] != "dkoop-config") throw ConfigError("config: not a dkoop-config document");
        if (j.contains("version") && j["version"] != 1) throw ConfigError("config: unsupported version");
        if (j.contains("plant")) {
            const auto& p = j["plant"];
            get(p, "k1", c.plant.k1);
            get(p, "k2", c.plant.k2);
            get(p, "F1", c.plant.F1);
            get(p, "F2", c.plant.F2);
            get(p, "tau_steps", c.plant.tau_steps);
            get(p, "Ts", c.plant.Ts);
            get(p, "substeps", c.plant.substeps);
        }
        if (j.contains("signal")) {
            const auto& s = j["signal"];
            get(s, "samples", c.signal.samples);
            get(s, "q_min", c.signal.input.q_min);
            get(s, "q_max", c.signal.input.q_max);
            get(s, "hold_min", c.signal.input.hold_min);
            get(s, "hold_max", c.signal.input.hold_max);
            get(s, "seed", c.signal.seed);
        }
        if (j.contains("initial_state")) {
            get(j["initial_state"], "h1", c.initial_state.h1);
            get(j["initial_state"], "h2", c.initial_state.h2);
        }
        if (j.contains("noise")) {
            get(j["noise"], "std", c.noise.std_dev);
            get(j["noise"], "seed", c.noise.seed);
        }
        if (j.contains("split")) get(j["split"], "rule", c.split_rule);
        if (j.contains("edmd")) {
            get(j["edmd"], "degree", c.edmd.degree);
            get(j["edmd"], "n_delays", c.edmd.n_delays);
            get(j["edmd"], "ridge", c.edmd.ridge);
        }
        if (j.contains("dko")) {
            const auto& d = j["dko"];
            if (d.contains("architecture")) {
                io::json a = dko::to_json(c.dko.arch);
                a.update(d["architecture"]);
                c.dko.arch = dko::architecture_from_json(a);
            }
            if (d.contains("train")) {
                io::json t = dko::to_json(c.dko.train);
                if (d["train"].contains("weights")) {
                    io::json w = t["weights"];
                    w.update(d["train"]["weights"]);
                    t.update(d["train"]);
                    t["weights"] = w;
                } else {
                    t.update(d["train"]);
                }
                c.dko.train = dko::train_config_from_json(t);
            }
            get(d, "gradient_check", c.dko.gradient_check);
        }
        if (j.contains("eval")) {
            get(j["eval"], "operating_level", c.eval.operating_level);
            get(j["eval"], "report_eigs", c.eval.report_eigs);
            get(j["eval"], "plot_samples", c.eval.plot_samples);
        }
        get(j, "output_dir", c.output_dir);
    } catch (const io::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const PreconditionError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

inline RunConfig load(const std::string& path) {
    std::string text;
    try {
        text = io::read_text(path);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    try {
        return from_json(io::json::parse(text));
    } catch (const io::json::exception& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
}

inline std::string dump(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

/// Hash of the canonical document without output_dir; embedded in every output file.
inline std::string hash(const RunConfig& c) {
    io::json j = to_json(c);
    j.erase("output_dir");
    return io::fnv1a_hex(j.dump());
}

/// One seed drives all three random streams.
inline void apply_seed(RunConfig& c, std::uint64_t seed) {
    c.signal.seed = seed;
    c.noise.seed = seed + 1;
    c.dko.train.seed = seed + 2;
}

}  // namespace dkoop::config
