// dkoop: simulate the delayed two-tank plant, train eDMD and deep Koopman models,
// evaluate open-loop predictions.

#include <malloc.h>

#include <cmath>
#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dkoop/config.hpp"
#include "dkoop/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kNumerical = 4 };

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> samples;
    std::optional<int> epochs;
    std::string out;
    std::vector<std::string> families;
    bool quiet = false;
};

dkoop::config::RunConfig effective_config(const Options& o) {
    dkoop::config::RunConfig c = o.config.empty() ? dkoop::config::RunConfig{} : dkoop::config::load(o.config);
    if (o.seed) dkoop::config::apply_seed(c, *o.seed);
    if (o.samples) c.signal.samples = *o.samples;
    if (o.epochs) c.dko.train.epochs = *o.epochs;
    if (!o.out.empty()) c.output_dir = o.out;
    c.validate();
    return c;
}

std::string eig_text(const dkoop::eval::Complex& e) {
    char buf[48];
    if (e.imag() == 0.0)
        std::snprintf(buf, sizeof buf, "%.5f", e.real());
    else
        std::snprintf(buf, sizeof buf, "%.5f%+.5fi", e.real(), std::abs(e.imag()));
    return buf;
}

void print_table(const dkoop::eval::EvalReport& rep) {
    std::printf("%-26s %10s %9s %20s %14s\n", "model", "MAE [m]", "MAE [%]", "leading eig", "dominant real");
    for (const auto& m : rep.models)
        std::printf("%-26s %10.4f %9.0f %20s %14.5f\n", dkoop::pipeline::family_label(m.name).c_str(), m.mae,
                    m.mae_percent, eig_text(m.eigs.front()).c_str(), dkoop::eval::dominant_real_eigenvalue(m.eigs));
    std::printf("%-26s %10s %9s %20s %14.5f\n", "linearized plant", "", "", eig_text(rep.truth_eigs.front()).c_str(),
                rep.truth_eigs.front().real());
}

}  // namespace

int main(int argc, char** argv) {
    // keep training temporaries off mmap
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    mallopt(M_TOP_PAD, 64 << 20);

    CLI::App app{"Deep Koopman operator models for a delayed two-tank system"};
    app.require_subcommand(1);
    Options o;
    auto common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "master seed (signal = s, noise = s+1, training = s+2)");
        sub->add_option("--samples", o.samples, "simulated samples");
        sub->add_option("--epochs", o.epochs, "deep model training epochs");
        sub->add_option("-o,--out", o.out, "output directory");
        sub->add_flag("-q,--quiet", o.quiet, "no progress on stderr");
    };
    auto* sim = app.add_subcommand("simulate", "simulate the plant and write clean/noisy datasets");
    auto* train = app.add_subcommand("train", "fit one model family on the noisy training half");
    auto* evaluate = app.add_subcommand("evaluate", "roll out trained models over the test half and write reports");
    auto* run = app.add_subcommand("run", "simulate, train all families, evaluate");
    auto* show = app.add_subcommand("config", "print the effective configuration");
    for (auto* s : {sim, train, evaluate, run, show}) common(s);
    train->add_option("-f,--family", o.families, "edmd-known | edmd-unknown | dko")->required()->expected(1);
    evaluate->add_option("-f,--family", o.families, "families to evaluate (default: all trained)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfig;
    }

    try {
        const auto cfg = effective_config(o);
        const dkoop::pipeline::Logger log = o.quiet ? dkoop::pipeline::Logger{}
                                                    : [](const std::string& m) { std::cerr << m << std::endl; };
        const dkoop::pipeline::Context ctx(cfg, log);
        if (*show) {
            std::cout << dkoop::config::dump(cfg);
        } else if (*sim) {
            dkoop::pipeline::cmd_simulate(ctx);
        } else if (*train) {
            dkoop::pipeline::cmd_train(ctx, o.families.front());
        } else if (*evaluate) {
            print_table(dkoop::pipeline::cmd_evaluate(ctx, o.families));
        } else if (*run) {
            print_table(dkoop::pipeline::cmd_run(ctx));
        }
    } catch (const dkoop::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const dkoop::PreconditionError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const dkoop::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const dkoop::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumerical;
    } catch (const dkoop::DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kOther;
    }
    return kOk;
}
