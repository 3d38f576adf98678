#include <cstdlib>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "markovopt/errors.hpp"
#include "markovopt/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

std::vector<std::string> split_keys(const std::string& text) {
    std::vector<std::string> keys;
    std::string current;
    for (char c : text) {
        if (c == ',') {
            keys.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    keys.push_back(current);
    return keys;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic optimization over Markovian data: MAG and baselines"};
    app.require_subcommand(1);
    app.footer("Configuration keys (config file lines or key=value overrides on `run`):\n" +
               markovopt::config_keys_help());

    // Flags go through the same setter as config files so both paths validate identically.
    std::string experiment, scale, seed, seeds, out, jobs, config_file;
    std::vector<std::string> overrides;

    auto* run = app.add_subcommand("run", "Run an experiment preset and write a CSV");
    run->add_option("--experiment", experiment, "fig1, fig2, nonconvex, td or custom");
    run->add_option("--scale", scale, "desk or full");
    run->add_option("--seed", seed, "base seed (MARKOVOPT_SEED overrides)");
    run->add_option("--seeds", seeds, "number of seeds");
    run->add_option("--out", out, "output CSV path");
    run->add_option("--jobs", jobs, "concurrent runs");
    run->add_option("--config", config_file, "key=value config file");
    run->add_option("overrides", overrides, "key=value settings (applied after --config)");

    std::string in_path, summary_out, by;
    auto* summarize = app.add_subcommand("summarize", "Aggregate a run CSV across seeds");
    summarize->add_option("--in", in_path, "input CSV")->required();
    summarize->add_option("--out", summary_out, "output CSV")->required();
    summarize->add_option("--by", by, "comma separated group keys")->default_str("experiment,method,metric_name,step");

    std::string suite = "all";
    auto* verify = app.add_subcommand("verify", "Run property checks");
    verify->add_option("--suite", suite, "chains, estimators, optim, problems or all");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*run) {
            markovopt::ExperimentConfig config;
            if (!config_file.empty()) {
                markovopt::apply_config_file(config, config_file);
            }
            const std::pair<const char*, std::string*> flags[] = {
                {"experiment", &experiment}, {"scale", &scale}, {"seed", &seed},
                {"seeds", &seeds},           {"out", &out},     {"jobs", &jobs},
            };
            for (const auto& [key, value] : flags) {
                if (!value->empty()) {
                    markovopt::apply_setting(config, key, *value);
                }
            }
            for (const auto& assignment : overrides) {
                markovopt::apply_assignment(config, assignment);
            }
            if (const char* env = std::getenv("MARKOVOPT_SEED"); env != nullptr && *env != '\0') {
                markovopt::apply_setting(config, "seed", env);
            }
            if (config.out.empty()) {
                throw markovopt::ConfigError("an output path is required (--out)");
            }
            markovopt::run_experiment(config);
            return kExitOk;
        }
        if (*summarize) {
            markovopt::summarize_file(in_path, summary_out,
                                      by.empty() ? markovopt::kDefaultGroupKeys : split_keys(by));
            return kExitOk;
        }
        const auto results = markovopt::verify(suite);
        markovopt::print_report(std::cout, results);
        for (const auto& r : results) {
            if (!r.passed) {
                return kExitFailure;
            }
        }
        return kExitOk;
    } catch (const markovopt::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}
