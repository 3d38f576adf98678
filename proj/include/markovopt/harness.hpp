#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "markovopt/estimators.hpp"
#include "markovopt/optim.hpp"

namespace markovopt {

enum class Experiment { Fig1, Fig2, Nonconvex, Td, Custom };
enum class Scale { Desk, Full };

std::string_view experiment_name(Experiment e);
Experiment parse_experiment(std::string_view name);

/// Everything a run needs. Zero / empty fields are filled from the preset by resolve().
struct ExperimentConfig {
    Experiment experiment = Experiment::Fig1;
    Scale scale = Scale::Desk;
    std::vector<Method> methods;
    std::uint64_t seed = 0;
    std::size_t seeds = 5;
    std::uint64_t sample_budget = 0;
    std::uint64_t record_every = 0;
    std::size_t jobs = 1;
    std::string out;

    // Regression (fig1, fig2, custom).
    std::size_t rows = 0;
    std::size_t dim = 0;
    double p = 0.0;
    std::vector<double> p_values;
    std::string chain_file;

    // Non-convex AR(1).
    double rho = 0.0;
    std::size_t eval_burn_in = 0;
    std::size_t eval_samples = 0;

    // TD.
    std::size_t td_states = 0;
    std::size_t td_features = 0;
    double gamma = -1.0;
    bool td_tabular = false;

    // Estimator and optimizer knobs.
    int levels = 5;
    bool full_geometric = false;
    Compensation compensation = Compensation::ExactInverseProbability;
    std::optional<double> alpha;
    double sgd_scale = 1.0;
    std::uint64_t dd_gap = 0;
};

/// Applies one key=value setting; throws ConfigError on unknown keys or bad values.
void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value);
/// Applies a "key=value" token.
void apply_assignment(ExperimentConfig& config, std::string_view assignment);
/// Reads a flat key=value file ('#' starts a comment).
void apply_config_file(ExperimentConfig& config, const std::string& path);

/// Fills preset defaults and validates; throws ConfigError.
ExperimentConfig resolve(ExperimentConfig config);

/// Description of every configuration key, for --help.
std::string config_keys_help();

struct CsvRow {
    std::string experiment;
    std::string method;
    std::uint64_t seed = 0;
    std::uint64_t step = 0;
    std::uint64_t samples_cum = 0;
    int level = 0;
    std::string metric_name;
    double metric_value = 0.0;
};

inline constexpr std::string_view kCsvHeader =
    "experiment,method,seed,step,samples_cum,level,metric_name,metric_value";

/// Locale-independent, 17 significant digits.
std::string format_double(double value);

void write_csv(std::ostream& out, const std::vector<CsvRow>& rows);
std::vector<CsvRow> read_csv(std::istream& in);

std::uint64_t derive_run_seed(std::uint64_t base_seed, std::uint64_t seed_index, std::uint64_t method_ordinal);

/// Runs every (method, seed) pair of a resolved config; rows come back in a fixed order.
std::vector<CsvRow> run_experiment_rows(const ExperimentConfig& config);

/// Resolves, runs, and writes config.out atomically (no partial file on failure).
void run_experiment(const ExperimentConfig& config);

struct SummaryRow {
    std::vector<std::string> keys;
    std::size_t count = 0;
    double samples_cum_mean = 0.0;
    double mean = 0.0;
    double ci95_half_width = 0.0;
};

inline const std::vector<std::string> kDefaultGroupKeys{"experiment", "method", "metric_name", "step"};

/// Groups rows by the named columns (first-seen order) with mean and 1.96 s / sqrt(k) half-width.
std::vector<SummaryRow> summarize(const std::vector<CsvRow>& rows,
                                  const std::vector<std::string>& group_keys = kDefaultGroupKeys);
void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows,
                   const std::vector<std::string>& group_keys = kDefaultGroupKeys);
void summarize_file(const std::string& in_path, const std::string& out_path,
                    const std::vector<std::string>& group_keys = kDefaultGroupKeys);

struct CheckResult {
    std::string suite;
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Runs the named property suite ("chains", "estimators", "optim", "problems", "all").
std::vector<CheckResult> verify(std::string_view suite);
void print_report(std::ostream& out, const std::vector<CheckResult>& results);

}  // namespace markovopt
