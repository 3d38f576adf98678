#include "markovopt/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "markovopt/errors.hpp"
#include "markovopt/problems.hpp"

namespace markovopt {

namespace {

constexpr std::array<std::pair<Experiment, std::string_view>, 5> kExperimentNames{{
    {Experiment::Fig1, "fig1"},
    {Experiment::Fig2, "fig2"},
    {Experiment::Nonconvex, "nonconvex"},
    {Experiment::Td, "td"},
    {Experiment::Custom, "custom"},
}};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) {
            return parts;
        }
        start = pos + 1;
    }
}

double parse_double(std::string_view key, std::string_view text) {
    text = trim(text);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
        throw ConfigError("invalid number '" + std::string(text) + "' for key " + std::string(key));
    }
    return value;
}

/// Accepts plain integers and integral scientific notation such as 5e5.
std::uint64_t parse_count(std::string_view key, std::string_view text) {
    const double value = parse_double(key, text);
    if (value < 0.0 || value != std::floor(value) || value > 1.8e19) {
        throw ConfigError("key " + std::string(key) + " needs a non-negative integer");
    }
    return static_cast<std::uint64_t>(value);
}

bool parse_bool(std::string_view key, std::string_view text) {
    text = trim(text);
    if (text == "1" || text == "true" || text == "yes") {
        return true;
    }
    if (text == "0" || text == "false" || text == "no") {
        return false;
    }
    throw ConfigError("key " + std::string(key) + " needs true or false");
}

std::string format_parameter(double p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", p);
    return buf;
}

LevelDistribution make_levels(const ExperimentConfig& config) {
    if (config.full_geometric) {
        return LevelDistribution::full_geometric(config.sample_budget);
    }
    return LevelDistribution::truncated_geometric(config.levels, config.compensation);
}

struct Task {
    std::size_t method_index;
    std::size_t seed_index;
    std::size_t p_index;
};

struct RunStreams {
    std::uint64_t stream_seed;
    Rng estimator_rng;
};

RunStreams run_streams(const ExperimentConfig& config, const Task& task) {
    const auto ordinal = static_cast<std::uint64_t>(config.methods[task.method_index]);
    const auto run_seed = derive_run_seed(config.seed, task.seed_index, ordinal);
    return {splitmix64(run_seed), Rng(splitmix64(run_seed ^ 0x5BD1E9955BD1E995ULL))};
}

std::uint64_t instance_seed(const ExperimentConfig& config, std::size_t seed_index) {
    return splitmix64(config.seed ^ splitmix64(0xC0FFEEULL + seed_index));
}

std::size_t draw_state(const Distribution& mu, Rng& rng) {
    const double u = uniform01(rng);
    double cumulative = 0.0;
    for (std::size_t i = 0; i + 1 < mu.size(); ++i) {
        cumulative += mu[i];
        if (u < cumulative) {
            return i;
        }
    }
    return mu.size() - 1;
}

std::string method_label(Method method, std::uint64_t gap) {
    if (method == Method::SGD_DD) {
        return "SGD_DD(gap=" + std::to_string(gap) + ")";
    }
    return std::string(method_name(method));
}

RunParams base_params(const ExperimentConfig& config, Method method) {
    RunParams params;
    params.budget = config.sample_budget;
    params.record_every = config.record_every;
    params.alpha = config.alpha;
    params.sgd_scale = config.sgd_scale;
    params.levels = make_levels(config);
    params.dd_gap = method == Method::SGD_DD ? config.dd_gap : 0;
    return params;
}

void append_records(std::vector<CsvRow>& rows, std::string_view experiment, const std::string& label,
                    std::size_t seed_index, const RunTrace& trace, bool final_only) {
    std::size_t first = final_only && !trace.records.empty() ? trace.records.size() - 1 : 0;
    for (std::size_t r = first; r < trace.records.size(); ++r) {
        const auto& record = trace.records[r];
        for (std::size_t m = 0; m < trace.metric_names.size(); ++m) {
            rows.push_back({std::string(experiment), label, seed_index, record.checkpoint, record.samples_cum,
                            record.level, trace.metric_names[m], record.values[m]});
        }
    }
}

FiniteChain regression_chain(const ExperimentConfig& config, const Task& task) {
    switch (config.experiment) {
        case Experiment::Fig1:
            return two_state_chain(config.p);
        case Experiment::Fig2:
            return two_state_chain(config.p_values[task.p_index]);
        default:
            return load_chain(config.chain_file);
    }
}

std::vector<CsvRow> run_regression_task(const ExperimentConfig& config, const Task& task) {
    const Method method = config.methods[task.method_index];
    const FiniteChain chain = regression_chain(config, task);
    const Distribution mu = stationary_distribution(chain);

    Rng inst_rng(instance_seed(config, task.seed_index));
    RegressionSpec spec;
    spec.rows = config.rows;
    spec.dim = config.dim;
    spec.states = chain.n_states();
    const RegressionInstance inst = make_regression(spec, mu.weights(), inst_rng);
    const std::size_t start = draw_state(mu, inst_rng);

    RunParams params = base_params(config, method);
    params.domain = Domain::l2_ball(inst.radius());
    if (method == Method::SGD_DD && params.dd_gap == 0) {
        params.dd_gap = mixing_time(chain);
    }
    params.metrics.push_back({"suboptimality", [&inst](const Vector& w) { return inst.suboptimality(w); }});

    auto [stream_seed, rng] = run_streams(config, task);
    ChainStream stream(chain, start, stream_seed);
    RegressionOracle oracle(inst);
    const RunTrace trace = run_method(method, oracle, stream, params, rng);

    std::vector<CsvRow> rows;
    if (config.experiment == Experiment::Fig2) {
        const auto name = "fig2_p=" + format_parameter(config.p_values[task.p_index]);
        append_records(rows, name, method_label(method, params.dd_gap), task.seed_index, trace, true);
    } else {
        append_records(rows, experiment_name(config.experiment), method_label(method, params.dd_gap),
                       task.seed_index, trace, false);
    }
    return rows;
}

std::vector<CsvRow> run_nonconvex_task(const ExperimentConfig& config, const Task& task) {
    const Method method = config.methods[task.method_index];
    const auto seed = instance_seed(config, task.seed_index);
    Rng inst_rng(seed);
    const SigmoidArInstance inst = SigmoidArInstance::make(config.dim, config.rho, inst_rng);
    const SigmoidObjective objective(inst, config.eval_burn_in, config.eval_samples, splitmix64(seed + 1));

    RunParams params = base_params(config, method);
    params.metrics.push_back({"mc_objective", [&objective](const Vector& w) { return objective.objective(w); }});
    params.metrics.push_back(
        {"grad_norm_sq", [&objective](const Vector& w) { return objective.gradient_norm_sq(w); }});

    auto [stream_seed, rng] = run_streams(config, task);
    Rng start_rng(splitmix64(stream_seed));
    LabeledArStream stream(inst, stationary_start(inst, start_rng), stream_seed);
    SigmoidOracle oracle(inst.dim);
    const RunTrace trace = run_method(method, oracle, stream, params, rng);

    std::vector<CsvRow> rows;
    append_records(rows, "nonconvex", method_label(method, params.dd_gap), task.seed_index, trace, false);
    return rows;
}

std::vector<CsvRow> run_td_task(const ExperimentConfig& config, const Task& task) {
    Rng inst_rng(instance_seed(config, task.seed_index));
    MrpSpec spec;
    spec.states = config.td_states;
    spec.features = config.td_features;
    spec.gamma = config.gamma;
    spec.tabular = config.td_tabular;
    const Mrp mrp = make_random_mrp(spec, inst_rng);

    TdOptions options;
    options.iterations = config.sample_budget;
    options.record_every = config.record_every;
    options.levels = make_levels(config);
    options.start_state = draw_state(mrp.stationary(), inst_rng);

    auto [stream_seed, rng] = run_streams(config, task);
    static_cast<void>(stream_seed);
    const RunTrace trace = run_td_mag(mrp, options, rng);

    std::vector<CsvRow> rows;
    append_records(rows, "td", trace.method, task.seed_index, trace, false);
    return rows;
}

std::vector<CsvRow> run_task(const ExperimentConfig& config, const Task& task) {
    switch (config.experiment) {
        case Experiment::Nonconvex:
            return run_nonconvex_task(config, task);
        case Experiment::Td:
            return run_td_task(config, task);
        default:
            return run_regression_task(config, task);
    }
}

std::uint64_t field_count(std::string_view field, std::size_t line) {
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw MalformedCsv("line " + std::to_string(line) + ": bad integer '" + std::string(field) + "'");
    }
    return value;
}

std::string group_field(const CsvRow& row, const std::string& key) {
    if (key == "experiment") return row.experiment;
    if (key == "method") return row.method;
    if (key == "metric_name") return row.metric_name;
    if (key == "seed") return std::to_string(row.seed);
    if (key == "step") return std::to_string(row.step);
    if (key == "samples_cum") return std::to_string(row.samples_cum);
    if (key == "level") return std::to_string(row.level);
    throw InvalidParams("unknown group key '" + key + "'");
}

}  // namespace

std::string_view experiment_name(Experiment e) {
    for (const auto& [k, name] : kExperimentNames) {
        if (k == e) {
            return name;
        }
    }
    return "unknown";
}

Experiment parse_experiment(std::string_view name) {
    for (const auto& [k, n] : kExperimentNames) {
        if (n == name) {
            return k;
        }
    }
    throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

void apply_setting(ExperimentConfig& c, std::string_view key, std::string_view value) {
    key = trim(key);
    value = trim(value);
    if (key == "experiment") {
        c.experiment = parse_experiment(value);
    } else if (key == "scale") {
        if (value == "desk") {
            c.scale = Scale::Desk;
        } else if (value == "full") {
            c.scale = Scale::Full;
        } else {
            throw ConfigError("scale must be desk or full");
        }
    } else if (key == "methods") {
        c.methods.clear();
        for (auto part : split(value, ',')) {
            try {
                c.methods.push_back(parse_method(trim(part)));
            } catch (const InvalidParams& e) {
                throw ConfigError(e.what());
            }
        }
    } else if (key == "seed") {
        c.seed = parse_count(key, value);
    } else if (key == "seeds") {
        c.seeds = parse_count(key, value);
    } else if (key == "sample_budget") {
        c.sample_budget = parse_count(key, value);
    } else if (key == "record_every") {
        c.record_every = parse_count(key, value);
    } else if (key == "jobs") {
        c.jobs = parse_count(key, value);
    } else if (key == "out") {
        c.out = std::string(value);
    } else if (key == "rows") {
        c.rows = parse_count(key, value);
    } else if (key == "dim") {
        c.dim = parse_count(key, value);
    } else if (key == "p") {
        c.p = parse_double(key, value);
    } else if (key == "p_values") {
        c.p_values.clear();
        for (auto part : split(value, ',')) {
            c.p_values.push_back(parse_double(key, part));
        }
    } else if (key == "chain_file") {
        c.chain_file = std::string(value);
    } else if (key == "rho") {
        c.rho = parse_double(key, value);
    } else if (key == "eval_burn_in") {
        c.eval_burn_in = parse_count(key, value);
    } else if (key == "eval_samples") {
        c.eval_samples = parse_count(key, value);
    } else if (key == "td_states") {
        c.td_states = parse_count(key, value);
    } else if (key == "td_features") {
        c.td_features = parse_count(key, value);
    } else if (key == "gamma") {
        c.gamma = parse_double(key, value);
    } else if (key == "td_tabular") {
        c.td_tabular = parse_bool(key, value);
    } else if (key == "levels") {
        c.levels = static_cast<int>(parse_count(key, value));
    } else if (key == "level_kind") {
        if (value == "truncated") {
            c.full_geometric = false;
        } else if (value == "full") {
            c.full_geometric = true;
        } else {
            throw ConfigError("level_kind must be truncated or full");
        }
    } else if (key == "compensation") {
        if (value == "exact") {
            c.compensation = Compensation::ExactInverseProbability;
        } else if (value == "power_of_two") {
            c.compensation = Compensation::PowerOfTwo;
        } else {
            throw ConfigError("compensation must be exact or power_of_two");
        }
    } else if (key == "alpha") {
        c.alpha = parse_double(key, value);
    } else if (key == "sgd_scale") {
        c.sgd_scale = parse_double(key, value);
    } else if (key == "dd_gap") {
        c.dd_gap = parse_count(key, value);
    } else {
        throw ConfigError("unknown configuration key '" + std::string(key) + "'");
    }
}

void apply_assignment(ExperimentConfig& config, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
        throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
    }
    apply_setting(config, assignment.substr(0, eq), assignment.substr(eq + 1));
}

void apply_config_file(ExperimentConfig& config, const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path);
    }
    std::string line;
    while (std::getline(in, line)) {
        std::string_view view = line;
        if (const auto hash = view.find('#'); hash != std::string_view::npos) {
            view = view.substr(0, hash);
        }
        view = trim(view);
        if (!view.empty()) {
            apply_assignment(config, view);
        }
    }
}

std::string config_keys_help() {
    return R"(Configuration keys (config file lines or trailing key=value arguments):
  experiment     fig1 | fig2 | nonconvex | td | custom
  scale          desk | full
  methods        comma list of MAG, AdaGrad, SGD, SGD_MLMC, SGD_DD
  seed, seeds    base seed and number of seeds
  sample_budget  observations per run (iterations for td)
  record_every   checkpoint spacing in the budget's unit
  jobs           concurrent runs
  out            output CSV path
  rows, dim      regression rows per state and dimension
  p              two-state transition probability (fig1)
  p_values       comma list of transition probabilities (fig2)
  chain_file     transition matrix file (custom)
  rho            RandBiMod spectral scale (nonconvex)
  eval_burn_in, eval_samples   Monte Carlo objective trajectory (nonconvex)
  td_states, td_features, gamma, td_tabular   random MRP (td)
  levels         truncated geometric level count K
  level_kind     truncated | full
  compensation   exact | power_of_two
  alpha          AdaGrad scale for MAG/AdaGrad (default 1; td ignores it and uses sqrt(2) R)
  sgd_scale      c in eta_t = c / sqrt(t)
  dd_gap         SGD_DD gap (default: exact mixing time of the chain)
)";
}

ExperimentConfig resolve(ExperimentConfig c) {
    const bool full = c.scale == Scale::Full;
    const auto set = [](auto& field, auto value) {
        if (field == std::remove_cvref_t<decltype(field)>{}) {
            field = value;
        }
    };
    switch (c.experiment) {
        case Experiment::Fig1:
        case Experiment::Fig2:
        case Experiment::Custom:
            set(c.rows, std::size_t{full ? 250U : 50U});
            set(c.dim, std::size_t{full ? 100U : 20U});
            set(c.sample_budget, std::uint64_t{full ? 5'000'000U : 500'000U});
            if (c.methods.empty()) {
                c.methods = c.experiment == Experiment::Fig2
                                ? std::vector<Method>{Method::MAG, Method::AdaGrad, Method::SGD}
                                : std::vector<Method>{Method::MAG, Method::AdaGrad, Method::SGD, Method::SGD_MLMC};
            }
            if (c.experiment == Experiment::Fig1) {
                set(c.p, full ? 1e-4 : 1e-3);
            }
            if (c.experiment == Experiment::Fig2) {
                if (c.p_values.empty()) {
                    c.p_values = full ? std::vector<double>{1e-1, 1e-2, 1e-3, 1e-4}
                                      : std::vector<double>{1e-1, 1e-2, 1e-3};
                }
                set(c.record_every, c.sample_budget);
            }
            if (c.experiment == Experiment::Custom && c.chain_file.empty()) {
                throw ConfigError("custom experiment needs chain_file");
            }
            set(c.record_every, c.sample_budget / 50);
            // Untuned eta_t = (sum |g|^2)^{-1/2}, the same scale as the SGD baselines.
            if (!c.alpha) {
                c.alpha = 1.0;
            }
            break;
        case Experiment::Nonconvex:
            set(c.dim, std::size_t{full ? 50U : 10U});
            set(c.rho, full ? 0.999 : 0.99);
            set(c.sample_budget, std::uint64_t{full ? 1'000'000U : 100'000U});
            set(c.record_every, c.sample_budget / 20);
            set(c.eval_burn_in, std::size_t{100'000});
            set(c.eval_samples, std::size_t{100'000});
            if (c.methods.empty()) {
                c.methods = {Method::MAG, Method::AdaGrad, Method::SGD, Method::SGD_MLMC};
            }
            break;
        case Experiment::Td:
            set(c.td_states, std::size_t{full ? 20U : 5U});
            set(c.td_features, std::size_t{full ? 8U : 3U});
            if (c.gamma < 0.0) {
                c.gamma = 0.9;
            }
            set(c.sample_budget, std::uint64_t{full ? 100'000U : 10'000U});
            set(c.record_every, c.sample_budget / 10);
            if (c.methods.empty()) {
                c.methods = {Method::MAG};
            }
            if (c.methods.size() != 1 || c.methods.front() != Method::MAG) {
                throw ConfigError("td experiment runs MAG only");
            }
            break;
    }

    if (c.seeds < 1) {
        throw ConfigError("seeds must be >= 1");
    }
    if (c.methods.empty()) {
        throw ConfigError("methods must be non-empty");
    }
    if (c.record_every == 0 || c.sample_budget < c.record_every) {
        throw ConfigError("need 0 < record_every <= sample_budget");
    }
    if (c.jobs < 1) {
        throw ConfigError("jobs must be >= 1");
    }
    if (c.levels < 1 || c.levels > 62) {
        throw ConfigError("levels must lie in [1, 62]");
    }
    if (c.experiment == Experiment::Nonconvex && c.dd_gap == 0 &&
        std::find(c.methods.begin(), c.methods.end(), Method::SGD_DD) != c.methods.end()) {
        throw ConfigError("SGD_DD on the AR(1) process needs an explicit dd_gap (no finite mixing time)");
    }
    return c;
}

std::string format_double(double value) {
    char buf[40];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
    return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

void write_csv(std::ostream& out, const std::vector<CsvRow>& rows) {
    out << kCsvHeader << '\n';
    for (const auto& r : rows) {
        out << r.experiment << ',' << r.method << ',' << r.seed << ',' << r.step << ',' << r.samples_cum << ','
            << r.level << ',' << r.metric_name << ',' << format_double(r.metric_value) << '\n';
    }
}

std::vector<CsvRow> read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || trim(line) != kCsvHeader) {
        throw MalformedCsv("missing or unexpected header");
    }
    std::vector<CsvRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split(trim(line), ',');
        if (fields.size() != 8) {
            throw MalformedCsv("line " + std::to_string(line_no) + ": expected 8 fields");
        }
        CsvRow row;
        row.experiment = std::string(fields[0]);
        row.method = std::string(fields[1]);
        row.seed = field_count(fields[2], line_no);
        row.step = field_count(fields[3], line_no);
        row.samples_cum = field_count(fields[4], line_no);
        row.level = static_cast<int>(field_count(fields[5], line_no));
        row.metric_name = std::string(fields[6]);
        const auto [ptr, ec] =
            std::from_chars(fields[7].data(), fields[7].data() + fields[7].size(), row.metric_value);
        if (ec != std::errc() || ptr != fields[7].data() + fields[7].size()) {
            throw MalformedCsv("line " + std::to_string(line_no) + ": bad metric value");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::uint64_t derive_run_seed(std::uint64_t base_seed, std::uint64_t seed_index, std::uint64_t method_ordinal) {
    return base_seed ^ (1000003ULL * seed_index + 7919ULL * method_ordinal);
}

std::vector<CsvRow> run_experiment_rows(const ExperimentConfig& config) {
    std::vector<Task> tasks;
    const std::size_t p_count = config.experiment == Experiment::Fig2 ? config.p_values.size() : 1;
    for (std::size_t pi = 0; pi < p_count; ++pi) {
        for (std::size_t m = 0; m < config.methods.size(); ++m) {
            for (std::size_t s = 0; s < config.seeds; ++s) {
                tasks.push_back({m, s, pi});
            }
        }
    }

    std::vector<std::vector<CsvRow>> results(tasks.size());
    std::vector<std::exception_ptr> errors(tasks.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            try {
                results[i] = run_task(config, tasks[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::min(config.jobs, tasks.size());
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }

    std::vector<CsvRow> rows;
    for (auto& r : results) {
        rows.insert(rows.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
    }
    return rows;
}

void run_experiment(const ExperimentConfig& raw) {
    const ExperimentConfig config = resolve(raw);
    if (config.out.empty()) {
        throw ConfigError("run needs an output path");
    }
    const std::filesystem::path out(config.out);
    const std::filesystem::path partial = out.string() + ".partial";
    try {
        const auto rows = run_experiment_rows(config);
        {
            std::ofstream file(partial, std::ios::binary | std::ios::trunc);
            if (!file) {
                throw ConfigError("cannot write " + partial.string());
            }
            write_csv(file, rows);
            if (!file.flush()) {
                throw Error("failed writing " + partial.string());
            }
        }
        std::filesystem::rename(partial, out);
    } catch (...) {
        std::error_code ignored;
        std::filesystem::remove(partial, ignored);
        throw;
    }
}

std::vector<SummaryRow> summarize(const std::vector<CsvRow>& rows, const std::vector<std::string>& group_keys) {
    struct Accumulator {
        std::vector<std::string> keys;
        std::vector<double> values;
        double samples_sum = 0.0;
    };
    std::map<std::vector<std::string>, std::size_t> index;
    std::vector<Accumulator> groups;
    for (const auto& row : rows) {
        std::vector<std::string> keys;
        for (const auto& k : group_keys) {
            keys.push_back(group_field(row, k));
        }
        auto [it, inserted] = index.try_emplace(keys, groups.size());
        if (inserted) {
            groups.push_back({keys, {}, 0.0});
        }
        auto& g = groups[it->second];
        g.values.push_back(row.metric_value);
        g.samples_sum += static_cast<double>(row.samples_cum);
    }

    std::vector<SummaryRow> summary;
    std::size_t degenerate = 0;
    for (auto& g : groups) {
        SummaryRow s;
        s.keys = g.keys;
        s.count = g.values.size();
        const auto k = static_cast<double>(s.count);
        for (double v : g.values) {
            s.mean += v;
        }
        s.mean /= k;
        s.samples_cum_mean = g.samples_sum / k;
        if (s.count > 1) {
            double ss = 0.0;
            for (double v : g.values) {
                ss += (v - s.mean) * (v - s.mean);
            }
            s.ci95_half_width = 1.96 * std::sqrt(ss / (k - 1.0)) / std::sqrt(k);
        } else {
            ++degenerate;
        }
        summary.push_back(std::move(s));
    }
    if (degenerate > 0) {
        std::clog << "warning: " << degenerate << " group(s) have a single seed; CI half-width reported as 0\n";
    }
    return summary;
}

void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows, const std::vector<std::string>& group_keys) {
    for (const auto& k : group_keys) {
        out << k << ',';
    }
    out << "count,samples_cum_mean,mean,ci95_half_width\n";
    for (const auto& r : rows) {
        for (const auto& k : r.keys) {
            out << k << ',';
        }
        out << r.count << ',' << format_double(r.samples_cum_mean) << ',' << format_double(r.mean) << ','
            << format_double(r.ci95_half_width) << '\n';
    }
}

void summarize_file(const std::string& in_path, const std::string& out_path,
                    const std::vector<std::string>& group_keys) {
    std::ifstream in(in_path, std::ios::binary);
    if (!in) {
        throw MalformedCsv("cannot open " + in_path);
    }
    const auto summary = summarize(read_csv(in), group_keys);
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ConfigError("cannot write " + out_path);
    }
    write_summary(out, summary, group_keys);
}

}  // namespace markovopt
