#include "markovopt/optim.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "markovopt/errors.hpp"

namespace markovopt {

namespace {

constexpr std::array<std::pair<Method, std::string_view>, 5> kMethodNames{{
    {Method::MAG, "MAG"},
    {Method::AdaGrad, "AdaGrad"},
    {Method::SGD, "SGD"},
    {Method::SGD_MLMC, "SGD_MLMC"},
    {Method::SGD_DD, "SGD_DD"},
}};

bool is_adaptive(Method m) { return m == Method::MAG || m == Method::AdaGrad; }

void validate(Method method, const GradientOracle& oracle, const RunParams& params) {
    if (params.budget == 0) {
        throw InvalidParams("budget must be positive");
    }
    if (params.record_every == 0) {
        throw InvalidParams("record_every must be positive");
    }
    if (params.alpha && !(*params.alpha > 0.0)) {
        throw InvalidParams("alpha must be positive");
    }
    if (!(params.sgd_scale > 0.0)) {
        throw InvalidParams("SGD scale must be positive");
    }
    if (method == Method::SGD_DD && params.dd_gap == 0) {
        throw InvalidParams("SGD_DD needs an explicit gap (typically the mixing time)");
    }
    if (oracle.dim() == 0) {
        throw InvalidParams("oracle has zero dimension");
    }
}

}  // namespace

Domain Domain::l2_ball(double radius) {
    if (!(radius > 0.0) || !std::isfinite(radius)) {
        throw InvalidParams("ball radius must be positive and finite");
    }
    return Domain(radius);
}

double Domain::diameter() const noexcept {
    return bounded() ? 2.0 * radius_ : std::numeric_limits<double>::infinity();
}

Vector Domain::project(const Vector& w) const {
    if (!bounded()) {
        return w;
    }
    const double norm = w.norm();
    if (norm <= radius_) {
        return w;
    }
    return w * (radius_ / norm);
}

double AdaGradState::step_size() const {
    if (sum_sq <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return alpha / std::sqrt(sum_sq);
}

Vector adagrad_step(AdaGradState& state, const Vector& w, const Vector& g, const Domain& domain) {
    state.sum_sq += g.squaredNorm();
    if (state.sum_sq <= 0.0) {
        return w;
    }
    return domain.project(w - state.step_size() * g);
}

std::string_view method_name(Method method) {
    for (const auto& [m, name] : kMethodNames) {
        if (m == method) {
            return name;
        }
    }
    return "unknown";
}

Method parse_method(std::string_view name) {
    for (const auto& [m, n] : kMethodNames) {
        if (n == name) {
            return m;
        }
    }
    throw InvalidParams("unknown method '" + std::string(name) + "'");
}

RunTrace run_method(Method method, const GradientOracle& oracle, MarkovStream& stream, const RunParams& params,
                    Rng& rng) {
    validate(method, oracle, params);
    const auto d = static_cast<Eigen::Index>(oracle.dim());
    const Domain& domain = params.domain;

    AdaGradState adagrad;
    adagrad.alpha = params.alpha.value_or(domain.bounded() ? domain.diameter() / std::sqrt(2.0) : 1.0);
    const double sign = params.ascent ? -1.0 : 1.0;

    RunTrace trace;
    trace.method = std::string(method_name(method));
    for (const auto& metric : params.metrics) {
        trace.metric_names.push_back(metric.name);
    }

    Vector w = domain.project(Vector::Zero(d));
    Vector iterate_sum = Vector::Zero(d);
    std::uint64_t t = 0;
    std::uint64_t samples = 0;
    std::uint64_t progress = 0;
    std::uint64_t next_record = params.record_every;

    while (progress < params.budget) {
        ++t;
        GradientEstimate estimate;
        switch (method) {
            case Method::MAG:
            case Method::SGD_MLMC:
                estimate = mlmc_gradient(oracle, w, stream, params.levels, rng);
                break;
            case Method::AdaGrad:
            case Method::SGD:
                estimate = minibatch_gradient(oracle, w, stream, 1);
                break;
            case Method::SGD_DD:
                for (std::uint64_t skip = 1; skip < params.dd_gap; ++skip) {
                    stream.next();
                }
                estimate = minibatch_gradient(oracle, w, stream, 1);
                estimate.samples_consumed = params.dd_gap;
                break;
        }

        iterate_sum += w;
        if (params.keep_iterates) {
            trace.iterates.push_back(w);
        }

        const Vector direction = sign * estimate.gradient;
        if (is_adaptive(method)) {
            w = adagrad_step(adagrad, w, direction, domain);
        } else {
            const double eta = params.sgd_scale / std::sqrt(static_cast<double>(t));
            w = domain.project(w - eta * direction);
        }

        samples += estimate.samples_consumed;
        progress = params.unit == BudgetUnit::Samples ? samples : t;

        const bool first = params.record_first && t == 1;
        if (first || progress >= next_record) {
            TraceRecord record;
            record.checkpoint = progress / params.record_every;
            record.iteration = t;
            record.samples_cum = samples;
            record.level = estimate.level;
            const Vector average = iterate_sum / static_cast<double>(t);
            for (const auto& metric : params.metrics) {
                record.values.push_back(metric.evaluate(average));
            }
            trace.records.push_back(std::move(record));
            if (progress >= next_record) {
                next_record = (progress / params.record_every + 1) * params.record_every;
            }
        }
    }

    trace.iterations = t;
    trace.samples = samples;
    trace.average = iterate_sum / static_cast<double>(t);
    trace.last = w;
    return trace;
}

Vector average_iterate(const RunTrace& trace) {
    if (!trace.iterates.empty()) {
        Vector sum = Vector::Zero(trace.iterates.front().size());
        for (const auto& w : trace.iterates) {
            sum += w;
        }
        return sum / static_cast<double>(trace.iterates.size());
    }
    if (trace.iterations == 0 || trace.average.size() == 0) {
        throw EmptyTrace("trace has no iterates");
    }
    return trace.average;
}

Vector random_iterate(const RunTrace& trace, Rng& rng) {
    if (trace.iterates.empty()) {
        throw EmptyTrace("random iterate needs a trace run with keep_iterates");
    }
    std::uniform_int_distribution<std::size_t> pick(0, trace.iterates.size() - 1);
    return trace.iterates[pick(rng)];
}

}  // namespace markovopt
