#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "markovopt/chains.hpp"
#include "markovopt/estimators.hpp"

namespace markovopt {

/// Feasible set: all of R^d or a centered Euclidean ball.
class Domain {
public:
    static Domain unconstrained() { return Domain(0.0); }
    static Domain l2_ball(double radius);

    bool bounded() const noexcept { return radius_ > 0.0; }
    double radius() const noexcept { return radius_; }
    /// 2R for a ball, +inf when unconstrained.
    double diameter() const noexcept;

    Vector project(const Vector& w) const;

private:
    explicit Domain(double radius) : radius_(radius) {}
    double radius_;
};

inline Vector project(const Domain& domain, const Vector& w) { return domain.project(w); }

/// Scalar AdaGrad ("AdaGrad-Norm") accumulator: eta_t = alpha / sqrt(sum_k |g_k|^2).
struct AdaGradState {
    double alpha = 1.0;
    double sum_sq = 0.0;

    /// Step size implied by the current accumulator; +inf before any non-zero gradient.
    double step_size() const;
};

/// Accumulates |g|^2 and returns project(w - eta g). A zero accumulator leaves w unchanged.
Vector adagrad_step(AdaGradState& state, const Vector& w, const Vector& g, const Domain& domain);

enum class Method { MAG, AdaGrad, SGD, SGD_MLMC, SGD_DD };

std::string_view method_name(Method method);
Method parse_method(std::string_view name);

struct Metric {
    std::string name;
    std::function<double(const Vector&)> evaluate;
};

enum class BudgetUnit { Samples, Iterations };

struct RunParams {
    BudgetUnit unit = BudgetUnit::Samples;
    std::uint64_t budget = 0;
    /// Checkpoint spacing, in the same unit as the budget.
    std::uint64_t record_every = 0;
    /// Also record a checkpoint (index 0) after the first iteration.
    bool record_first = false;

    Domain domain = Domain::unconstrained();
    /// Defaults to D / sqrt(2) on a bounded domain and 1 otherwise.
    std::optional<double> alpha;
    /// SGD family uses eta_t = sgd_scale / sqrt(t).
    double sgd_scale = 1.0;
    /// SGD_DD reads this many observations per update and keeps the last.
    std::uint64_t dd_gap = 0;
    LevelDistribution levels = LevelDistribution::truncated_geometric(5);
    /// Move along +g instead of -g (semi-gradient TD updates).
    bool ascent = false;

    std::vector<Metric> metrics;
    bool keep_iterates = false;
};

struct TraceRecord {
    std::uint64_t checkpoint = 0;
    std::uint64_t iteration = 0;
    std::uint64_t samples_cum = 0;
    int level = 0;
    std::vector<double> values;
};

struct RunTrace {
    std::string method;
    std::vector<std::string> metric_names;
    std::vector<TraceRecord> records;
    std::uint64_t iterations = 0;
    std::uint64_t samples = 0;
    /// Mean of the iterates w_1..w_T at which gradients were evaluated.
    Vector average;
    /// w_{T+1}.
    Vector last;
    /// w_1..w_T, kept only when requested.
    std::vector<Vector> iterates;
};

/// Runs one optimizer over the stream until the budget is spent.
RunTrace run_method(Method method, const GradientOracle& oracle, MarkovStream& stream, const RunParams& params,
                    Rng& rng);

Vector average_iterate(const RunTrace& trace);
/// Uniform draw from the stored iterates w_1..w_T.
Vector random_iterate(const RunTrace& trace, Rng& rng);

}  // namespace markovopt
