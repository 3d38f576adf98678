#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "markovopt/chains.hpp"

namespace markovopt {

/// Per-observation gradient field w -> grad f(w; z).
class GradientOracle {
public:
    virtual ~GradientOracle() = default;

    virtual std::size_t dim() const = 0;
    virtual Vector gradient(const Vector& w, const Observation& z) const = 0;
};

struct GradientEstimate {
    Vector gradient;
    std::uint64_t samples_consumed = 0;
    /// Level J drawn by the multilevel estimator; 0 for single-level estimators.
    int level = 0;
};

enum class Compensation {
    /// c_j = 1 / P(J = j).
    ExactInverseProbability,
    /// c_j = 2^j regardless of truncation.
    PowerOfTwo,
};

/// Law of the multilevel index J.
///
/// Full geometric: P(J = j) = 2^{-j} on j >= 1, with levels beyond
/// floor(log2 horizon) falling back to the single-sample estimate.
/// Truncated geometric: P(J = j) proportional to 2^{-j} on 1..K.
class LevelDistribution {
public:
    enum class Kind { FullGeometric, TruncatedGeometric };

    static LevelDistribution full_geometric(std::uint64_t horizon);
    static LevelDistribution truncated_geometric(int levels,
                                                 Compensation compensation = Compensation::ExactInverseProbability);

    Kind kind() const noexcept { return kind_; }
    Compensation compensation() const noexcept { return compensation_; }
    /// Largest level whose correction term is used.
    int j_max() const noexcept { return j_max_; }
    std::uint64_t horizon() const noexcept { return horizon_; }

    double probability(int level) const;
    /// Multiplier applied to g^j - g^{j-1} when J = j.
    double compensation_factor(int level) const;

    int draw(Rng& rng) const;

private:
    LevelDistribution(Kind kind, int j_max, std::uint64_t horizon, Compensation compensation);

    Kind kind_;
    int j_max_;
    std::uint64_t horizon_;
    Compensation compensation_;
    double normalizer_;
};

/// floor(log2 t) for t >= 1.
int floor_log2(std::uint64_t t);

/// Average of grad f(w; z) over the next n stream emissions.
GradientEstimate minibatch_gradient(const GradientOracle& oracle, const Vector& w, MarkovStream& stream,
                                    std::uint64_t n);

/// Prefix averages g^j over the first 2^j samples, j = 0..log2(len).
std::vector<Vector> level_decomposition(const GradientOracle& oracle, const Vector& w,
                                        std::span<const Observation> samples);

/// Multilevel estimate for a given level J; levels above j_max take the
/// single-sample branch and consume one observation.
GradientEstimate mlmc_gradient_at_level(const GradientOracle& oracle, const Vector& w, MarkovStream& stream,
                                        const LevelDistribution& dist, int level);

/// Draws J from `dist` with `rng` and evaluates the multilevel estimate.
GradientEstimate mlmc_gradient(const GradientOracle& oracle, const Vector& w, MarkovStream& stream,
                               const LevelDistribution& dist, Rng& rng);

/// E[N_t]: mean number of observations one multilevel estimate consumes.
double expected_sample_count(const LevelDistribution& dist);

}  // namespace markovopt
