#include "markovopt/estimators.hpp"

#include <bit>
#include <cmath>

#include "markovopt/errors.hpp"

namespace markovopt {

namespace {

constexpr int kMaxGeometricLevel = 62;

}  // namespace

int floor_log2(std::uint64_t t) {
    if (t == 0) {
        throw InvalidParams("floor_log2 of zero");
    }
    return static_cast<int>(std::bit_width(t)) - 1;
}

LevelDistribution::LevelDistribution(Kind kind, int j_max, std::uint64_t horizon, Compensation compensation)
    : kind_(kind),
      j_max_(j_max),
      horizon_(horizon),
      compensation_(compensation),
      normalizer_(kind == Kind::TruncatedGeometric ? 1.0 - std::ldexp(1.0, -j_max) : 1.0) {}

LevelDistribution LevelDistribution::full_geometric(std::uint64_t horizon) {
    if (horizon == 0) {
        throw InvalidParams("geometric level distribution needs horizon >= 1");
    }
    return {Kind::FullGeometric, floor_log2(horizon), horizon, Compensation::PowerOfTwo};
}

LevelDistribution LevelDistribution::truncated_geometric(int levels, Compensation compensation) {
    if (levels < 1 || levels > kMaxGeometricLevel) {
        throw InvalidParams("truncated geometric needs 1 <= K <= 62 levels");
    }
    return {Kind::TruncatedGeometric, levels, std::uint64_t{1} << levels, compensation};
}

double LevelDistribution::probability(int level) const {
    if (level < 1) {
        return 0.0;
    }
    if (kind_ == Kind::TruncatedGeometric && level > j_max_) {
        return 0.0;
    }
    return std::ldexp(1.0, -level) / normalizer_;
}

double LevelDistribution::compensation_factor(int level) const {
    if (compensation_ == Compensation::PowerOfTwo) {
        return std::ldexp(1.0, level);
    }
    return 1.0 / probability(level);
}

int LevelDistribution::draw(Rng& rng) const {
    if (kind_ == Kind::FullGeometric) {
        // Fair-coin trials until the first success.
        int j = 1;
        while ((rng() >> 63) == 0 && j < kMaxGeometricLevel) {
            ++j;
        }
        return j;
    }
    const double u = uniform01(rng);
    double cumulative = 0.0;
    for (int j = 1; j < j_max_; ++j) {
        cumulative += probability(j);
        if (u < cumulative) {
            return j;
        }
    }
    return j_max_;
}

GradientEstimate minibatch_gradient(const GradientOracle& oracle, const Vector& w, MarkovStream& stream,
                                    std::uint64_t n) {
    if (n == 0) {
        throw InvalidParams("minibatch size must be positive");
    }
    Vector sum = Vector::Zero(static_cast<Eigen::Index>(oracle.dim()));
    for (std::uint64_t i = 0; i < n; ++i) {
        sum += oracle.gradient(w, stream.next());
    }
    return {sum / static_cast<double>(n), n, 0};
}

std::vector<Vector> level_decomposition(const GradientOracle& oracle, const Vector& w,
                                        std::span<const Observation> samples) {
    if (samples.empty() || !std::has_single_bit(samples.size())) {
        throw NotPowerOfTwo("level decomposition needs a power-of-two sample count");
    }
    std::vector<Vector> levels;
    Vector sum = Vector::Zero(static_cast<Eigen::Index>(oracle.dim()));
    std::size_t next_checkpoint = 1;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        sum += oracle.gradient(w, samples[i]);
        if (i + 1 == next_checkpoint) {
            levels.push_back(sum / static_cast<double>(next_checkpoint));
            next_checkpoint *= 2;
        }
    }
    return levels;
}

GradientEstimate mlmc_gradient_at_level(const GradientOracle& oracle, const Vector& w, MarkovStream& stream,
                                        const LevelDistribution& dist, int level) {
    if (level < 1) {
        throw InvalidParams("multilevel index must be >= 1");
    }
    if (level > dist.j_max()) {
        return {oracle.gradient(w, stream.next()), 1, level};
    }
    const std::uint64_t fine = std::uint64_t{1} << level;
    const std::uint64_t coarse = fine / 2;
    Vector sum = oracle.gradient(w, stream.next());
    const Vector anchor = sum;
    Vector coarse_mean = anchor;
    for (std::uint64_t i = 2; i <= fine; ++i) {
        sum += oracle.gradient(w, stream.next());
        if (i == coarse) {
            coarse_mean = sum / static_cast<double>(coarse);
        }
    }
    const Vector fine_mean = sum / static_cast<double>(fine);
    return {anchor + dist.compensation_factor(level) * (fine_mean - coarse_mean), fine, level};
}

GradientEstimate mlmc_gradient(const GradientOracle& oracle, const Vector& w, MarkovStream& stream,
                               const LevelDistribution& dist, Rng& rng) {
    return mlmc_gradient_at_level(oracle, w, stream, dist, dist.draw(rng));
}

double expected_sample_count(const LevelDistribution& dist) {
    if (dist.kind() == LevelDistribution::Kind::FullGeometric) {
        // One sample always, plus 2^j - 1 more when level j <= j_max is drawn.
        double count = 1.0;
        for (int j = 1; j <= dist.j_max(); ++j) {
            count += dist.probability(j) * (std::ldexp(1.0, j) - 1.0);
        }
        return count;
    }
    double count = 0.0;
    for (int j = 1; j <= dist.j_max(); ++j) {
        count += dist.probability(j) * std::ldexp(1.0, j);
    }
    return count;
}

}  // namespace markovopt
