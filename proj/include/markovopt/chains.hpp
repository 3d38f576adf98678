#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace markovopt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Uniform draw in [0, 1) built from the top 53 bits of one generator call.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Probability vector over a finite state space.
class Distribution {
public:
    explicit Distribution(Vector weights);

    const Vector& weights() const noexcept { return weights_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(weights_.size()); }
    double operator[](std::size_t i) const { return weights_(static_cast<Eigen::Index>(i)); }

private:
    Vector weights_;
};

/// Time-homogeneous chain on {0, ..., n-1} given by a row-stochastic matrix.
///
/// Ergodicity (irreducible and aperiodic) is decided once at construction
/// from the support graph; entries above 1e-15 count as edges.
class FiniteChain {
public:
    explicit FiniteChain(Matrix transition);

    std::size_t n_states() const noexcept { return static_cast<std::size_t>(transition_.rows()); }
    const Matrix& transition() const noexcept { return transition_; }
    double operator()(std::size_t from, std::size_t to) const {
        return transition_(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(to));
    }

    bool irreducible() const noexcept { return irreducible_; }
    /// gcd of return times to state 0; 1 means aperiodic. Only meaningful when irreducible.
    std::size_t period() const noexcept { return period_; }
    bool ergodic() const noexcept { return irreducible_ && period_ == 1; }

private:
    Matrix transition_;
    bool irreducible_ = false;
    std::size_t period_ = 0;
};

/// Reads "n" followed by n rows of n whitespace-separated probabilities.
FiniteChain read_chain(std::istream& in);
FiniteChain load_chain(const std::string& path);

inline constexpr std::uint64_t kDefaultTimeCap = 1'000'000;

Distribution stationary_distribution(const FiniteChain& chain);

/// Half the L1 distance; equals the sup over events on a finite space.
double total_variation(const Distribution& p, const Distribution& q);

/// P^t by repeated squaring.
Matrix matrix_power(const Matrix& m, std::uint64_t t);

/// max_z TV(P^t(z, .), mu).
double d_mix(const FiniteChain& chain, std::uint64_t t, std::uint64_t cap = kDefaultTimeCap);

/// Same as d_mix but reuses a precomputed stationary distribution.
double d_mix(const FiniteChain& chain, const Distribution& mu, std::uint64_t t,
             std::uint64_t cap = kDefaultTimeCap);

/// Smallest t with d_mix(t) <= eps. Doubling then bisection; eps in (0, 1].
std::uint64_t mixing_time(const FiniteChain& chain, double eps = 0.25,
                          std::uint64_t cap = kDefaultTimeCap);

struct MixingBounds {
    double lower;
    double upper;
};

/// Spectral-gap bounds on the 1/4 mixing time of a reversible ergodic chain.
MixingBounds eigen_mixing_bounds(const FiniteChain& chain);

/// Eigenvalues of a reversible chain, sorted descending.
Vector reversible_eigenvalues(const FiniteChain& chain, const Distribution& mu);

/// Symmetric two-state chain [[1-p, p], [p, 1-p]], 0 < p < 1.
FiniteChain two_state_chain(double p);

/// Stationary law of the winning-streak reversal: 2^{-i} for i < n, 2^{-(n-1)} for i = n (1-based).
Vector winning_streak_stationary(std::size_t n);

/// Time reversal of the winning-streak chain on n >= 3 states. Mixes exactly at n-1.
FiniteChain winning_streak_reversal(std::size_t n);

/// Vector autoregression x_t = A x_{t-1} + n_t with n_t ~ N(0, noise_variance * I).
class Ar1Process {
public:
    /// noise_variance <= 0 selects the default 1/d.
    explicit Ar1Process(Matrix a, double noise_variance = 0.0);
    Ar1Process(Matrix a, double noise_variance, Vector initial_state);

    std::size_t dim() const noexcept { return static_cast<std::size_t>(a_.rows()); }
    const Matrix& a() const noexcept { return a_; }
    double noise_variance() const noexcept { return noise_variance_; }
    double spectral_radius() const noexcept { return spectral_radius_; }
    const Vector& state() const noexcept { return state_; }

    const Vector& step(Rng& rng);

    /// Solves Sigma = A Sigma A^T + noise_variance * I by fixed-point iteration.
    Matrix stationary_covariance(double tol = 1e-14, std::size_t max_iter = 10'000'000) const;

private:
    Matrix a_;
    double noise_variance_;
    double spectral_radius_;
    Vector state_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// One (s, r, s') step of a Markov reward process.
struct Transition {
    std::size_t state;
    double reward;
    std::size_t next_state;
};

/// Continuous observation: a feature vector plus an optional binary label.
struct ArSample {
    Vector x;
    double label = 0.0;
};

using Observation = std::variant<std::size_t, Transition, ArSample>;

/// Stateful source of correlated observations.
///
/// The stream is never rewound: every consumer (estimators, optimizers)
/// reads from the same running trajectory.
class MarkovStream {
public:
    virtual ~MarkovStream() = default;

    Observation next() {
        ++emitted_;
        return emit();
    }
    std::uint64_t samples_emitted() const noexcept { return emitted_; }

protected:
    virtual Observation emit() = 0;

private:
    std::uint64_t emitted_ = 0;
};

/// Emits the state index after each transition of a finite chain.
class ChainStream final : public MarkovStream {
public:
    ChainStream(FiniteChain chain, std::size_t start_state, std::uint64_t seed);

    std::size_t current_state() const noexcept { return state_; }
    const FiniteChain& chain() const noexcept { return chain_; }

    /// Samples one transition from `from` using the stream's generator.
    std::size_t sample_next(std::size_t from);

protected:
    Observation emit() override;

private:
    FiniteChain chain_;
    Matrix cumulative_;
    std::size_t state_;
    Rng rng_;
};

/// Emits the AR(1) state after each step, unlabeled.
class ArStream final : public MarkovStream {
public:
    ArStream(Ar1Process process, std::uint64_t seed);

    const Ar1Process& process() const noexcept { return process_; }

protected:
    Observation emit() override;

private:
    Ar1Process process_;
    Rng rng_;
};

/// Cycles through a fixed observation list; used to pin down estimator inputs.
class ReplayStream final : public MarkovStream {
public:
    explicit ReplayStream(std::vector<Observation> observations);

protected:
    Observation emit() override;

private:
    std::vector<Observation> observations_;
    std::size_t cursor_ = 0;
};

}  // namespace markovopt
