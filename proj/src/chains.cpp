#include "markovopt/chains.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <queue>

#include "markovopt/errors.hpp"

namespace markovopt {

namespace {

constexpr double kStochasticTol = 1e-12;
constexpr double kEdgeThreshold = 1e-15;
constexpr double kThresholdSlack = 1e-9;
constexpr double kReversibilityTol = 1e-9;

std::vector<std::size_t> bfs_levels(const Matrix& p, bool reversed) {
    const auto n = static_cast<std::size_t>(p.rows());
    constexpr auto unseen = static_cast<std::size_t>(-1);
    std::vector<std::size_t> level(n, unseen);
    std::queue<std::size_t> frontier;
    level[0] = 0;
    frontier.push(0);
    while (!frontier.empty()) {
        const auto u = frontier.front();
        frontier.pop();
        for (std::size_t v = 0; v < n; ++v) {
            const double w = reversed ? p(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(u))
                                      : p(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v));
            if (w > kEdgeThreshold && level[v] == unseen) {
                level[v] = level[u] + 1;
                frontier.push(v);
            }
        }
    }
    return level;
}

void require_ergodic(const FiniteChain& chain) {
    if (!chain.ergodic()) {
        throw NonErgodic("chain is not irreducible and aperiodic");
    }
}

}  // namespace

Distribution::Distribution(Vector weights) : weights_(std::move(weights)) {
    if (weights_.size() == 0) {
        throw InvalidDistribution("empty distribution");
    }
    if ((weights_.array() < 0.0).any() || !weights_.allFinite()) {
        throw InvalidDistribution("negative or non-finite probability");
    }
    if (std::abs(weights_.sum() - 1.0) > kStochasticTol) {
        throw InvalidDistribution("probabilities do not sum to 1");
    }
}

FiniteChain::FiniteChain(Matrix transition) : transition_(std::move(transition)) {
    const auto n = transition_.rows();
    if (n == 0 || transition_.cols() != n) {
        throw InvalidChain("transition matrix must be square and non-empty");
    }
    if (!transition_.allFinite() || (transition_.array() < 0.0).any() ||
        (transition_.array() > 1.0).any()) {
        throw InvalidChain("transition entries must lie in [0, 1]");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(transition_.row(i).sum() - 1.0) > kStochasticTol) {
            throw InvalidChain("row " + std::to_string(i) + " does not sum to 1");
        }
    }

    const auto forward = bfs_levels(transition_, false);
    const auto backward = bfs_levels(transition_, true);
    constexpr auto unseen = static_cast<std::size_t>(-1);
    irreducible_ = std::find(forward.begin(), forward.end(), unseen) == forward.end() &&
                   std::find(backward.begin(), backward.end(), unseen) == backward.end();
    if (!irreducible_) {
        return;
    }
    // Every edge u->v closes a cycle through 0 of length level[u] + 1 - level[v]
    // modulo the period; the gcd of those offsets is the period.
    std::size_t g = 0;
    for (Eigen::Index u = 0; u < n; ++u) {
        for (Eigen::Index v = 0; v < n; ++v) {
            if (transition_(u, v) > kEdgeThreshold) {
                const auto a = static_cast<long long>(forward[static_cast<std::size_t>(u)]) + 1;
                const auto b = static_cast<long long>(forward[static_cast<std::size_t>(v)]);
                g = std::gcd(g, static_cast<std::size_t>(std::llabs(a - b)));
            }
        }
    }
    period_ = g;
}

FiniteChain read_chain(std::istream& in) {
    long long n = 0;
    if (!(in >> n) || n <= 0) {
        throw InvalidChain("expected a positive state count on the first line");
    }
    Matrix p(n, n);
    for (long long i = 0; i < n; ++i) {
        for (long long j = 0; j < n; ++j) {
            if (!(in >> p(i, j))) {
                throw InvalidChain("matrix file ended early at row " + std::to_string(i));
            }
        }
    }
    return FiniteChain(std::move(p));
}

FiniteChain load_chain(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidChain("cannot open chain file " + path);
    }
    return read_chain(in);
}

Distribution stationary_distribution(const FiniteChain& chain) {
    require_ergodic(chain);
    const auto n = static_cast<Eigen::Index>(chain.n_states());
    // mu (P - I) = 0 with one equation replaced by sum(mu) = 1.
    Matrix system = chain.transition().transpose() - Matrix::Identity(n, n);
    system.row(n - 1).setOnes();
    Vector rhs = Vector::Zero(n);
    rhs(n - 1) = 1.0;
    Vector mu = system.fullPivLu().solve(rhs);
    mu = mu.cwiseMax(0.0);
    mu /= mu.sum();
    return Distribution(std::move(mu));
}

double total_variation(const Distribution& p, const Distribution& q) {
    if (p.size() != q.size()) {
        throw DimensionMismatch("distributions have different lengths");
    }
    return 0.5 * (p.weights() - q.weights()).cwiseAbs().sum();
}

Matrix matrix_power(const Matrix& m, std::uint64_t t) {
    Matrix result = Matrix::Identity(m.rows(), m.cols());
    Matrix base = m;
    while (t > 0) {
        if (t & 1U) {
            result = result * base;
        }
        t >>= 1U;
        if (t > 0) {
            base = base * base;
        }
    }
    return result;
}

double d_mix(const FiniteChain& chain, const Distribution& mu, std::uint64_t t, std::uint64_t cap) {
    require_ergodic(chain);
    if (t > cap) {
        throw CapExceeded("d_mix requested beyond the time cap");
    }
    const Matrix pt = matrix_power(chain.transition(), t);
    double worst = 0.0;
    for (Eigen::Index z = 0; z < pt.rows(); ++z) {
        worst = std::max(worst, 0.5 * (pt.row(z).transpose() - mu.weights()).cwiseAbs().sum());
    }
    return worst;
}

double d_mix(const FiniteChain& chain, std::uint64_t t, std::uint64_t cap) {
    return d_mix(chain, stationary_distribution(chain), t, cap);
}

std::uint64_t mixing_time(const FiniteChain& chain, double eps, std::uint64_t cap) {
    if (!(eps > 0.0 && eps <= 1.0)) {
        throw InvalidParams("mixing_time needs 0 < eps <= 1");
    }
    const auto mu = stationary_distribution(chain);
    const auto mixed = [&](std::uint64_t t) { return d_mix(chain, mu, t, cap) <= eps + kThresholdSlack; };

    if (mixed(0)) {
        return 0;
    }
    std::uint64_t lo = 0;  // known unmixed
    std::uint64_t hi = 1;
    while (!mixed(hi)) {
        if (hi >= cap) {
            throw CapExceeded("chain does not mix within the time cap");
        }
        lo = hi;
        hi = std::min(2 * hi, cap);
    }
    while (hi - lo > 1) {
        const auto mid = lo + (hi - lo) / 2;
        if (mixed(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return hi;
}

Vector reversible_eigenvalues(const FiniteChain& chain, const Distribution& mu) {
    const auto n = static_cast<Eigen::Index>(chain.n_states());
    const Matrix& p = chain.transition();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if (std::abs(mu.weights()(i) * p(i, j) - mu.weights()(j) * p(j, i)) > kReversibilityTol) {
                throw NotReversible("detailed balance fails for states " + std::to_string(i) + ", " +
                                    std::to_string(j));
            }
        }
    }
    // D^{1/2} P D^{-1/2} is symmetric under detailed balance and shares P's spectrum.
    const Vector sqrt_mu = mu.weights().cwiseSqrt();
    Matrix sym = sqrt_mu.asDiagonal() * p * sqrt_mu.cwiseInverse().asDiagonal();
    sym = 0.5 * (sym + sym.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().reverse();
}

MixingBounds eigen_mixing_bounds(const FiniteChain& chain) {
    require_ergodic(chain);
    const auto mu = stationary_distribution(chain);
    const Vector lambda = reversible_eigenvalues(chain, mu);
    const auto n = lambda.size();
    const double second = n > 1 ? std::abs(lambda(1)) : 0.0;
    const double last = n > 1 ? std::abs(lambda(n - 1)) : 0.0;
    const double gap = 1.0 - std::max(second, last);
    const double mu_min = mu.weights().minCoeff();
    return {second / gap * std::log(2.0), std::log(4.0 / mu_min) / gap};
}

FiniteChain two_state_chain(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw InvalidProbability("two-state chain needs 0 < p < 1");
    }
    Matrix m(2, 2);
    m << 1.0 - p, p, p, 1.0 - p;
    return FiniteChain(std::move(m));
}

Vector winning_streak_stationary(std::size_t n) {
    if (n < 3) {
        throw InvalidSize("winning-streak reversal needs n >= 3");
    }
    Vector mu(static_cast<Eigen::Index>(n));
    for (std::size_t i = 1; i < n; ++i) {
        mu(static_cast<Eigen::Index>(i - 1)) = std::ldexp(1.0, -static_cast<int>(i));
    }
    mu(static_cast<Eigen::Index>(n - 1)) = std::ldexp(1.0, -static_cast<int>(n - 1));
    return mu;
}

FiniteChain winning_streak_reversal(std::size_t n) {
    const Vector mu = winning_streak_stationary(n);
    const auto size = static_cast<Eigen::Index>(n);
    Matrix p = Matrix::Zero(size, size);
    p.row(0) = mu.transpose();
    for (Eigen::Index i = 1; i + 1 < size; ++i) {
        p(i, i - 1) = 1.0;
    }
    p(size - 1, size - 1) = 0.5;
    p(size - 1, size - 2) = 0.5;
    return FiniteChain(std::move(p));
}

Ar1Process::Ar1Process(Matrix a, double noise_variance)
    : Ar1Process(a, noise_variance, Vector::Zero(a.rows())) {}

Ar1Process::Ar1Process(Matrix a, double noise_variance, Vector initial_state)
    : a_(std::move(a)), noise_variance_(noise_variance), state_(std::move(initial_state)) {
    if (a_.rows() == 0 || a_.rows() != a_.cols()) {
        throw InvalidParams("AR(1) matrix must be square and non-empty");
    }
    if (state_.size() != a_.rows()) {
        throw DimensionMismatch("AR(1) initial state has the wrong dimension");
    }
    if (noise_variance_ <= 0.0) {
        noise_variance_ = 1.0 / static_cast<double>(a_.rows());
    }
    spectral_radius_ = Eigen::EigenSolver<Matrix>(a_, false).eigenvalues().cwiseAbs().maxCoeff();
    if (spectral_radius_ >= 1.0 - 1e-9) {
        throw InvalidParams("AR(1) matrix must have spectral radius < 1");
    }
}

const Vector& Ar1Process::step(Rng& rng) {
    Vector noise(state_.size());
    const double scale = std::sqrt(noise_variance_);
    for (Eigen::Index i = 0; i < noise.size(); ++i) {
        noise(i) = scale * normal_(rng);
    }
    state_ = a_ * state_ + noise;
    return state_;
}

Matrix Ar1Process::stationary_covariance(double tol, std::size_t max_iter) const {
    // Doubling: S <- S + B S B^T, B <- B^2 sums A^k Q A^kT in log2 steps.
    const auto d = a_.rows();
    Matrix sigma = noise_variance_ * Matrix::Identity(d, d);
    Matrix b = a_;
    for (std::size_t k = 0; k < max_iter; ++k) {
        const Matrix increment = b * sigma * b.transpose();
        sigma += increment;
        b = b * b;
        if (increment.norm() <= tol * sigma.norm()) {
            break;
        }
    }
    return sigma;
}

ChainStream::ChainStream(FiniteChain chain, std::size_t start_state, std::uint64_t seed)
    : chain_(std::move(chain)), state_(start_state), rng_(seed) {
    if (start_state >= chain_.n_states()) {
        throw BadState("start state out of range");
    }
    cumulative_ = chain_.transition();
    for (Eigen::Index i = 0; i < cumulative_.rows(); ++i) {
        for (Eigen::Index j = 1; j < cumulative_.cols(); ++j) {
            cumulative_(i, j) += cumulative_(i, j - 1);
        }
    }
}

std::size_t ChainStream::sample_next(std::size_t from) {
    const double u = uniform01(rng_);
    const auto row = static_cast<Eigen::Index>(from);
    const auto n = cumulative_.cols();
    Eigen::Index last_positive = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (chain_.transition()(row, j) > 0.0) {
            last_positive = j;
            if (u < cumulative_(row, j)) {
                return static_cast<std::size_t>(j);
            }
        }
    }
    return static_cast<std::size_t>(last_positive);
}

Observation ChainStream::emit() {
    state_ = sample_next(state_);
    return state_;
}

ArStream::ArStream(Ar1Process process, std::uint64_t seed) : process_(std::move(process)), rng_(seed) {}

Observation ArStream::emit() {
    return ArSample{process_.step(rng_), 0.0};
}

ReplayStream::ReplayStream(std::vector<Observation> observations) : observations_(std::move(observations)) {
    if (observations_.empty()) {
        throw InvalidParams("replay stream needs at least one observation");
    }
}

Observation ReplayStream::emit() {
    const auto& obs = observations_[cursor_];
    cursor_ = (cursor_ + 1) % observations_.size();
    return obs;
}

}  // namespace markovopt
