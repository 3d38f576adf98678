#pragma once

#include <cstdint>
#include <vector>

#include "markovopt/chains.hpp"
#include "markovopt/estimators.hpp"
#include "markovopt/optim.hpp"

namespace markovopt {

struct LossGradient {
    double loss;
    Vector gradient;
};

// ---------------------------------------------------------------------------
// Markovian linear regression: one least-squares block per chain state.
// ---------------------------------------------------------------------------

/// Least squares with per-state data blocks (X_i, y_i).
///
/// f(w; i) = (1/2n) |X_i w - y_i|^2 and F(w) = sum_i mu_i f(w; i), minimized
/// over the ball |w| <= radius. With two states and uniform weights F is
/// (1/4n) times the squared norm of the stacked residual.
class RegressionInstance {
public:
    /// radius <= 0 selects 1.1 |w_ls| (the unconstrained minimizer stays feasible).
    RegressionInstance(std::vector<Matrix> designs, std::vector<Vector> targets, Vector weights,
                       double radius = 0.0);

    std::size_t n_states() const noexcept { return designs_.size(); }
    std::size_t rows() const noexcept { return static_cast<std::size_t>(designs_.front().rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(designs_.front().cols()); }
    double radius() const noexcept { return radius_; }
    const Vector& weights() const noexcept { return weights_; }
    const Matrix& design(std::size_t state) const { return designs_.at(state); }
    const Vector& targets(std::size_t state) const { return targets_.at(state); }

    LossGradient loss_gradient(const Vector& w, std::size_t state) const;
    /// (1/n) X_i^T (X_i w - y_i) through the cached normal-equation blocks.
    Vector gradient(const Vector& w, std::size_t state) const;

    double objective(const Vector& w) const;
    Vector objective_gradient(const Vector& w) const;
    /// F(w) = 0.5 w^T H w - b^T w + c.
    const Matrix& hessian() const noexcept { return hessian_; }
    const Vector& linear_term() const noexcept { return linear_; }

    const Vector& optimum() const noexcept { return w_star_; }
    double optimal_value() const noexcept { return f_star_; }
    /// F(w) - F*, evaluated through the exact quadratic expansion around w*.
    double suboptimality(const Vector& w) const;

private:
    std::vector<Matrix> designs_;
    std::vector<Vector> targets_;
    Vector weights_;
    std::vector<Matrix> gram_;    // X_i^T X_i / n
    std::vector<Vector> moment_;  // X_i^T y_i / n
    Matrix hessian_;
    Vector linear_;
    double constant_ = 0.0;
    double radius_;
    Vector w_star_;
    double f_star_ = 0.0;
    Vector grad_star_;
};

/// Per-state loss and gradient; `state` is a 0-based chain state.
LossGradient regression_loss_gradient(const RegressionInstance& inst, const Vector& w, std::size_t state);

struct RegressionOptimum {
    Vector w;
    double value;
};

/// Normal-equation minimizer, falling back to projected gradient when it
/// leaves the ball. Near-singular Hessians are regularized by 1e-12 I with a warning.
RegressionOptimum regression_optimum(const RegressionInstance& inst);

struct RegressionSpec {
    std::size_t rows = 50;
    std::size_t dim = 20;
    std::size_t states = 2;
    double noise_variance = 1e-3;
    double radius_factor = 1.1;
};

/// Gaussian designs, Gaussian planted w_i, y_i = X_i w_i + eps.
RegressionInstance make_regression(const RegressionSpec& spec, const Vector& weights, Rng& rng);

class RegressionOracle final : public GradientOracle {
public:
    explicit RegressionOracle(const RegressionInstance& inst) : inst_(inst) {}
    std::size_t dim() const override { return inst_.dim(); }
    Vector gradient(const Vector& w, const Observation& z) const override;

private:
    const RegressionInstance& inst_;
};

// ---------------------------------------------------------------------------
// Sigmoid regression over a labelled AR(1) process.
// ---------------------------------------------------------------------------

double sigmoid(double x);

/// Loss 0.5 (sigmoid(w.x) - label)^2 and its gradient in w.
LossGradient sigmoid_loss_gradient(const Vector& w, const Vector& x, double label);

/// U diag(rho x d/2, rho/3 x d/2) U^T with U Haar-orthogonal.
Matrix randbimod(std::size_t d, double rho, Rng& rng);

struct SigmoidArInstance {
    std::size_t dim = 10;
    double rho = 0.99;
    Matrix a;
    /// Unit-norm labelling direction.
    Vector u;
    double flip_probability = 0.2;

    static SigmoidArInstance make(std::size_t dim, double rho, Rng& rng);
    Ar1Process process() const { return Ar1Process(a); }
};

/// 1{u.x > 0}, flipped with the instance's flip probability.
double ar_label(const SigmoidArInstance& inst, const Vector& x, Rng& rng);

/// AR(1) features with sampled labels.
class LabeledArStream final : public MarkovStream {
public:
    LabeledArStream(const SigmoidArInstance& inst, Ar1Process process, std::uint64_t seed);

protected:
    Observation emit() override;

private:
    Vector u_;
    double flip_probability_;
    Ar1Process process_;
    Rng rng_;
};

/// Starts the instance's process from a draw of its stationary Gaussian law.
Ar1Process stationary_start(const SigmoidArInstance& inst, Rng& rng);

class SigmoidOracle final : public GradientOracle {
public:
    explicit SigmoidOracle(std::size_t dim) : dim_(dim) {}
    std::size_t dim() const override { return dim_; }
    Vector gradient(const Vector& w, const Observation& z) const override;

private:
    std::size_t dim_;
};

/// Monte Carlo stand-in for E_mu[loss]: a fixed trajectory after burn-in.
class SigmoidObjective {
public:
    SigmoidObjective(const SigmoidArInstance& inst, std::size_t burn_in, std::size_t samples, std::uint64_t seed);

    double objective(const Vector& w) const;
    Vector gradient(const Vector& w) const;
    double gradient_norm_sq(const Vector& w) const { return gradient(w).squaredNorm(); }
    std::size_t samples() const noexcept { return labels_.size(); }

private:
    Matrix features_;  // one sample per column
    std::vector<double> labels_;
};

// ---------------------------------------------------------------------------
// TD(0) with linear features over a finite Markov reward process.
// ---------------------------------------------------------------------------

/// Markov reward process with per-transition rewards and linear features.
class Mrp {
public:
    /// `rewards(s, s')` is paid on s -> s'. radius <= 0 selects 2 |theta*|;
    /// r_max <= 0 selects max |reward|.
    Mrp(FiniteChain chain, Matrix rewards, Matrix features, double gamma, double radius = 0.0,
        double r_max = 0.0);

    const FiniteChain& chain() const noexcept { return chain_; }
    const Matrix& rewards() const noexcept { return rewards_; }
    const Matrix& features() const noexcept { return features_; }
    std::size_t n_states() const noexcept { return chain_.n_states(); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(features_.cols()); }
    double gamma() const noexcept { return gamma_; }
    double radius() const noexcept { return radius_; }
    double r_max() const noexcept { return r_max_; }
    const Distribution& stationary() const noexcept { return mu_; }
    const Vector& theta_star() const noexcept { return theta_star_; }
    /// Expected one-step reward from each state.
    Vector expected_reward() const;

private:
    FiniteChain chain_;
    Matrix rewards_;
    Matrix features_;
    double gamma_;
    double radius_;
    double r_max_;
    Distribution mu_;
    Vector theta_star_;
};

/// (r + gamma phi(s').theta - phi(s).theta) phi(s).
Vector semi_gradient(const Mrp& mrp, const Vector& theta, const Transition& z);
/// Steady-state mean of the semi-gradient.
Vector bar_g(const Mrp& mrp, const Vector& theta);
/// Root of bar_g; throws SingularSystem when the features are rank deficient under mu.
Vector theta_star(const Mrp& mrp);
/// sum_s mu(s) (V_theta*(s) - V_theta(s))^2.
double value_error(const Mrp& mrp, const Vector& theta);

struct MrpSpec {
    std::size_t states = 5;
    std::size_t features = 3;
    double gamma = 0.9;
    /// Identity features (features is then ignored).
    bool tabular = false;
};

/// Dirichlet(1) transition rows, U[-1, 1] rewards, unit-norm Gaussian features, R = 2 |theta*|.
Mrp make_random_mrp(const MrpSpec& spec, Rng& rng);

/// Emits consecutive (s, r, s') transitions of the MRP.
class MrpStream final : public MarkovStream {
public:
    MrpStream(const Mrp& mrp, std::size_t start_state, std::uint64_t seed);

protected:
    Observation emit() override;

private:
    const Mrp& mrp_;
    ChainStream chain_;
};

class TdOracle final : public GradientOracle {
public:
    explicit TdOracle(const Mrp& mrp) : mrp_(mrp) {}
    std::size_t dim() const override { return mrp_.dim(); }
    Vector gradient(const Vector& theta, const Observation& z) const override;

private:
    const Mrp& mrp_;
};

struct TdOptions {
    std::uint64_t iterations = 10'000;
    std::uint64_t record_every = 1'000;
    LevelDistribution levels = LevelDistribution::truncated_geometric(5);
    std::size_t start_state = 0;
};

/// Projected multilevel TD: theta <- Pi(theta + eta g) with AdaGrad-Norm eta and
/// alpha = sqrt(2) R. Records value_error of the running average, including t = 1.
RunTrace run_td_mag(const Mrp& mrp, const TdOptions& options, Rng& rng);

}  // namespace markovopt
