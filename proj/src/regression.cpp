#include <cmath>
#include <iostream>
#include <limits>

#include "markovopt/errors.hpp"
#include "markovopt/problems.hpp"

namespace markovopt {

namespace {

constexpr double kSingularRatio = 1e-12;
constexpr double kRegularization = 1e-12;
constexpr double kGradientMapTol = 1e-10;
constexpr std::size_t kMaxProjectedIterations = 10'000'000;

struct Factorized {
    Eigen::LDLT<Matrix> ldlt;
    double lambda_max;
};

Factorized factorize(const Matrix& hessian) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(hessian, Eigen::EigenvaluesOnly);
    const double lambda_max = eig.eigenvalues().maxCoeff();
    const double lambda_min = eig.eigenvalues().minCoeff();
    if (!(lambda_max > 0.0) || lambda_min <= kSingularRatio * lambda_max) {
        std::clog << "warning: regression Hessian is singular; regularizing by " << kRegularization << " I\n";
        const auto d = hessian.rows();
        return {Eigen::LDLT<Matrix>(hessian + kRegularization * Matrix::Identity(d, d)),
                std::max(lambda_max, kRegularization)};
    }
    return {Eigen::LDLT<Matrix>(hessian), lambda_max};
}

}  // namespace

RegressionInstance::RegressionInstance(std::vector<Matrix> designs, std::vector<Vector> targets, Vector weights,
                                       double radius)
    : designs_(std::move(designs)), targets_(std::move(targets)), weights_(std::move(weights)), radius_(radius) {
    if (designs_.empty() || designs_.size() != targets_.size() ||
        static_cast<std::size_t>(weights_.size()) != designs_.size()) {
        throw DimensionMismatch("regression needs one (X, y, weight) triple per state");
    }
    [[maybe_unused]] const Distribution validated(weights_);
    const auto n = designs_.front().rows();
    const auto d = designs_.front().cols();
    if (n == 0 || d == 0) {
        throw DimensionMismatch("empty design matrix");
    }
    hessian_ = Matrix::Zero(d, d);
    linear_ = Vector::Zero(d);
    for (std::size_t i = 0; i < designs_.size(); ++i) {
        if (designs_[i].rows() != n || designs_[i].cols() != d || targets_[i].size() != n) {
            throw DimensionMismatch("state " + std::to_string(i) + " block has inconsistent shape");
        }
        const double mu = weights_(static_cast<Eigen::Index>(i));
        gram_.push_back(designs_[i].transpose() * designs_[i] / static_cast<double>(n));
        moment_.push_back(designs_[i].transpose() * targets_[i] / static_cast<double>(n));
        hessian_ += mu * gram_.back();
        linear_ += mu * moment_.back();
        constant_ += mu * targets_[i].squaredNorm() / (2.0 * static_cast<double>(n));
    }

    if (radius_ <= 0.0) {
        const Vector w_ls = factorize(hessian_).ldlt.solve(linear_);
        const double norm = w_ls.norm();
        radius_ = norm > 0.0 ? 1.1 * norm : 1.0;
    }
    auto opt = regression_optimum(*this);
    w_star_ = std::move(opt.w);
    f_star_ = opt.value;
    grad_star_ = objective_gradient(w_star_);
}

Vector RegressionInstance::gradient(const Vector& w, std::size_t state) const {
    if (state >= designs_.size()) {
        throw BadState("regression state " + std::to_string(state) + " out of range");
    }
    return gram_[state] * w - moment_[state];
}

LossGradient RegressionInstance::loss_gradient(const Vector& w, std::size_t state) const {
    if (state >= designs_.size()) {
        throw BadState("regression state " + std::to_string(state) + " out of range");
    }
    const auto n = static_cast<double>(rows());
    const Vector residual = designs_[state] * w - targets_[state];
    return {residual.squaredNorm() / (2.0 * n), designs_[state].transpose() * residual / n};
}

double RegressionInstance::objective(const Vector& w) const {
    double total = 0.0;
    for (std::size_t i = 0; i < designs_.size(); ++i) {
        total += weights_(static_cast<Eigen::Index>(i)) * loss_gradient(w, i).loss;
    }
    return total;
}

Vector RegressionInstance::objective_gradient(const Vector& w) const { return hessian_ * w - linear_; }

double RegressionInstance::suboptimality(const Vector& w) const {
    const Vector delta = w - w_star_;
    return 0.5 * delta.dot(hessian_ * delta) + grad_star_.dot(delta);
}

LossGradient regression_loss_gradient(const RegressionInstance& inst, const Vector& w, std::size_t state) {
    return inst.loss_gradient(w, state);
}

RegressionOptimum regression_optimum(const RegressionInstance& inst) {
    const Matrix& h = inst.hessian();
    const Vector& b = inst.linear_term();
    const auto factored = factorize(h);
    Vector w = factored.ldlt.solve(b);
    const double r = inst.radius();
    if (w.norm() > r) {
        // Projected gradient with step 1/L, warm-started at the radial projection.
        const Domain ball = Domain::l2_ball(r);
        const double step = 1.0 / factored.lambda_max;
        w = ball.project(w);
        for (std::size_t k = 0; k < kMaxProjectedIterations; ++k) {
            const Vector next = ball.project(w - step * (h * w - b));
            const double map_norm = (w - next).norm() / step;
            w = next;
            if (map_norm < kGradientMapTol) {
                break;
            }
        }
    }
    return {w, inst.objective(w)};
}

RegressionInstance make_regression(const RegressionSpec& spec, const Vector& weights, Rng& rng) {
    if (spec.rows == 0 || spec.dim == 0 || spec.states == 0) {
        throw InvalidParams("regression sizes must be positive");
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto n = static_cast<Eigen::Index>(spec.rows);
    const auto d = static_cast<Eigen::Index>(spec.dim);
    const double noise_sd = std::sqrt(spec.noise_variance);
    std::vector<Matrix> designs;
    std::vector<Vector> targets;
    for (std::size_t s = 0; s < spec.states; ++s) {
        Vector planted(d);
        for (auto& v : planted) {
            v = normal(rng);
        }
        Matrix x(n, d);
        for (Eigen::Index j = 0; j < d; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) {
                x(i, j) = normal(rng);
            }
        }
        Vector y = x * planted;
        for (auto& v : y) {
            v += noise_sd * normal(rng);
        }
        designs.push_back(std::move(x));
        targets.push_back(std::move(y));
    }
    RegressionInstance unconstrained(designs, targets, weights, std::numeric_limits<double>::max());
    const double radius = spec.radius_factor * unconstrained.optimum().norm();
    return RegressionInstance(std::move(designs), std::move(targets), weights, radius > 0.0 ? radius : 1.0);
}

Vector RegressionOracle::gradient(const Vector& w, const Observation& z) const {
    return inst_.gradient(w, std::get<std::size_t>(z));
}

}  // namespace markovopt
