#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "markovopt/errors.hpp"
#include "markovopt/harness.hpp"
#include "markovopt/problems.hpp"

namespace markovopt {

namespace {

std::string describe(double measured, std::string_view relation, double bound) {
    std::ostringstream os;
    os << std::setprecision(12) << "measured " << measured << ' ' << relation << ' ' << bound;
    return os.str();
}

class Report {
public:
    explicit Report(std::string suite) : suite_(std::move(suite)) {}

    void at_most(std::string name, double measured, double bound) {
        results_.push_back({suite_, std::move(name), measured <= bound, describe(measured, "<=", bound)});
    }
    void at_least(std::string name, double measured, double bound) {
        results_.push_back({suite_, std::move(name), measured >= bound, describe(measured, ">=", bound)});
    }
    void equal(std::string name, double measured, double expected) {
        results_.push_back({suite_, std::move(name), measured == expected, describe(measured, "==", expected)});
    }

    std::vector<CheckResult> take() { return std::move(results_); }

private:
    std::string suite_;
    std::vector<CheckResult> results_;
};

FiniteChain random_ergodic_chain(std::size_t n, Rng& rng) {
    std::exponential_distribution<double> exponential(1.0);
    Matrix p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        for (Eigen::Index j = 0; j < p.cols(); ++j) {
            p(i, j) = exponential(rng);
        }
        p.row(i) /= p.row(i).sum();
    }
    return FiniteChain(std::move(p));
}

Vector gaussian(std::size_t d, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        v(i) = normal(rng);
    }
    return v;
}

/// Largest relative error between a gradient and central differences of `loss`.
template <typename Loss>
double finite_difference_error(const Loss& loss, const Vector& w, const Vector& gradient, double h = 1e-6) {
    Vector probe = w;
    Vector numeric(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        probe(i) = w(i) + h;
        const double up = loss(probe);
        probe(i) = w(i) - h;
        const double down = loss(probe);
        probe(i) = w(i);
        numeric(i) = (up - down) / (2.0 * h);
    }
    return (numeric - gradient).norm() / std::max(gradient.norm(), 1e-8);
}

std::vector<CheckResult> verify_chains() {
    Report report("chains");
    const auto streak = winning_streak_reversal(5);
    report.at_least("winning_streak(5) d_mix(3) >= 1/4", d_mix(streak, 3), 0.25);
    report.at_most("winning_streak(5) d_mix(4) == 0", d_mix(streak, 4), 1e-12);
    report.equal("winning_streak(5) mixing_time == 4", static_cast<double>(mixing_time(streak)), 4.0);

    Rng rng(20220701);
    double worst_fixed_point = 0.0;
    double worst_increase = -1.0;
    double worst_decay = -1.0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto chain = random_ergodic_chain(2 + static_cast<std::size_t>(trial % 7), rng);
        const auto mu = stationary_distribution(chain);
        const Vector moved = (mu.weights().transpose() * chain.transition()).transpose();
        worst_fixed_point = std::max(worst_fixed_point, (moved - mu.weights()).lpNorm<1>());
        double previous = d_mix(chain, mu, 0);
        for (std::uint64_t t = 1; t <= 50; ++t) {
            const double current = d_mix(chain, mu, t);
            worst_increase = std::max(worst_increase, current - previous);
            previous = current;
        }
        const auto tau = mixing_time(chain);
        for (int l = 1; l <= 4; ++l) {
            worst_decay = std::max(worst_decay, d_mix(chain, mu, tau * static_cast<std::uint64_t>(l)) -
                                                    std::ldexp(1.0, -l));
        }
    }
    report.at_most("stationary fixed point |mu P - mu|_1", worst_fixed_point, 1e-11);
    report.at_most("d_mix non-increasing (max step increase)", worst_increase, 1e-12);
    report.at_most("d_mix(l tau) - 2^-l", worst_decay, 1e-12);

    double worst_sandwich = -std::numeric_limits<double>::infinity();
    for (double p : {0.3, 0.1, 0.01, 0.001}) {
        const auto chain = two_state_chain(p);
        const auto bounds = eigen_mixing_bounds(chain);
        const auto tau = static_cast<double>(mixing_time(chain));
        worst_sandwich = std::max({worst_sandwich, bounds.lower - tau, tau - bounds.upper});
    }
    report.at_most("eigen bounds sandwich (max violation)", worst_sandwich, 0.0);
    const auto bounds = eigen_mixing_bounds(two_state_chain(1e-4));
    report.at_most("p=1e-4 lower bound vs 3465.0", std::abs(bounds.lower - 3465.0), 0.05);
    report.at_most("p=1e-4 upper bound vs 10397.2", std::abs(bounds.upper - 10397.2), 0.05);
    return report.take();
}

std::vector<CheckResult> verify_estimators() {
    Report report("estimators");
    Rng rng(7);
    RegressionSpec spec;
    spec.rows = 10;
    spec.dim = 4;
    const Vector uniform = Vector::Constant(2, 0.5);
    const auto inst = make_regression(spec, uniform, rng);
    const RegressionOracle oracle(inst);

    double residual = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int j_max = 1 + trial % 6;
        std::vector<Observation> samples;
        for (int i = 0; i < (1 << j_max); ++i) {
            samples.emplace_back(static_cast<std::size_t>(rng() & 1U));
        }
        const Vector w = gaussian(spec.dim, rng);
        const auto levels = level_decomposition(oracle, w, samples);
        for (const auto& dist : {LevelDistribution::full_geometric(std::uint64_t{1} << j_max),
                                 LevelDistribution::truncated_geometric(j_max)}) {
            Vector mean = levels[0];
            for (int j = 1; j <= j_max; ++j) {
                mean += dist.probability(j) * dist.compensation_factor(j) * (levels[j] - levels[j - 1]);
            }
            residual = std::max(residual, (mean - levels[j_max]).cwiseAbs().maxCoeff());
        }
    }
    report.at_most("telescoping residual", residual, 1e-10);

    const auto horizon8 = LevelDistribution::full_geometric(8);
    ChainStream stream(two_state_chain(0.3), 0, 11);
    Rng level_rng(12);
    const Vector w = Vector::Zero(static_cast<Eigen::Index>(spec.dim));
    std::uint64_t total = 0;
    constexpr int draws = 100'000;
    for (int i = 0; i < draws; ++i) {
        total += mlmc_gradient(oracle, w, stream, horizon8, level_rng).samples_consumed;
    }
    report.at_most("mean samples at T=8 vs 3.125", std::abs(static_cast<double>(total) / draws - 3.125), 0.05);
    report.equal("expected_sample_count(2^20)",
                 expected_sample_count(LevelDistribution::full_geometric(std::uint64_t{1} << 20)),
                 20.0 + std::ldexp(1.0, -20));
    report.at_most("truncated K=5 P(J=1) vs 16/31",
                   std::abs(LevelDistribution::truncated_geometric(5).probability(1) - 16.0 / 31.0), 1e-15);
    return report.take();
}

std::vector<CheckResult> verify_optim() {
    Report report("optim");
    Rng rng(99);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    double regret_slack = std::numeric_limits<double>::infinity();
    for (int seq = 0; seq < 200; ++seq) {
        const std::size_t d = 1 + static_cast<std::size_t>(seq % 5);
        const double radius = 0.5 + 2.0 * unit(rng);
        const Domain ball = Domain::l2_ball(radius);
        AdaGradState state{ball.diameter() / std::sqrt(2.0), 0.0};
        Vector w = ball.project(Vector::Zero(static_cast<Eigen::Index>(d)));
        std::vector<Vector> iterates;
        std::vector<Vector> grads;
        double sum_sq = 0.0;
        for (int t = 0; t < 50; ++t) {
            Vector g = gaussian(d, rng) * (3.0 * unit(rng));
            iterates.push_back(w);
            grads.push_back(g);
            sum_sq += g.squaredNorm();
            w = adagrad_step(state, w, g, ball);
        }
        for (int k = 0; k < 20; ++k) {
            const Vector u = ball.project(gaussian(d, rng) * radius);
            double regret = 0.0;
            for (std::size_t t = 0; t < grads.size(); ++t) {
                regret += grads[t].dot(iterates[t] - u);
            }
            regret_slack = std::min(regret_slack, ball.diameter() * std::sqrt(2.0 * sum_sq) - regret);
        }
    }
    report.at_least("AdaGrad regret bound slack", regret_slack, -1e-9);

    double auer_slack = std::numeric_limits<double>::infinity();
    for (int seq = 0; seq < 200; ++seq) {
        double prefix = 0.0;
        double lhs = 0.0;
        const int len = 1 + seq % 40;
        for (int i = 0; i < len; ++i) {
            const double a = (unit(rng) < 0.2) ? 0.0 : std::pow(unit(rng), 3) * 10.0;
            prefix += a;
            if (prefix > 0.0) {
                lhs += a / std::sqrt(prefix);
            }
        }
        auer_slack = std::min(auer_slack, 2.0 * std::sqrt(prefix) - lhs);
    }
    report.at_least("Auer-Gentile inequality slack", auer_slack, -1e-9);

    double eta_increase = -std::numeric_limits<double>::infinity();
    AdaGradState state{1.0, 0.0};
    double previous = std::numeric_limits<double>::infinity();
    Vector w = Vector::Zero(3);
    for (int t = 0; t < 1000; ++t) {
        w = adagrad_step(state, w, gaussian(3, rng) * unit(rng), Domain::unconstrained());
        eta_increase = std::max(eta_increase, state.step_size() - previous);
        previous = state.step_size();
    }
    report.at_most("step size non-increasing (max increase)", eta_increase, 0.0);

    double worst_projection = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const Domain ball = Domain::l2_ball(0.1 + unit(rng));
        const Vector x = gaussian(4, rng) * 2.0;
        const Vector y = gaussian(4, rng) * 2.0;
        const Vector px = ball.project(x);
        worst_projection = std::max({worst_projection, (ball.project(px) - px).norm(),
                                     px.norm() - ball.radius(),
                                     (px - ball.project(y)).norm() - (x - y).norm()});
    }
    report.at_most("projection idempotent, feasible, non-expansive", worst_projection, 1e-12);
    return report.take();
}

std::vector<CheckResult> verify_problems() {
    Report report("problems");
    Rng rng(4242);

    RegressionSpec spec;
    spec.rows = 20;
    spec.dim = 5;
    const auto inst = make_regression(spec, Vector::Constant(2, 0.5), rng);
    double fd_regression = 0.0;
    for (int k = 0; k < 50; ++k) {
        const Vector w = gaussian(spec.dim, rng);
        const std::size_t s = static_cast<std::size_t>(k % 2);
        fd_regression = std::max(fd_regression,
                                 finite_difference_error([&](const Vector& v) { return inst.loss_gradient(v, s).loss; },
                                                         w, inst.loss_gradient(w, s).gradient));
    }
    report.at_most("regression gradient vs finite differences", fd_regression, 1e-5);

    double fd_sigmoid = 0.0;
    for (int k = 0; k < 50; ++k) {
        const Vector w = gaussian(6, rng) * 0.5;
        const Vector x = gaussian(6, rng);
        const double label = static_cast<double>(k % 2);
        fd_sigmoid = std::max(fd_sigmoid, finite_difference_error(
                                              [&](const Vector& v) { return sigmoid_loss_gradient(v, x, label).loss; },
                                              w, sigmoid_loss_gradient(w, x, label).gradient));
    }
    report.at_most("sigmoid gradient vs finite differences", fd_sigmoid, 1e-5);

    double lemma_slack = std::numeric_limits<double>::infinity();
    double bar_g_root = 0.0;
    for (int m = 0; m < 100; ++m) {
        MrpSpec mspec;
        mspec.gamma = 0.99 * uniform01(rng);
        const auto mrp = make_random_mrp(mspec, rng);
        bar_g_root = std::max(bar_g_root, bar_g(mrp, mrp.theta_star()).cwiseAbs().maxCoeff());
        for (int k = 0; k < 10; ++k) {
            const Vector theta = gaussian(mrp.dim(), rng) * 3.0;
            const double lhs = bar_g(mrp, theta).dot(mrp.theta_star() - theta);
            lemma_slack = std::min(lemma_slack, lhs - (1.0 - mrp.gamma()) * value_error(mrp, theta));
        }
    }
    report.at_least("steady-state TD inequality slack", lemma_slack, -1e-9);
    report.at_most("|bar_g(theta*)|_inf", bar_g_root, 1e-10);

    const Matrix a = randbimod(10, 0.99, rng);
    Vector eig = Eigen::SelfAdjointEigenSolver<Matrix>(a, Eigen::EigenvaluesOnly).eigenvalues();
    Vector expected(10);
    expected.head(5).setConstant(0.99 / 3.0);
    expected.tail(5).setConstant(0.99);
    report.at_most("RandBiMod spectrum error", (eig - expected).cwiseAbs().maxCoeff(), 1e-9);
    report.at_most("RandBiMod asymmetry", (a - a.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    return report.take();
}

}  // namespace

std::vector<CheckResult> verify(std::string_view suite) {
    std::vector<CheckResult> all;
    const auto append = [&all](std::vector<CheckResult> part) {
        all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    };
    const bool everything = suite == "all";
    bool known = everything;
    if (everything || suite == "chains") {
        append(verify_chains());
        known = true;
    }
    if (everything || suite == "estimators") {
        append(verify_estimators());
        known = true;
    }
    if (everything || suite == "optim") {
        append(verify_optim());
        known = true;
    }
    if (everything || suite == "problems") {
        append(verify_problems());
        known = true;
    }
    if (!known) {
        throw ConfigError("unknown verify suite '" + std::string(suite) + "'");
    }
    return all;
}

void print_report(std::ostream& out, const std::vector<CheckResult>& results) {
    for (const auto& r : results) {
        out << (r.passed ? "[PASS] " : "[FAIL] ") << r.suite << ": " << r.name << " (" << r.detail << ")\n";
    }
}

}  // namespace markovopt
