#include <cmath>

#include "markovopt/errors.hpp"
#include "markovopt/problems.hpp"

namespace markovopt {

namespace {

constexpr double kNormSlack = 1e-12;

Matrix bellman_matrix(const Mrp& mrp) {
    const Matrix& phi = mrp.features();
    const Matrix& p = mrp.chain().transition();
    return phi.transpose() * mrp.stationary().weights().asDiagonal() * (phi - mrp.gamma() * p * phi);
}

Vector bellman_offset(const Mrp& mrp) {
    return mrp.features().transpose() * mrp.stationary().weights().asDiagonal() * mrp.expected_reward();
}

}  // namespace

Mrp::Mrp(FiniteChain chain, Matrix rewards, Matrix features, double gamma, double radius, double r_max)
    : chain_(std::move(chain)),
      rewards_(std::move(rewards)),
      features_(std::move(features)),
      gamma_(gamma),
      radius_(radius),
      r_max_(r_max),
      mu_(stationary_distribution(chain_)) {
    const auto n = static_cast<Eigen::Index>(chain_.n_states());
    if (rewards_.rows() != n || rewards_.cols() != n) {
        throw DimensionMismatch("reward matrix must be n x n");
    }
    if (features_.rows() != n || features_.cols() == 0) {
        throw DimensionMismatch("feature matrix must have one row per state");
    }
    if (!(gamma_ >= 0.0 && gamma_ < 1.0)) {
        throw InvalidParams("discount must lie in [0, 1)");
    }
    if (features_.rowwise().norm().maxCoeff() > 1.0 + kNormSlack) {
        throw InvalidParams("feature rows must have norm <= 1");
    }
    const double largest = rewards_.cwiseAbs().maxCoeff();
    if (r_max_ <= 0.0) {
        r_max_ = largest;
    } else if (largest > r_max_ + kNormSlack) {
        throw InvalidParams("reward exceeds r_max");
    }
    theta_star_ = markovopt::theta_star(*this);
    const double norm = theta_star_.norm();
    if (radius_ <= 0.0) {
        radius_ = norm > 0.0 ? 2.0 * norm : 1.0;
    } else if (norm > radius_ + kNormSlack) {
        throw InvalidParams("projection radius must contain theta*");
    }
}

Vector Mrp::expected_reward() const {
    return chain_.transition().cwiseProduct(rewards_).rowwise().sum();
}

Vector semi_gradient(const Mrp& mrp, const Vector& theta, const Transition& z) {
    const auto n = mrp.n_states();
    if (z.state >= n || z.next_state >= n) {
        throw BadState("transition refers to a state outside the MRP");
    }
    const auto phi = mrp.features().row(static_cast<Eigen::Index>(z.state)).transpose();
    const auto phi_next = mrp.features().row(static_cast<Eigen::Index>(z.next_state)).transpose();
    const double td_error = z.reward + mrp.gamma() * phi_next.dot(theta) - phi.dot(theta);
    return td_error * phi;
}

Vector bar_g(const Mrp& mrp, const Vector& theta) {
    return bellman_offset(mrp) - bellman_matrix(mrp) * theta;
}

Vector theta_star(const Mrp& mrp) {
    const Matrix a = bellman_matrix(mrp);
    Eigen::FullPivLU<Matrix> lu(a);
    if (lu.rank() < a.rows()) {
        throw SingularSystem("features are rank deficient under the stationary weighting");
    }
    return lu.solve(bellman_offset(mrp));
}

double value_error(const Mrp& mrp, const Vector& theta) {
    const Vector gap = mrp.features() * (mrp.theta_star() - theta);
    return mrp.stationary().weights().dot(gap.cwiseAbs2());
}

Mrp make_random_mrp(const MrpSpec& spec, Rng& rng) {
    if (spec.states == 0 || (!spec.tabular && spec.features == 0)) {
        throw InvalidParams("MRP sizes must be positive");
    }
    const auto n = static_cast<Eigen::Index>(spec.states);
    std::exponential_distribution<double> exponential(1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (;;) {
        Matrix p(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                p(i, j) = exponential(rng);
            }
            p.row(i) /= p.row(i).sum();
        }
        Matrix rewards(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                rewards(i, j) = 2.0 * uniform01(rng) - 1.0;
            }
        }
        Matrix phi;
        if (spec.tabular) {
            phi = Matrix::Identity(n, n);
        } else {
            phi.resize(n, static_cast<Eigen::Index>(spec.features));
            for (Eigen::Index i = 0; i < n; ++i) {
                for (Eigen::Index j = 0; j < phi.cols(); ++j) {
                    phi(i, j) = normal(rng);
                }
                phi.row(i).normalize();
            }
        }
        FiniteChain chain(std::move(p));
        if (!chain.ergodic()) {
            continue;
        }
        try {
            return Mrp(std::move(chain), std::move(rewards), std::move(phi), spec.gamma, 0.0, 1.0);
        } catch (const SingularSystem&) {
            continue;
        }
    }
}

MrpStream::MrpStream(const Mrp& mrp, std::size_t start_state, std::uint64_t seed)
    : mrp_(mrp), chain_(mrp.chain(), start_state, seed) {}

Observation MrpStream::emit() {
    const auto s = chain_.current_state();
    const auto next = std::get<std::size_t>(chain_.next());
    return Transition{s, mrp_.rewards()(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(next)), next};
}

Vector TdOracle::gradient(const Vector& theta, const Observation& z) const {
    return semi_gradient(mrp_, theta, std::get<Transition>(z));
}

RunTrace run_td_mag(const Mrp& mrp, const TdOptions& options, Rng& rng) {
    MrpStream stream(mrp, options.start_state, rng());
    TdOracle oracle(mrp);

    RunParams params;
    params.unit = BudgetUnit::Iterations;
    params.budget = options.iterations;
    params.record_every = options.record_every;
    params.record_first = true;
    params.domain = Domain::l2_ball(mrp.radius());
    params.alpha = std::sqrt(2.0) * mrp.radius();
    params.levels = options.levels;
    params.ascent = true;
    params.metrics.push_back({"value_error", [&mrp](const Vector& theta) { return value_error(mrp, theta); }});

    RunTrace trace = run_method(Method::MAG, oracle, stream, params, rng);
    trace.method = "TD_MAG";
    return trace;
}

}  // namespace markovopt
