#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "markovopt/errors.hpp"
#include "markovopt/problems.hpp"

using namespace markovopt;

namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

Vector gaussian(Eigen::Index d, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vector v(d);
    for (Eigen::Index i = 0; i < d; ++i) v(i) = n(rng);
    return v;
}

Matrix gaussian(Eigen::Index r, Eigen::Index c, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = n(rng);
    return m;
}

template <typename F>
Vector central_difference(const F& f, const Vector& w, double h = 1e-6) {
    Vector g(w.size());
    Vector p = w;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        p(i) = w(i) + h;
        const double up = f(p);
        p(i) = w(i) - h;
        const double down = f(p);
        p(i) = w(i);
        g(i) = (up - down) / (2 * h);
    }
    return g;
}

double relative_error(const Vector& a, const Vector& b) {
    return (a - b).norm() / std::max(b.norm(), 1e-8);
}

}  // namespace

TEST_CASE("noise-free regression block is solved by its planted vector") {
    Rng rng(1);
    const Matrix x1 = gaussian(12, 4, rng), x2 = gaussian(12, 4, rng);
    const Vector w1 = gaussian(4, rng), w2 = gaussian(4, rng);
    const RegressionInstance inst({x1, x2}, {x1 * w1, x2 * w2}, vec({0.5, 0.5}), 100.0);
    const auto at = regression_loss_gradient(inst, w1, 0);
    CHECK(at.loss < 1e-25);
    CHECK(at.gradient.norm() < 1e-12);
    CHECK(inst.loss_gradient(w2, 1).gradient.norm() < 1e-12);
}

TEST_CASE("regression gradients match finite differences") {
    Rng rng(2);
    RegressionSpec spec;
    spec.rows = 20;
    spec.dim = 6;
    const auto inst = make_regression(spec, vec({0.5, 0.5}), rng);
    for (int k = 0; k < 50; ++k) {
        const Vector w = gaussian(6, rng);
        const std::size_t s = static_cast<std::size_t>(k % 2);
        const auto lg = inst.loss_gradient(w, s);
        const Vector fd = central_difference([&](const Vector& v) { return inst.loss_gradient(v, s).loss; }, w);
        CHECK(relative_error(lg.gradient, fd) < 1e-5);
        CHECK((inst.gradient(w, s) - lg.gradient).norm() < 1e-10 * std::max(1.0, lg.gradient.norm()));
    }
}

TEST_CASE("two-state objective is the stacked residual") {
    Rng rng(3);
    RegressionSpec spec;
    spec.rows = 15;
    spec.dim = 4;
    const auto inst = make_regression(spec, vec({0.5, 0.5}), rng);
    const auto n = static_cast<double>(spec.rows);
    for (int k = 0; k < 20; ++k) {
        const Vector w = gaussian(4, rng);
        Vector stacked(30);
        stacked << inst.design(0) * w - inst.targets(0), inst.design(1) * w - inst.targets(1);
        const double half_sum = 0.5 * (inst.loss_gradient(w, 0).loss + inst.loss_gradient(w, 1).loss);
        CHECK(half_sum == doctest::Approx(stacked.squaredNorm() / (4 * n)).epsilon(1e-12));
        CHECK(inst.objective(w) == doctest::Approx(half_sum).epsilon(1e-12));
    }
}

TEST_CASE("regression optimum") {
    Rng rng(4);
    const Matrix x = gaussian(10, 3, rng);
    const Vector w0 = gaussian(3, rng);
    const RegressionInstance same({x, x}, {x * w0, x * w0}, vec({0.5, 0.5}), 100.0);
    CHECK((same.optimum() - w0).norm() < 1e-10);
    CHECK(std::abs(same.optimal_value()) < 1e-20);

    RegressionSpec spec;
    spec.rows = 20;
    spec.dim = 5;
    const auto inst = make_regression(spec, vec({0.5, 0.5}), rng);
    const auto opt = regression_optimum(inst);
    CHECK(opt.w == inst.optimum());
    const auto ball = Domain::l2_ball(inst.radius());
    for (int k = 0; k < 1000; ++k) {
        const Vector w = ball.project(gaussian(5, rng) * inst.radius());
        CHECK(inst.objective(w) >= opt.value - 1e-12);
        CHECK(inst.suboptimality(w) >= -1e-12);
        CHECK(inst.suboptimality(w) == doctest::Approx(inst.objective(w) - opt.value).epsilon(1e-9).scale(1e-9));
    }
}

TEST_CASE("scalar toy optimum") {
    const RegressionInstance toy({Matrix::Ones(1, 1), Matrix::Ones(1, 1)}, {vec({2}), vec({0})}, vec({0.5, 0.5}),
                                 1e6);
    CHECK(toy.optimum()(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(toy.optimal_value() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("constrained optimum sits on the ball") {
    const RegressionInstance toy({Matrix::Ones(1, 1), Matrix::Ones(1, 1)}, {vec({2}), vec({0})}, vec({0.5, 0.5}),
                                 0.25);
    CHECK(toy.optimum()(0) == doctest::Approx(0.25).epsilon(1e-9));
    // F(w) = ((w - 2)^2 + w^2) / 4
    CHECK(toy.optimal_value() == doctest::Approx((1.75 * 1.75 + 0.0625) / 4).epsilon(1e-9));
}

TEST_CASE("regression errors") {
    Rng rng(5);
    RegressionSpec spec;
    spec.rows = 5;
    spec.dim = 2;
    const auto inst = make_regression(spec, vec({0.5, 0.5}), rng);
    CHECK_THROWS_AS(inst.loss_gradient(vec({0, 0}), 2), BadState);
    CHECK_THROWS_AS(RegressionInstance({Matrix::Ones(2, 2)}, {vec({1, 1}), vec({1, 1})}, vec({0.5, 0.5})),
                    DimensionMismatch);
}

TEST_CASE("default radius keeps the least squares solution inside") {
    Rng rng(6);
    RegressionSpec spec;
    const auto inst = make_regression(spec, vec({0.5, 0.5}), rng);
    CHECK(inst.optimum().norm() == doctest::Approx(inst.radius() / 1.1).epsilon(1e-9));
}

TEST_CASE("regression gradients stay bounded on the ball") {
    Rng rng(7);
    RegressionSpec spec;
    const auto inst = make_regression(spec, vec({0.5, 0.5}), rng);
    const auto ball = Domain::l2_ball(inst.radius());
    double largest = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const Vector w = ball.project(gaussian(20, rng) * inst.radius());
        for (std::size_t s = 0; s < 2; ++s) largest = std::max(largest, inst.gradient(w, s).norm());
    }
    MESSAGE("max gradient norm on the ball: " << largest);
    CHECK(std::isfinite(largest));
}

TEST_CASE("sigmoid loss examples") {
    const Vector x = vec({1, -2, 3});
    const auto at_zero = sigmoid_loss_gradient(Vector::Zero(3), x, 0.0);
    CHECK(at_zero.loss == doctest::Approx(0.125));
    CHECK((at_zero.gradient - 0.125 * x).norm() < 1e-15);
    for (double label : {0.0, 1.0}) {
        const auto flat = sigmoid_loss_gradient(vec({0.3, 0.1, -2}), Vector::Zero(3), label);
        CHECK(flat.gradient.norm() == 0.0);
        CHECK(flat.loss == doctest::Approx(0.5 * (0.5 - label) * (0.5 - label)));
    }
    CHECK(sigmoid(-800.0) >= 0.0);
    CHECK(sigmoid(800.0) == 1.0);
}

TEST_CASE("sigmoid gradients match finite differences") {
    Rng rng(8);
    for (int k = 0; k < 50; ++k) {
        const Vector w = gaussian(8, rng) * 0.4;
        const Vector x = gaussian(8, rng);
        const double label = static_cast<double>(k % 2);
        const auto lg = sigmoid_loss_gradient(w, x, label);
        const Vector fd =
            central_difference([&](const Vector& v) { return sigmoid_loss_gradient(v, x, label).loss; }, w);
        CHECK(relative_error(lg.gradient, fd) < 1e-5);
    }
}

TEST_CASE("RandBiMod spectrum and symmetry") {
    Rng rng(9);
    for (std::size_t d : {2, 6, 10}) {
        const Matrix a = randbimod(d, 0.99, rng);
        CHECK((a - a.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        const Vector eig = Eigen::SelfAdjointEigenSolver<Matrix>(a).eigenvalues();
        for (Eigen::Index i = 0; i < eig.size(); ++i) {
            const double expected = i < eig.size() / 2 ? 0.33 : 0.99;
            CHECK(std::abs(eig(i) - expected) < 1e-9);
        }
        CHECK_NOTHROW(Ar1Process{a});
    }
    CHECK_THROWS_AS(randbimod(5, 0.9, rng), OddDimension);
}

TEST_CASE("label flip frequency") {
    Rng rng(10);
    const auto inst = SigmoidArInstance::make(6, 0.99, rng);
    const Vector x = inst.u * 0.7;
    constexpr int n = 100'000;
    int ones = 0;
    for (int i = 0; i < n; ++i) ones += ar_label(inst, x, rng) == 1.0 ? 1 : 0;
    CHECK(std::abs(static_cast<double>(ones) / n - 0.8) < 0.005);
    int ones_neg = 0;
    for (int i = 0; i < n; ++i) ones_neg += ar_label(inst, -x, rng) == 1.0 ? 1 : 0;
    CHECK(std::abs(static_cast<double>(ones_neg) / n - 0.2) < 0.005);
}

TEST_CASE("Monte Carlo objective at the origin") {
    Rng rng(11);
    const auto inst = SigmoidArInstance::make(4, 0.9, rng);
    const SigmoidObjective obj(inst, 100, 2000, 5);
    CHECK(obj.samples() == 2000);
    CHECK(obj.objective(Vector::Zero(4)) == doctest::Approx(0.125));
    const Vector w = gaussian(4, rng) * 0.5;
    const Vector fd = central_difference([&](const Vector& v) { return obj.objective(v); }, w);
    CHECK(relative_error(obj.gradient(w), fd) < 1e-5);
}

namespace {

Mrp two_state_mrp(double gamma) {
    Matrix p(2, 2);
    p << 0.5, 0.5, 0.5, 0.5;
    Matrix r(2, 2);
    r << 1, 1, 0, 0;
    return Mrp(FiniteChain(p), r, Matrix::Identity(2, 2), gamma);
}

}  // namespace

TEST_CASE("semi-gradient examples") {
    const Mrp mrp = two_state_mrp(0.5);
    const Vector g = semi_gradient(mrp, vec({1, 1}), Transition{0, 1.0, 1});
    CHECK((g - vec({0.5, 0})).norm() < 1e-15);
    CHECK(semi_gradient(mrp, Vector::Zero(2), Transition{1, 0.0, 0}).norm() == 0.0);
    CHECK_THROWS_AS(semi_gradient(mrp, Vector::Zero(2), Transition{2, 0.0, 0}), BadState);
}

TEST_CASE("semi-gradient bound and finite differences") {
    Rng rng(12);
    MrpSpec spec;
    const Mrp mrp = make_random_mrp(spec, rng);
    const auto ball = Domain::l2_ball(mrp.radius());
    std::uniform_int_distribution<std::size_t> state(0, mrp.n_states() - 1);
    for (int k = 0; k < 10'000; ++k) {
        const Vector theta = ball.project(gaussian(3, rng) * mrp.radius());
        const auto s = state(rng), s2 = state(rng);
        const Transition z{s, mrp.rewards()(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s2)), s2};
        CHECK(semi_gradient(mrp, theta, z).norm() <= mrp.r_max() + 2 * mrp.radius() + 1e-12);
    }
    // The semi-gradient is linear in theta; compare with differences of the map.
    for (int k = 0; k < 50; ++k) {
        const Vector theta = gaussian(3, rng);
        const auto s = state(rng), s2 = state(rng);
        const Transition z{s, 0.3, s2};
        const Vector phi = mrp.features().row(static_cast<Eigen::Index>(s)).transpose();
        const Vector phi2 = mrp.features().row(static_cast<Eigen::Index>(s2)).transpose();
        // Jacobian of the semi-gradient is phi (gamma phi' - phi)^T; check it column by column.
        const Matrix jac = phi * (mrp.gamma() * phi2 - phi).transpose();
        for (Eigen::Index i = 0; i < 3; ++i) {
            const Vector fd = central_difference(
                [&](const Vector& v) { return semi_gradient(mrp, v, z)(i); }, theta);
            CHECK(relative_error(fd, jac.row(i).transpose()) < 1e-5);
        }
    }
}

TEST_CASE("theta star roots the mean semi-gradient") {
    Rng rng(13);
    for (int k = 0; k < 20; ++k) {
        const Mrp mrp = make_random_mrp(MrpSpec{}, rng);
        CHECK(bar_g(mrp, mrp.theta_star()).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(value_error(mrp, mrp.theta_star()) < 1e-25);
        CHECK(mrp.radius() == doctest::Approx(2 * mrp.theta_star().norm()));
    }
}

TEST_CASE("tabular myopic value is the expected reward") {
    Rng rng(14);
    MrpSpec spec;
    spec.tabular = true;
    spec.gamma = 0.0;
    const Mrp mrp = make_random_mrp(spec, rng);
    CHECK((mrp.theta_star() - mrp.expected_reward()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("value error examples") {
    const Mrp mrp = two_state_mrp(0.5);
    const Vector theta = mrp.theta_star() - vec({1, -1});
    CHECK(value_error(mrp, theta) == doctest::Approx(1.0));
    Rng rng(15);
    for (int k = 0; k < 100; ++k) CHECK(value_error(mrp, gaussian(2, rng)) >= 0.0);
}

TEST_CASE("steady-state TD inequality") {
    Rng rng(16);
    for (int m = 0; m < 100; ++m) {
        MrpSpec spec;
        spec.gamma = 0.99 * uniform01(rng);
        const Mrp mrp = make_random_mrp(spec, rng);
        for (int k = 0; k < 10; ++k) {
            const Vector theta = gaussian(3, rng) * 3.0;
            const double lhs = bar_g(mrp, theta).dot(mrp.theta_star() - theta);
            CHECK(lhs >= (1 - mrp.gamma()) * value_error(mrp, theta) - 1e-9);
        }
    }
}

TEST_CASE("rank deficient features") {
    Matrix p(2, 2);
    p << 0.5, 0.5, 0.5, 0.5;
    Matrix phi(2, 2);
    phi << 0.5, 0.5, 0.5, 0.5;
    CHECK_THROWS_AS(Mrp(FiniteChain(p), Matrix::Zero(2, 2), phi, 0.5), SingularSystem);
}

TEST_CASE("MRP stream emits consistent transitions") {
    Rng rng(17);
    const Mrp mrp = make_random_mrp(MrpSpec{}, rng);
    MrpStream stream(mrp, 0, 3);
    std::size_t previous = 0;
    for (int i = 0; i < 100; ++i) {
        const auto z = std::get<Transition>(stream.next());
        CHECK(z.state == previous);
        CHECK(z.reward == mrp.rewards()(static_cast<Eigen::Index>(z.state), static_cast<Eigen::Index>(z.next_state)));
        previous = z.next_state;
    }
}

TEST_CASE("multilevel TD reduces value error") {
    Rng inst_rng(18);
    const Mrp mrp = make_random_mrp(MrpSpec{}, inst_rng);
    double first = 0.0, last = 0.0;
    for (int seed = 0; seed < 5; ++seed) {
        Rng rng(100 + static_cast<std::uint64_t>(seed));
        const auto trace = run_td_mag(mrp, TdOptions{}, rng);
        CHECK(trace.iterations == 10'000);
        REQUIRE(trace.records.size() == 11);
        CHECK(trace.records.front().iteration == 1);
        first += trace.records.front().values[0];
        last += trace.records.back().values[0];
    }
    CHECK(last < first);
}

TEST_CASE("tabular myopic TD approaches expected rewards") {
    Rng inst_rng(19);
    MrpSpec spec;
    spec.tabular = true;
    spec.gamma = 0.0;
    const Mrp mrp = make_random_mrp(spec, inst_rng);
    Vector mean = Vector::Zero(static_cast<Eigen::Index>(mrp.dim()));
    for (int seed = 0; seed < 5; ++seed) {
        Rng rng(200 + static_cast<std::uint64_t>(seed));
        mean += run_td_mag(mrp, TdOptions{}, rng).average;
    }
    mean /= 5.0;
    const double err = (mean - mrp.expected_reward()).cwiseAbs().maxCoeff();
    MESSAGE("tabular l_inf error " << err);
    CHECK(err < 0.1);
}
