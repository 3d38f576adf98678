#include <cmath>
#include <limits>

#include "doctest.h"
#include "markovopt/errors.hpp"
#include "markovopt/optim.hpp"
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

/// Regression on a one-state chain: the stream always emits state 0, so
/// every multilevel estimate is the exact gradient.
struct SingleState {
    RegressionInstance inst;
    FiniteChain chain;
};

SingleState single_state(Rng& rng) {
    RegressionSpec spec;
    spec.rows = 30;
    spec.dim = 5;
    spec.states = 1;
    return {make_regression(spec, Vector::Ones(1), rng), FiniteChain(Matrix::Ones(1, 1))};
}

}  // namespace

TEST_CASE("projection examples") {
    const auto ball = Domain::l2_ball(1.0);
    CHECK(ball.project(vec({0.3, -0.4})) == vec({0.3, -0.4}));
    CHECK((project(ball, vec({3, 4})) - vec({0.6, 0.8})).norm() < 1e-15);
    CHECK(Domain::l2_ball(7.0).project(vec({0, 0})) == vec({0, 0}));
    CHECK(Domain::unconstrained().project(vec({30, 40})) == vec({30, 40}));
    CHECK(ball.diameter() == 2.0);
    CHECK(std::isinf(Domain::unconstrained().diameter()));
    CHECK_THROWS_AS(Domain::l2_ball(-1.0), InvalidParams);
}

TEST_CASE("projection properties on random pairs") {
    Rng rng(1);
    for (int k = 0; k < 1000; ++k) {
        const auto ball = Domain::l2_ball(0.1 + uniform01(rng) * 3.0);
        const Vector x = gaussian(5, rng) * 3.0;
        const Vector y = gaussian(5, rng) * 3.0;
        const Vector px = ball.project(x);
        CHECK((ball.project(px) - px).norm() <= 1e-13);
        CHECK(px.norm() <= ball.radius() * (1 + 1e-15));
        CHECK((px - ball.project(y)).norm() <= (x - y).norm() + 1e-12);
    }
}

TEST_CASE("adagrad step examples") {
    AdaGradState s{1.0, 0.0};
    CHECK(std::isinf(s.step_size()));
    const Vector w = vec({1, 2});
    CHECK(adagrad_step(s, w, vec({0, 0}), Domain::unconstrained()) == w);
    CHECK(s.sum_sq == 0.0);
    CHECK(adagrad_step(s, w, vec({0.6, 0.8}), Domain::unconstrained()).isApprox(vec({0.4, 1.2}), 1e-15));

    AdaGradState two{3.0, 0.0};
    adagrad_step(two, w, vec({1, 0}), Domain::unconstrained());
    adagrad_step(two, w, vec({1, std::sqrt(2.0)}), Domain::unconstrained());
    CHECK(two.step_size() == doctest::Approx(1.5));
}

TEST_CASE("AdaGrad-Norm regret bound") {
    Rng rng(2);
    for (int seq = 0; seq < 200; ++seq) {
        const Eigen::Index d = 1 + seq % 6;
        const auto ball = Domain::l2_ball(0.2 + 3.0 * uniform01(rng));
        AdaGradState s{ball.diameter() / std::sqrt(2.0), 0.0};
        Vector w = ball.project(Vector::Zero(d));
        std::vector<Vector> ws, gs;
        for (int t = 0; t < 1 + seq % 60; ++t) {
            // Mix tiny and large gradients to stress the accumulator.
            Vector g = gaussian(d, rng) * (uniform01(rng) < 0.1 ? 1e-6 : 5.0 * uniform01(rng));
            ws.push_back(w);
            gs.push_back(g);
            w = adagrad_step(s, w, g, ball);
        }
        for (int k = 0; k < 20; ++k) {
            const Vector u = ball.project(gaussian(d, rng) * ball.radius());
            double regret = 0.0;
            for (std::size_t t = 0; t < gs.size(); ++t) regret += gs[t].dot(ws[t] - u);
            CHECK(regret <= ball.diameter() * std::sqrt(2.0 * s.sum_sq) + 1e-9);
        }
    }
}

TEST_CASE("Auer-Gentile inequality") {
    Rng rng(3);
    for (int seq = 0; seq < 200; ++seq) {
        double prefix = 0.0, lhs = 0.0;
        for (int i = 0; i < 1 + seq % 50; ++i) {
            const double a = uniform01(rng) < 0.3 ? 0.0 : std::exp(6.0 * uniform01(rng) - 3.0);
            prefix += a;
            if (prefix > 0.0) lhs += a / std::sqrt(prefix);
        }
        CHECK(lhs <= 2.0 * std::sqrt(prefix) + 1e-9);
    }
}

TEST_CASE("step sizes never increase") {
    Rng rng(4);
    AdaGradState s{2.0, 0.0};
    double prev = s.step_size();
    Vector w = Vector::Zero(3);
    for (int t = 0; t < 500; ++t) {
        w = adagrad_step(s, w, gaussian(3, rng) * (t % 7 == 0 ? 0.0 : 1.0), Domain::l2_ball(1.0));
        CHECK(s.step_size() <= prev);
        prev = s.step_size();
    }
}

TEST_CASE("method names round trip") {
    for (auto m : {Method::MAG, Method::AdaGrad, Method::SGD, Method::SGD_MLMC, Method::SGD_DD}) {
        CHECK(parse_method(method_name(m)) == m);
    }
    CHECK_THROWS_AS(parse_method("Adam"), InvalidParams);
}

TEST_CASE("MAG on exact gradients converges") {
    Rng rng(5);
    const auto setup = single_state(rng);
    ChainStream stream(setup.chain, 0, 1);
    RegressionOracle oracle(setup.inst);
    RunParams params;
    params.unit = BudgetUnit::Iterations;
    params.budget = 10'000;
    params.record_every = 10'000;
    params.domain = Domain::l2_ball(setup.inst.radius());
    Rng run_rng(6);
    const auto trace = run_method(Method::MAG, oracle, stream, params, run_rng);
    CHECK(trace.iterations == 10'000);
    CHECK(setup.inst.suboptimality(trace.average) < 1e-4);
}

TEST_CASE("SGD_DD with gap 1 matches SGD") {
    Rng rng(7);
    RegressionSpec spec;
    spec.rows = 10;
    spec.dim = 4;
    const auto inst = make_regression(spec, vec({0.5, 0.5}), rng);
    RegressionOracle oracle(inst);
    RunParams params;
    params.budget = 5000;
    params.record_every = 500;
    params.domain = Domain::l2_ball(inst.radius());
    params.dd_gap = 1;
    params.metrics.push_back({"sub", [&inst](const Vector& w) { return inst.suboptimality(w); }});
    params.keep_iterates = true;

    ChainStream s1(two_state_chain(0.1), 0, 9);
    ChainStream s2(two_state_chain(0.1), 0, 9);
    Rng r1(10), r2(10);
    const auto sgd = run_method(Method::SGD, oracle, s1, params, r1);
    const auto dd = run_method(Method::SGD_DD, oracle, s2, params, r2);
    REQUIRE(sgd.records.size() == dd.records.size());
    for (std::size_t i = 0; i < sgd.records.size(); ++i) {
        CHECK(sgd.records[i].values == dd.records[i].values);
        CHECK(sgd.records[i].samples_cum == dd.records[i].samples_cum);
    }
    CHECK(sgd.average == dd.average);
    CHECK(sgd.last == dd.last);
}

TEST_CASE("identical inputs give identical traces") {
    Rng rng(8);
    RegressionSpec spec;
    spec.rows = 10;
    spec.dim = 4;
    const auto inst = make_regression(spec, vec({0.5, 0.5}), rng);
    RegressionOracle oracle(inst);
    RunParams params;
    params.budget = 20'000;
    params.record_every = 1000;
    params.domain = Domain::l2_ball(inst.radius());
    params.metrics.push_back({"sub", [&inst](const Vector& w) { return inst.suboptimality(w); }});
    for (auto m : {Method::MAG, Method::AdaGrad, Method::SGD, Method::SGD_MLMC}) {
        ChainStream s1(two_state_chain(0.05), 1, 3);
        ChainStream s2(two_state_chain(0.05), 1, 3);
        Rng r1(4), r2(4);
        const auto a = run_method(m, oracle, s1, params, r1);
        const auto b = run_method(m, oracle, s2, params, r2);
        REQUIRE(a.records.size() == b.records.size());
        for (std::size_t i = 0; i < a.records.size(); ++i) CHECK(a.records[i].values == b.records[i].values);
        CHECK(a.average == b.average);
    }
}

TEST_CASE("MAG sample accounting") {
    Rng rng(9);
    RegressionSpec spec;
    spec.rows = 5;
    spec.dim = 3;
    const auto inst = make_regression(spec, vec({0.5, 0.5}), rng);
    RegressionOracle oracle(inst);
    RunParams params;
    params.unit = BudgetUnit::Iterations;
    params.budget = 10'000;
    params.record_every = 1000;
    params.domain = Domain::l2_ball(inst.radius());
    params.levels = LevelDistribution::full_geometric(8);
    ChainStream stream(two_state_chain(0.2), 0, 5);
    Rng run_rng(12);
    const auto trace = run_method(Method::MAG, oracle, stream, params, run_rng);
    CHECK(trace.samples == stream.samples_emitted());
    CHECK(trace.records.size() == 10);
    CHECK(trace.records.back().samples_cum == trace.samples);
    const double expected = 10'000 * expected_sample_count(params.levels);
    CHECK(std::abs(static_cast<double>(trace.samples) - expected) < 0.05 * expected);
}

TEST_CASE("sample budget checkpoints") {
    Rng rng(10);
    RegressionSpec spec;
    spec.rows = 5;
    spec.dim = 3;
    const auto inst = make_regression(spec, vec({0.5, 0.5}), rng);
    RegressionOracle oracle(inst);
    RunParams params;
    params.budget = 50'000;
    params.record_every = 1000;
    params.domain = Domain::l2_ball(inst.radius());
    params.metrics.push_back({"sub", [&inst](const Vector& w) { return inst.suboptimality(w); }});
    for (auto m : {Method::MAG, Method::AdaGrad, Method::SGD, Method::SGD_MLMC}) {
        ChainStream stream(two_state_chain(0.2), 0, 5);
        Rng run_rng(13);
        const auto trace = run_method(m, oracle, stream, params, run_rng);
        REQUIRE(trace.records.size() == 50);
        for (std::size_t i = 0; i < trace.records.size(); ++i) {
            CHECK(trace.records[i].checkpoint == i + 1);
            CHECK(trace.records[i].samples_cum >= (i + 1) * 1000);
        }
        CHECK(trace.samples >= params.budget);
        CHECK(trace.samples == stream.samples_emitted());
    }
}

TEST_CASE("invalid run parameters") {
    Rng rng(11);
    const auto setup = single_state(rng);
    RegressionOracle oracle(setup.inst);
    ChainStream stream(setup.chain, 0, 1);
    RunParams params;
    Rng r(1);
    CHECK_THROWS_AS(run_method(Method::MAG, oracle, stream, params, r), InvalidParams);
    params.budget = 10;
    params.record_every = 5;
    CHECK_THROWS_AS(run_method(Method::SGD_DD, oracle, stream, params, r), InvalidParams);
    params.alpha = -1.0;
    CHECK_THROWS_AS(run_method(Method::MAG, oracle, stream, params, r), InvalidParams);
}

TEST_CASE("average and random iterates") {
    RunTrace empty;
    CHECK_THROWS_AS(average_iterate(empty), EmptyTrace);
    Rng rng(12);
    CHECK_THROWS_AS(random_iterate(empty, rng), EmptyTrace);

    RunTrace constant;
    constant.iterates = {vec({2, 3}), vec({2, 3}), vec({2, 3})};
    constant.average = vec({2, 3});
    constant.iterations = 3;
    CHECK(average_iterate(constant) == vec({2, 3}));

    RunTrace basis;
    basis.iterates = {vec({1, 0, 0}), vec({0, 1, 0})};
    basis.average = vec({0.5, 0.5, 0});
    basis.iterations = 2;
    CHECK(average_iterate(basis) == vec({0.5, 0.5, 0}));

    RunTrace four;
    for (int i = 0; i < 4; ++i) four.iterates.push_back(Vector::Constant(1, i));
    four.iterations = 4;
    std::array<int, 4> hits{};
    constexpr int n = 100'000;
    for (int i = 0; i < n; ++i) ++hits[static_cast<std::size_t>(random_iterate(four, rng)(0))];
    for (int h : hits) CHECK(std::abs(static_cast<double>(h) / n - 0.25) < 0.01);
}

TEST_CASE("run_method average matches the stored iterates") {
    Rng rng(14);
    RegressionSpec spec;
    spec.rows = 5;
    spec.dim = 3;
    const auto inst = make_regression(spec, vec({0.5, 0.5}), rng);
    RegressionOracle oracle(inst);
    RunParams params;
    params.unit = BudgetUnit::Iterations;
    params.budget = 300;
    params.record_every = 100;
    params.domain = Domain::l2_ball(inst.radius());
    params.keep_iterates = true;
    ChainStream stream(two_state_chain(0.2), 0, 5);
    Rng run_rng(15);
    const auto trace = run_method(Method::AdaGrad, oracle, stream, params, run_rng);
    REQUIRE(trace.iterates.size() == 300);
    CHECK(trace.iterates.front() == Vector::Zero(3));
    Vector mean = Vector::Zero(3);
    for (const auto& w : trace.iterates) mean += w;
    mean /= 300.0;
    CHECK((average_iterate(trace) - mean).norm() < 1e-12);
}
