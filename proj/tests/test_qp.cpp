#include <doctest.h>

#include "hedge/qp.hpp"
#include "oracles.hpp"

using namespace hedge;
using namespace hedge::testing;

TEST_CASE("finalize validates the problem") {
    QpScenarioProblem p;
    p.n = 2;
    p.Q = Eigen::MatrixXd::Zero(2, 2);
    p.Q(0, 1) = 1.0;  // asymmetric
    CHECK_THROWS_AS(p.finalize(), Error);

    QpScenarioProblem crossed;
    crossed.n = 1;
    crossed.lower = Eigen::VectorXd::Constant(1, 2.0);
    crossed.upper = Eigen::VectorXd::Constant(1, 1.0);
    CHECK_THROWS_AS(crossed.finalize(), Error);
}

TEST_CASE("unconstrained prox has the closed form") {
    Xoshiro256ss rng(11, 0);
    for (int rep = 0; rep < 30; ++rep) {
        const int n = 3;
        const Eigen::MatrixXd G = random_matrix(rng, n, n, -1.0, 1.0);
        QpScenarioProblem p = QpScenarioProblem::unconstrained(
            G * G.transpose() + 0.3 * Eigen::MatrixXd::Identity(n, n),
            random_vector(rng, n, -1.0, 1.0));
        const Eigen::VectorXd v = random_vector(rng, n, -2.0, 2.0);
        const double mu = 0.25 + 2.0 * rng.next_double();
        ProxResult res = prox(p, v, mu);
        REQUIRE(res.status == ProxStatus::solved);
        const Eigen::MatrixXd M = p.Q + Eigen::MatrixXd::Identity(n, n) / mu;
        const Eigen::VectorXd expect = M.ldlt().solve(v / mu - p.c);
        CHECK((res.y - expect).lpNorm<Eigen::Infinity>() <= 1e-9);
    }
}

TEST_CASE("pure box prox clamps") {
    QpScenarioProblem p;
    p.n = 3;
    p.lower = Eigen::VectorXd::Constant(3, -1.0);
    p.upper = Eigen::VectorXd::Constant(3, 1.0);
    p.finalize();
    Eigen::VectorXd v(3);
    v << -4.0, 0.25, 7.0;
    ProxResult res = prox(p, v, 1.0);
    REQUIRE(res.status == ProxStatus::solved);
    Eigen::VectorXd expect(3);
    expect << -1.0, 0.25, 1.0;
    CHECK((res.y - expect).lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("equality-only prox is an affine projection") {
    Xoshiro256ss rng(13, 0);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 4, m = 2;
        QpScenarioProblem p;
        p.n = n;
        p.A_eq = random_matrix(rng, m, n, -1.0, 1.0);
        p.b_eq = random_vector(rng, m, -1.0, 1.0);
        p.finalize();
        const Eigen::VectorXd v = random_vector(rng, n, -2.0, 2.0);
        ProxResult res = prox(p, v, 1.0);
        REQUIRE(res.status == ProxStatus::solved);
        const Eigen::MatrixXd AAt = p.A_eq * p.A_eq.transpose();
        const Eigen::VectorXd expect =
            v - p.A_eq.transpose() * AAt.ldlt().solve(p.A_eq * v - p.b_eq);
        CHECK((res.y - expect).lpNorm<Eigen::Infinity>() <= 1e-8);
    }
}

TEST_CASE("prox matches brute-force active-set enumeration") {
    Xoshiro256ss rng(17, 0);
    for (int rep = 0; rep < 50; ++rep) {
        QpScenarioProblem p = random_qp(rng, 3, 2);
        const Eigen::VectorXd v = random_vector(rng, 3, -2.0, 2.0);
        const double mu = 0.25 + 2.0 * rng.next_double();
        ProxResult res = prox(p, v, mu);
        REQUIRE(res.status == ProxStatus::solved);
        auto oracle = brute_force_qp(fold_prox(p, v, mu));
        REQUIRE(oracle.has_value());
        CHECK((res.y - *oracle).lpNorm<Eigen::Infinity>() <= 1e-7);
    }
}

TEST_CASE("infeasible subproblem is reported") {
    QpScenarioProblem p;
    p.n = 1;
    p.A_eq = Eigen::MatrixXd::Constant(1, 1, 1.0);
    p.b_eq = Eigen::VectorXd::Constant(1, 0.0);
    p.lower = Eigen::VectorXd::Constant(1, 1.0);  // x = 0 contradicts x >= 1
    p.finalize();
    ProxResult res = prox(p, Eigen::VectorXd::Zero(1), 1.0);
    CHECK(res.status == ProxStatus::infeasible);
}

TEST_CASE("warm-started repeat solve returns the same point") {
    Xoshiro256ss rng(29, 0);
    QpScenarioProblem p = random_qp(rng, 3, 2);
    const Eigen::VectorXd v = random_vector(rng, 3, -2.0, 2.0);
    ProxWorkspace ws;
    ProxResult cold = prox(p, v, 1.0, {}, &ws);
    ProxResult warm = prox(p, v, 1.0, {}, &ws);
    REQUIRE(cold.status == ProxStatus::solved);
    REQUIRE(warm.status == ProxStatus::solved);
    CHECK((cold.y - warm.y).lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("plain QP solve handles a vertex LP") {
    QpScenarioProblem p;
    p.n = 3;
    Eigen::VectorXd c(3);
    c << 1.0, -2.0, 0.5;
    p.c = c;
    p.lower = Eigen::VectorXd::Zero(3);
    p.upper = Eigen::VectorXd::Ones(3);
    p.finalize();
    ProxResult res = solve_qp(p);
    REQUIRE(res.status == ProxStatus::solved);
    Eigen::VectorXd expect(3);
    expect << 0.0, 1.0, 0.0;
    CHECK((res.y - expect).lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK(p.objective(res.y) == doctest::Approx(-2.0));
}

TEST_CASE("batch prox equals sequential calls") {
    Xoshiro256ss rng(31, 0);
    std::vector<QpScenarioProblem> problems;
    std::vector<Eigen::VectorXd> points;
    for (int i = 0; i < 4; ++i) {
        problems.push_back(random_qp(rng, 3, 2));
        points.push_back(random_vector(rng, 3, -2.0, 2.0));
    }
    auto batch = prox_batch(problems, points, 1.0);
    REQUIRE(batch.size() == 4);
    for (int i = 0; i < 4; ++i) {
        ProxResult single = prox(problems[i], points[i], 1.0);
        CHECK((batch[i].y - single.y).lpNorm<Eigen::Infinity>() == 0.0);
    }
}

TEST_CASE("prox is firmly nonexpansive") {
    Xoshiro256ss rng(37, 0);
    for (int rep = 0; rep < 100; ++rep) {
        QpScenarioProblem p = random_qp(rng, 3, 2);
        const Eigen::VectorXd u = random_vector(rng, 3, -3.0, 3.0);
        const Eigen::VectorXd v = random_vector(rng, 3, -3.0, 3.0);
        ProxResult ru = prox(p, u, 1.0);
        ProxResult rv = prox(p, v, 1.0);
        REQUIRE(ru.status == ProxStatus::solved);
        REQUIRE(rv.status == ProxStatus::solved);
        const Eigen::VectorXd d = ru.y - rv.y;
        CHECK(d.squaredNorm() <= d.dot(u - v) + 1e-8);
    }
}
