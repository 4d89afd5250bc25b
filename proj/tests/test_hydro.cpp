#include <doctest.h>

#include "hedge/hydro.hpp"
#include "oracles.hpp"

using namespace hedge;
using namespace hedge::testing;

TEST_CASE("parameter validation") {
    HydroParams p = HydroParams::random(2, 3, 1);
    CHECK_NOTHROW(p.validate());
    HydroParams bad = p;
    bad.p_dry = 1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = p;
    bad.c_H = Eigen::VectorXd::Ones(3);
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = p;
    bad.W_1 = p.W_cap * 2.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = p;
    bad.c_E = -1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    CHECK_THROWS_AS(HydroParams::random(0, 3, 1), Error);
}

TEST_CASE("generated family is deterministic in the seed") {
    HydroParams a = HydroParams::random(2, 4, 7);
    HydroParams b = HydroParams::random(2, 4, 7);
    HydroParams c = HydroParams::random(2, 4, 8);
    CHECK((a.c_H - b.c_H).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(a.p_dry == b.p_dry);
    CHECK((a.c_H - c.c_H).lpNorm<Eigen::Infinity>() > 0.0);
}

TEST_CASE("instance structure") {
    const int B = 2, T = 4;
    HydroParams params = HydroParams::random(B, T, 3);
    auto [tree, problems] = build_hydro(params);
    const int S = 1 << (T - 1);
    CHECK(tree.num_scenarios() == S);
    CHECK(tree.num_stages() == T);
    CHECK(tree.layout().n == (2 * B + 1) * T);
    REQUIRE(static_cast<int>(problems.size()) == S);
    for (const auto& p : problems) {
        CHECK(p.num_eq() == B * T);
        CHECK(p.num_in() == T + B * T);
        CHECK((p.lower.array() == 0.0).all());
        CHECK((p.upper.array() == kInf).all());
    }
    // path probabilities multiply branch probabilities and sum to one
    CHECK(tree.probabilities().sum() == doctest::Approx(1.0));
    CHECK(tree.probabilities()[0] ==
          doctest::Approx(std::pow(params.p_dry, T - 1)));  // all-dry path
    CHECK(tree.probabilities()[S - 1] == doctest::Approx(std::pow(1.0 - params.p_dry, T - 1)));
}

TEST_CASE("inflows agree within bundles") {
    const int B = 2, T = 4;
    auto [tree, problems] = build_hydro(HydroParams::random(B, T, 11));
    for (int t = 0; t < T; ++t) {
        for (const auto& members : tree.partitions()[t]) {
            const int lead = members.front();
            for (int s : members) {
                // equality right-hand sides up to stage t are bundle-determined
                for (int row = 0; row < B * (t + 1); ++row)
                    CHECK(problems[s].b_eq[row] == problems[lead].b_eq[row]);
            }
        }
    }
}

TEST_CASE("single-stage instance is deterministic") {
    HydroParams params = HydroParams::random(2, 1, 5);
    auto [tree, problems] = build_hydro(params);
    CHECK(tree.num_scenarios() == 1);
    CHECK(problems.size() == 1);
    auto [x_star, f_star] = extensive_form(tree, problems);
    ProxSettings settings;
    settings.tol = 1e-10;
    settings.max_iterations = 200000;
    ProxResult direct = solve_qp(problems[0], settings);
    REQUIRE(direct.status == ProxStatus::solved);
    CHECK(std::abs(problems[0].objective(direct.y) - f_star) <=
          1e-7 * (1.0 + std::abs(f_star)));
}

TEST_CASE("deterministic-equivalent solve matches a hand-built node formulation") {
    // B=1, T=2: nodes are one stage-1 block (q1,y1,e1) and two stage-2 blocks.
    HydroParams params = HydroParams::random(1, 2, 17);
    params.quad_reg = 0.05;  // strictly convex so the enumeration oracle applies
    auto [tree, problems] = build_hydro(params);
    auto [x_star, f_star] = extensive_form(tree, problems);

    const double p_dry = params.p_dry;
    QpScenarioProblem node;
    node.n = 9;  // (q1,y1,e1, q2d,y2d,e2d, q2w,y2w,e2w)
    node.Q = 2.0 * params.quad_reg *
             (Eigen::VectorXd(9) << 1, 1, 1, p_dry, p_dry, p_dry, 1 - p_dry, 1 - p_dry,
              1 - p_dry)
                 .finished()
                 .asDiagonal();
    node.c = Eigen::VectorXd::Zero(9);
    node.c[1] = params.c_H[0];
    node.c[2] = params.c_E;
    node.c[4] = p_dry * params.c_H[1];
    node.c[5] = p_dry * params.c_E;
    node.c[7] = (1 - p_dry) * params.c_H[1];
    node.c[8] = (1 - p_dry) * params.c_E;
    node.A_eq = Eigen::MatrixXd::Zero(3, 9);
    node.b_eq = Eigen::VectorXd::Zero(3);
    node.A_eq(0, 0) = 1;
    node.A_eq(0, 1) = 1;
    node.b_eq[0] = params.W_1[0];
    node.A_eq(1, 3) = 1;
    node.A_eq(1, 4) = 1;
    node.A_eq(1, 0) = -1;
    node.b_eq[1] = params.r_dry[0];
    node.A_eq(2, 6) = 1;
    node.A_eq(2, 7) = 1;
    node.A_eq(2, 0) = -1;
    node.b_eq[2] = params.r_wet[0];
    node.A_in = Eigen::MatrixXd::Zero(6, 9);
    node.b_in = Eigen::VectorXd::Zero(6);
    // demand rows (>= flipped to <=)
    node.A_in(0, 1) = -1;
    node.A_in(0, 2) = -1;
    node.b_in[0] = -params.D[0];
    node.A_in(1, 4) = -1;
    node.A_in(1, 5) = -1;
    node.b_in[1] = -params.D[1];
    node.A_in(2, 7) = -1;
    node.A_in(2, 8) = -1;
    node.b_in[2] = -params.D[1];
    // capacity rows
    node.A_in(3, 0) = 1;
    node.b_in[3] = params.W_cap[0];
    node.A_in(4, 3) = 1;
    node.b_in[4] = params.W_cap[0];
    node.A_in(5, 6) = 1;
    node.b_in[5] = params.W_cap[0];
    node.lower = Eigen::VectorXd::Zero(9);
    node.finalize();

    auto oracle = brute_force_qp(node, 1e-7);
    REQUIRE(oracle.has_value());
    const Eigen::VectorXd& y = *oracle;
    const double f_oracle = 0.5 * y.dot(node.Q * y) + node.c.dot(y);
    // f_star includes the quadratic regularization through problems' Q
    double f_star_full = 0.0;
    for (int s = 0; s < tree.num_scenarios(); ++s)
        f_star_full +=
            tree.probabilities()[s] * problems[s].objective(x_star.row(s).transpose());
    CHECK(std::abs(f_star_full - f_oracle) <= 1e-5 * (1.0 + std::abs(f_oracle)));

    // expanded solution agrees blockwise with the node solution
    CHECK((x_star.row(0).head(3).transpose() - y.head(3)).lpNorm<Eigen::Infinity>() <= 1e-4);
    CHECK((x_star.row(0).tail(3).transpose() - y.segment(3, 3)).lpNorm<Eigen::Infinity>() <= 1e-4);
    CHECK((x_star.row(1).tail(3).transpose() - y.tail(3)).lpNorm<Eigen::Infinity>() <= 1e-4);
}

TEST_CASE("deterministic-equivalent solution is non-anticipative and optimal over W") {
    HydroParams params = HydroParams::random(2, 3, 23);
    auto [tree, problems] = build_hydro(params);
    auto [x_star, f_star] = extensive_form(tree, problems);
    CHECK((project_nonanticipative(x_star, tree) - x_star).lpNorm<Eigen::Infinity>() <= 1e-12);

    // a feasible competitor in W: keep no water flowing, buy everything
    const int B = params.B, T = params.T, nt = 2 * B + 1;
    IterateMatrix comp = IterateMatrix::Zero(tree.num_scenarios(), tree.layout().n);
    double f_comp = 0.0;
    for (int s = 0; s < tree.num_scenarios(); ++s) {
        Eigen::VectorXd q = params.W_1;
        for (int t = 0; t < T; ++t) {
            if (t > 0) {
                const int wet = (s >> (T - 1 - t)) & 1;
                q += wet ? params.r_wet : params.r_dry;
            }
            // spill is not modeled; turbine any overflow to stay within W_cap
            Eigen::VectorXd y = (q - params.W_cap).cwiseMax(0.0);
            q -= y;
            comp.block(s, t * nt, 1, B) = q.transpose();
            comp.block(s, t * nt + B, 1, B) = y.transpose();
            const double need = std::max(params.D[t] - y.sum(), 0.0);
            comp(s, t * nt + 2 * B) = need;
        }
        f_comp += tree.probabilities()[s] * problems[s].objective(comp.row(s).transpose());
    }
    CHECK((project_nonanticipative(comp, tree) - comp).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK(f_star <= f_comp + 1e-8 * (1.0 + std::abs(f_comp)));
}
