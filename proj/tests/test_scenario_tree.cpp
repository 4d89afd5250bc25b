#include <doctest.h>

#include "hedge/scenario_tree.hpp"
#include "oracles.hpp"

using namespace hedge;
using namespace hedge::testing;

TEST_CASE("stage layout offsets") {
    StageLayout layout({2, 3, 1});
    CHECK(layout.n == 6);
    CHECK(layout.T == 3);
    CHECK(layout.offsets[0] == std::pair<int, int>{0, 2});
    CHECK(layout.offsets[1] == std::pair<int, int>{2, 5});
    CHECK(layout.offsets[2] == std::pair<int, int>{5, 6});
    CHECK_THROWS_AS(StageLayout({2, 0}), Error);
    CHECK_THROWS_AS(StageLayout(std::vector<int>{}), Error);
}

TEST_CASE("binary tree structure") {
    ScenarioTree tree = binary_tree(4, {2, 2, 2, 2});
    CHECK(tree.num_scenarios() == 8);
    CHECK(tree.num_stages() == 4);
    for (int t = 0; t < 4; ++t) {
        CHECK(static_cast<int>(tree.partitions()[t].size()) == (1 << t));
        for (int s = 0; s < 8; ++s) CHECK(tree.bundle_id(s, t) == (s >> (3 - t)));
    }
    for (int s = 0; s < 8; ++s) CHECK(tree.probabilities()[s] == doctest::Approx(1.0 / 8));
    CHECK(tree.bundle_weight(0, 1) == doctest::Approx(0.5));
    CHECK_THROWS_AS(binary_tree(0, {1}), Error);
    CHECK_THROWS_AS(binary_tree(25, std::vector<int>(25, 1)), Error);
}

TEST_CASE("tree validation rejects malformed input") {
    StageLayout layout({1, 1});
    Eigen::VectorXd p(2);
    p << 0.5, 0.5;
    std::vector<std::vector<std::vector<int>>> good = {{{0, 1}}, {{0}, {1}}};

    Eigen::VectorXd bad_sum(2);
    bad_sum << 0.5, 0.6;
    CHECK_THROWS_AS(ScenarioTree(bad_sum, good, layout), Error);
    Eigen::VectorXd negative(2);
    negative << 1.5, -0.5;
    CHECK_THROWS_AS(ScenarioTree(negative, good, layout), Error);
    // stage 1 must be one bundle
    CHECK_THROWS_AS(ScenarioTree(p, {{{0}, {1}}, {{0}, {1}}}, layout), Error);
    // unsorted bundle
    CHECK_THROWS_AS(ScenarioTree(p, {{{1, 0}}, {{0}, {1}}}, layout), Error);
    // missing scenario
    CHECK_THROWS_AS(ScenarioTree(p, {{{0, 1}}, {{0}}}, layout), Error);
    // overlap
    CHECK_THROWS_AS(ScenarioTree(p, {{{0, 1}}, {{0, 1}, {1}}}, layout), Error);
    // non-refining partition
    StageLayout layout3({1, 1, 1});
    Eigen::VectorXd p4 = Eigen::VectorXd::Constant(4, 0.25);
    std::vector<std::vector<std::vector<int>>> non_refining = {
        {{0, 1, 2, 3}}, {{0, 1}, {2, 3}}, {{0}, {1, 2}, {3}}};
    CHECK_THROWS_AS(ScenarioTree(p4, non_refining, layout3), Error);
}

TEST_CASE("projection matches the dense least-squares oracle") {
    Xoshiro256ss rng(101, 0);
    for (int rep = 0; rep < 100; ++rep) {
        auto [tree, problems] = random_instance(rng, 3, 2, 2);  // 4 scenarios, n = 6
        IterateMatrix z = random_matrix(rng, tree.num_scenarios(), tree.layout().n, -3.0, 3.0);
        const IterateMatrix x = project_nonanticipative(z, tree);
        const IterateMatrix oracle = projection_oracle(z, tree);
        CHECK((x - oracle).lpNorm<Eigen::Infinity>() <= 1e-9);
    }
}

TEST_CASE("projection is idempotent and P-orthogonal") {
    Xoshiro256ss rng(7, 0);
    for (int rep = 0; rep < 50; ++rep) {
        auto [tree, problems] = random_instance(rng, 3, 2, 2);
        IterateMatrix z = random_matrix(rng, tree.num_scenarios(), tree.layout().n, -3.0, 3.0);
        const IterateMatrix x = project_nonanticipative(z, tree);
        const IterateMatrix xx = project_nonanticipative(x, tree);
        CHECK((xx - x).lpNorm<Eigen::Infinity>() <= 1e-10);
        // residual is P-orthogonal to every element of W; test on projections
        IterateMatrix y = project_nonanticipative(
            random_matrix(rng, tree.num_scenarios(), tree.layout().n, -3.0, 3.0), tree);
        CHECK(std::abs(p_inner(z - x, y, tree)) <= 1e-10);
    }
}

TEST_CASE("row projection agrees with the full projection bitwise") {
    Xoshiro256ss rng(55, 0);
    for (int rep = 0; rep < 20; ++rep) {
        auto [tree, problems] = random_instance(rng, 3, 2, 2);
        IterateMatrix z = random_matrix(rng, tree.num_scenarios(), tree.layout().n, -3.0, 3.0);
        const IterateMatrix full = project_nonanticipative(z, tree);
        for (int s = 0; s < tree.num_scenarios(); ++s) {
            const Eigen::VectorXd row = project_scenario(z, s, tree);
            for (int j = 0; j < tree.layout().n; ++j) CHECK(row[j] == full(s, j));
        }
    }
}

TEST_CASE("leaf-stage blocks pass through exactly") {
    Xoshiro256ss rng(91, 0);
    ScenarioTree tree = binary_tree(3, {2, 2, 2});
    IterateMatrix z = random_matrix(rng, tree.num_scenarios(), tree.layout().n, -3.0, 3.0);
    const IterateMatrix x = project_nonanticipative(z, tree);
    const auto [begin, end] = tree.layout().offsets[2];
    for (int s = 0; s < tree.num_scenarios(); ++s)
        for (int j = begin; j < end; ++j) CHECK(x(s, j) == z(s, j));
}

TEST_CASE("weighted inner product and norm") {
    ScenarioTree tree = binary_tree(2, {1, 1});
    IterateMatrix a(2, 2), b(2, 2);
    a << 1, 2, 3, 4;
    b << 5, 6, 7, 8;
    // 0.5*(1*5 + 2*6) + 0.5*(3*7 + 4*8)
    CHECK(p_inner(a, b, tree) == doctest::Approx(0.5 * 17 + 0.5 * 53));
    CHECK(p_norm(a, tree) == doctest::Approx(std::sqrt(0.5 * 5 + 0.5 * 25)));
    IterateMatrix wrong(3, 2);
    CHECK_THROWS_AS(p_inner(wrong, wrong, tree), Error);
}
