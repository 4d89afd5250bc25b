#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "hedge/io.hpp"
#include "oracles.hpp"

using namespace hedge;
using namespace hedge::testing;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("hedge_test_" + std::to_string(std::rand()) + std::to_string(std::rand()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("problem files round-trip bitwise") {
    Xoshiro256ss rng(41, 0);
    auto [tree, problems] = random_instance(rng, 3, 2, 2);
    // add some structure beyond boxes
    problems[0].A_eq = random_matrix(rng, 2, problems[0].n, -1.0, 1.0);
    problems[0].b_eq = random_vector(rng, 2, -1.0, 1.0);
    problems[1].upper[0] = kInf;
    problems[1].lower[1] = -kInf;

    const json doc = problem_to_json(tree, problems);
    auto [tree2, problems2] = problem_from_json(doc);
    CHECK((tree2.probabilities() - tree.probabilities()).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(tree2.partitions() == tree.partitions());
    REQUIRE(problems2.size() == problems.size());
    for (std::size_t i = 0; i < problems.size(); ++i) {
        CHECK((problems2[i].Q - problems[i].Q).lpNorm<Eigen::Infinity>() == 0.0);
        CHECK((problems2[i].c - problems[i].c).lpNorm<Eigen::Infinity>() == 0.0);
        CHECK((problems2[i].A_eq - problems[i].A_eq).lpNorm<Eigen::Infinity>() == 0.0);
        for (int j = 0; j < problems[i].n; ++j) {
            CHECK(problems2[i].lower[j] == problems[i].lower[j]);
            CHECK(problems2[i].upper[j] == problems[i].upper[j]);
        }
    }
    // text round-trip too
    const json reparsed = json::parse(doc.dump());
    auto [tree3, problems3] = problem_from_json(reparsed);
    CHECK((problems3[0].A_eq - problems[0].A_eq).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("hydro shorthand expands inside a problem file") {
    json doc;
    doc["version"] = 1;
    doc["hydro"] = {{"B", 1}, {"T", 3}, {"seed", 4}, {"p_dry", 0.5}};
    auto [tree, problems] = problem_from_json(doc);
    CHECK(tree.num_scenarios() == 4);
    CHECK(problems.size() == 4);
    CHECK(tree.probabilities()[0] == doctest::Approx(0.25));

    HydroParams p = hydro_params_from_json(doc["hydro"]);
    const json back = hydro_params_to_json(p);
    HydroParams p2 = hydro_params_from_json(back);
    CHECK((p.c_H - p2.c_H).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(p.p_dry == p2.p_dry);
}

TEST_CASE("malformed documents raise parse errors") {
    CHECK_THROWS_AS(problem_from_json(json{{"version", 99}}), Error);
    json doc;
    doc["version"] = 1;
    doc["layout"]["stage_dims"] = {1, 1};
    doc["tree"]["probabilities"] = {0.5, 0.5};
    doc["tree"]["partitions"] = json::array({json::array({json::array({0, 1})})});
    doc["scenarios"] = json::array();
    CHECK_THROWS_AS(problem_from_json(doc), Error);  // partition count mismatch
}

TEST_CASE("metrics csv is stable and parses back") {
    std::vector<MetricsRow> rows(2);
    rows[0].wall_time_s = 0.125;
    rows[0].iteration = 1;
    rows[0].n_subproblems = 4;
    rows[0].steplength = 0.5;
    rows[1].wall_time_s = 0.25;
    rows[1].iteration = 2;
    rows[1].n_subproblems = 8;
    rows[1].steplength = 1.0 / 3.0;
    rows[1].subopt_rel = 1e-7;
    rows[1].feas_err = 2e-9;

    const std::string text = metrics_csv(rows);
    CHECK(text == metrics_csv(rows));  // byte-stable
    CHECK(text.substr(0, text.find('\n')) ==
          "wall_time_s,iteration,n_subproblems,steplength,subopt_rel,feas_err");
    auto parsed = parse_metrics_csv(text);
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0].wall_time_s == rows[0].wall_time_s);
    CHECK_FALSE(parsed[0].subopt_rel.has_value());
    CHECK(parsed[1].steplength == rows[1].steplength);
    CHECK(parsed[1].subopt_rel.value() == 1e-7);
    CHECK(metrics_csv(parsed) == text);
    CHECK_THROWS_AS(parse_metrics_csv("bad header\n"), Error);
}

TEST_CASE("schedule files round-trip") {
    SimSchedule s;
    s.kind = "trace";
    s.trace = {5, 9};
    s.tick_seconds = 0.5;
    s.jitter_ticks = 2;
    s.seed = 77;
    SimSchedule back = schedule_from_json(schedule_to_json(s));
    CHECK(back.kind == s.kind);
    CHECK(back.trace == s.trace);
    CHECK(back.tick_seconds == s.tick_seconds);
    CHECK(back.jitter_ticks == s.jitter_ticks);
    CHECK(back.seed == s.seed);
    CHECK_THROWS_AS(schedule_from_json(json{{"tick_seconds", 0.0}}), Error);
}

TEST_CASE("content hash") {
    CHECK(fnv1a("") == 14695981039346656037ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(content_hash_hex("") == "cbf29ce484222325");
    CHECK(content_hash_hex("x") != content_hash_hex("y"));
}

TEST_CASE("reference cache computes once and reloads") {
    TempDir tmp;
    HydroParams params = HydroParams::random(1, 2, 2);
    auto [tree, problems] = build_hydro(params);
    const std::string path = (tmp.path / "problem.json").string();
    save_problem(path, tree, problems);

    Reference a = reference_for(path, tree, problems);
    // cache file appears next to the problem
    bool found = false;
    for (const auto& entry : std::filesystem::directory_iterator(tmp.path))
        if (entry.path().string().find(".ref.json") != std::string::npos) found = true;
    CHECK(found);
    Reference b = reference_for(path, tree, problems);
    CHECK(a.f_star == b.f_star);
    CHECK((a.x_star - b.x_star).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("quartile aggregation") {
    auto make_run = [](double scale) {
        std::vector<MetricsRow> run;
        for (int i = 1; i <= 10; ++i) {
            MetricsRow r;
            r.wall_time_s = 0.1 * i;
            r.iteration = i;
            r.n_subproblems = i;
            r.steplength = scale / i;
            run.push_back(r);
        }
        return run;
    };
    std::vector<std::vector<MetricsRow>> runs{make_run(1.0), make_run(2.0), make_run(3.0)};
    auto extract = +[](const MetricsRow& r) { return r.steplength; };
    auto rows = aggregate_runs(runs, extract, 8);
    REQUIRE(!rows.empty());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].q1 <= rows[i].med);
        CHECK(rows[i].med <= rows[i].q3);
        CHECK(rows[i].n == 3);
        if (i > 0) CHECK(rows[i].t > rows[i - 1].t);
    }
    // single run: quartiles collapse to the carried-forward value
    std::vector<std::vector<MetricsRow>> one{make_run(1.0)};
    auto single = aggregate_runs(one, extract, 4);
    for (const auto& r : single) {
        CHECK(r.q1 == r.med);
        CHECK(r.med == r.q3);
        CHECK(r.n == 1);
    }
    const std::string csv = quartiles_csv(rows, "steplength");
    CHECK(csv.substr(0, csv.find('\n')) == "t,steplength_q1,steplength_med,steplength_q3,n");
}
