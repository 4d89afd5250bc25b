#pragma once

// The four user-facing solvers over a scenario tree and per-scenario QP
// subproblems: the full-pass method (one prox per scenario per iteration,
// then projection and dual update), its single-scenario randomized form, the
// synchronous parallel batch form, and the asynchronous delayed form with a
// stepsize scaled by 2*eta/(S*q_s).

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "hedge/qp.hpp"
#include "hedge/rng.hpp"
#include "hedge/runtime.hpp"
#include "hedge/scenario_tree.hpp"

namespace hedge {

struct SamplingLaw {
    enum class Kind { uniform, proportional_to_p, explicit_q };
    Kind kind = Kind::uniform;
    Eigen::VectorXd q;  // used only for explicit_q

    static SamplingLaw uniform() { return {}; }
    static SamplingLaw proportional_to_p() { return {Kind::proportional_to_p, {}}; }
    static SamplingLaw explicit_law(Eigen::VectorXd q) {
        return {Kind::explicit_q, std::move(q)};
    }

    // Validated per-scenario draw probabilities for a given tree.
    Eigen::VectorXd resolve(const ScenarioTree& tree) const;
};

struct EtaRule {
    enum class Kind { unit, fixed, delay_bound };
    Kind kind = Kind::unit;
    double value = 1.0;  // fixed
    double c = 0.9;      // delay_bound: 0 < c < 1
    long tau = 0;        // delay_bound: assumed delay bound

    static EtaRule unit() { return {}; }
    static EtaRule fixed(double v) { return {Kind::fixed, v, 0.9, 0}; }
    // eta = c * S * q_min / (2 * tau * sqrt(q_min) + 1)
    static EtaRule delay_bound(double c, long tau) { return {Kind::delay_bound, 1.0, c, tau}; }

    double resolve(int S, double q_min) const;
};

struct StoppingRule {
    double max_time_s = 3600.0;
    long max_subproblems = 1000000;
    double eps_abs = 1e-8;
    double eps_rel = 1e-4;
};

struct AlgorithmConfig {
    double mu = 1.0;
    SamplingLaw sampling;
    EtaRule eta;
    int workers = 1;  // M, parallel/async only
    std::uint64_t seed = 0;
    StoppingRule stopping;
    double eps_sub = 1e-10;
    int residual_window = 0;  // randomized residual window in events; 0 -> S
    int metric_stride = 0;    // events between metric rows; 0 -> S
    PoolMode pool_mode = PoolMode::real;
    std::optional<SimSchedule> schedule;  // when set, time is simulated
    std::optional<IterateMatrix> x0;      // must lie in W; default zero
    std::vector<int> forced_draws;        // test hook, consumed before random draws

    void validate() const;
};

struct Reference {
    IterateMatrix x_star;
    double f_star = 0.0;
};

struct MetricsRow {
    double wall_time_s = 0.0;
    long iteration = 0;
    long n_subproblems = 0;
    double steplength = 0.0;
    std::optional<double> subopt_rel;
    std::optional<double> feas_err;
};

struct RunRecord {
    std::vector<MetricsRow> rows;
    IterateMatrix x_final;  // projected, lies in W
    IterateMatrix z_final;
    std::string termination;  // residual | max-time | max-subproblems | error:<detail>
    long n_subproblems = 0;
    long iterations = 0;
    double objective = 0.0;  // unconstrained objective at x_final
    DelayStats delays;       // populated by the asynchronous solver
};

// ||z_curr - z_prev||_F <= eps_abs + eps_rel * ||z_curr||_F
bool residual_stop(const IterateMatrix& z_prev, const IterateMatrix& z_curr, double eps_abs,
                   double eps_rel);

// (relative suboptimality, feasibility error). Suboptimality needs a
// reference objective; feasibility is the max over scenarios of
// ||yhat^s - x~^s|| for the scenarios whose last minimizer is known.
std::pair<std::optional<double>, std::optional<double>> run_metrics(
    const IterateMatrix& x_tilde, const std::vector<std::optional<Eigen::VectorXd>>& last_yhat,
    const std::vector<QpScenarioProblem>& problems, const ScenarioTree& tree,
    const Reference* reference);

RunRecord solve_ph(const std::vector<QpScenarioProblem>& problems, const ScenarioTree& tree,
                   const AlgorithmConfig& config, const Reference* reference = nullptr);
RunRecord solve_rph(const std::vector<QpScenarioProblem>& problems, const ScenarioTree& tree,
                    const AlgorithmConfig& config, const Reference* reference = nullptr);
RunRecord solve_rph_parallel(const std::vector<QpScenarioProblem>& problems,
                             const ScenarioTree& tree, const AlgorithmConfig& config,
                             const Reference* reference = nullptr);
RunRecord solve_rph_async(const std::vector<QpScenarioProblem>& problems, const ScenarioTree& tree,
                          const AlgorithmConfig& config, const Reference* reference = nullptr);

}  // namespace hedge
