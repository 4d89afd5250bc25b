#include "hedge/splitting.hpp"

namespace hedge {

namespace {

void check_problems(const ScenarioTree& tree, const std::vector<QpScenarioProblem>& problems) {
    if (static_cast<int>(problems.size()) != tree.num_scenarios())
        throw runtime_fault("splitting: one scenario problem per scenario required");
}

}  // namespace

std::pair<IterateMatrix, IterateMatrix> reflected_resolvent_B(const IterateMatrix& z,
                                                              const ScenarioTree& tree) {
    IterateMatrix x = project_nonanticipative(z, tree);
    IterateMatrix reflected = 2.0 * x - z;
    return {std::move(x), std::move(reflected)};
}

std::pair<IterateMatrix, IterateMatrix> reflected_resolvent_A(
    const IterateMatrix& z, const std::vector<QpScenarioProblem>& problems, double mu,
    const ProxSettings& settings, std::vector<ProxWorkspace>* workspaces) {
    IterateMatrix y(z.rows(), z.cols());
    for (int s = 0; s < z.rows(); ++s) {
        ProxResult res = prox(problems[s], z.row(s).transpose(), mu, settings,
                              workspaces ? &(*workspaces)[s] : nullptr);
        if (res.status == ProxStatus::infeasible)
            throw infeasible_error("scenario " + std::to_string(s) + " subproblem infeasible");
        if (res.status != ProxStatus::solved)
            throw numerical_error("scenario " + std::to_string(s) +
                                  " prox did not converge (residual " +
                                  std::to_string(res.primal_residual) + ")");
        y.row(s) = res.y.transpose();
    }
    IterateMatrix reflected = 2.0 * y - z;
    return {std::move(y), std::move(reflected)};
}

SplittingState dr_step(const SplittingState& state, const ScenarioTree& tree,
                       const std::vector<QpScenarioProblem>& problems,
                       const ProxSettings& settings, std::vector<ProxWorkspace>* workspaces) {
    check_problems(tree, problems);
    tree.check_dims(state.z);
    auto [x, refB] = reflected_resolvent_B(state.z, tree);
    auto [y, refA] = reflected_resolvent_A(refB, problems, state.mu, settings, workspaces);
    SplittingState next;
    next.mu = state.mu;
    next.z = 0.5 * refA + 0.5 * state.z;
    return next;
}

SplittingState rdr_step(const SplittingState& state, const ScenarioTree& tree,
                        const std::vector<QpScenarioProblem>& problems, int s,
                        const ProxSettings& settings, ProxWorkspace* workspace) {
    check_problems(tree, problems);
    tree.check_dims(state.z);
    if (s < 0 || s >= tree.num_scenarios()) throw runtime_fault("rdr_step: scenario out of range");

    const Eigen::VectorXd x_s = project_scenario(state.z, s, tree);
    const Eigen::VectorXd anchor = 2.0 * x_s - state.z.row(s).transpose();
    ProxResult res = prox(problems[s], anchor, state.mu, settings, workspace);
    if (res.status == ProxStatus::infeasible)
        throw infeasible_error("scenario " + std::to_string(s) + " subproblem infeasible");
    if (res.status != ProxStatus::solved)
        throw numerical_error("scenario " + std::to_string(s) + " prox did not converge");

    SplittingState next;
    next.mu = state.mu;
    next.z = state.z;
    // pruned form of (1/2)[O_A(O_B(z))]^s + (1/2) z^s
    next.z.row(s) += (res.y - x_s).transpose();
    return next;
}

SplittingState arock_step(const SplittingState& state, const IterateMatrix& stale_z, int s,
                          double eta, double q_s, const ScenarioTree& tree,
                          const std::vector<QpScenarioProblem>& problems,
                          const ProxSettings& settings, ProxWorkspace* workspace) {
    check_problems(tree, problems);
    tree.check_dims(state.z);
    tree.check_dims(stale_z);
    if (!(eta > 0.0) || !(q_s > 0.0)) throw runtime_fault("arock_step: eta and q_s must be positive");
    if (s < 0 || s >= tree.num_scenarios()) throw runtime_fault("arock_step: scenario out of range");

    const Eigen::VectorXd x_s = project_scenario(stale_z, s, tree);
    const Eigen::VectorXd anchor = 2.0 * x_s - stale_z.row(s).transpose();
    ProxResult res = prox(problems[s], anchor, state.mu, settings, workspace);
    if (res.status == ProxStatus::infeasible)
        throw infeasible_error("scenario " + std::to_string(s) + " subproblem infeasible");
    if (res.status != ProxStatus::solved)
        throw numerical_error("scenario " + std::to_string(s) + " prox did not converge");

    const double factor = 2.0 * eta / (tree.num_scenarios() * q_s);
    SplittingState next;
    next.mu = state.mu;
    next.z = state.z;
    next.z.row(s) += factor * (res.y - x_s).transpose();
    return next;
}

}  // namespace hedge
