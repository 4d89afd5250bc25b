#pragma once

// Operator-level building blocks in the P-weighted geometry: reflected
// resolvents of the two operators behind scenario decomposition (the
// separable subproblem operator and the non-anticipativity projection),
// the Douglas-Rachford iteration, its single-scenario randomized form, and
// the delayed (stale-read) coordinate form. These double as the equivalence
// oracles for the solver implementations.

#include <vector>

#include "hedge/qp.hpp"
#include "hedge/scenario_tree.hpp"

namespace hedge {

struct SplittingState {
    IterateMatrix z;
    double mu = 1.0;
};

// O_B(z) = 2x - z with x the bundle-weighted average (projection onto W).
std::pair<IterateMatrix, IterateMatrix> reflected_resolvent_B(const IterateMatrix& z,
                                                              const ScenarioTree& tree);

// O_A(z) = 2y - z with row s of y the prox of scenario s at z^s.
std::pair<IterateMatrix, IterateMatrix> reflected_resolvent_A(
    const IterateMatrix& z, const std::vector<QpScenarioProblem>& problems, double mu,
    const ProxSettings& settings = {}, std::vector<ProxWorkspace>* workspaces = nullptr);

// z+ = (1/2) O_A(O_B(z)) + (1/2) z, evaluated literally.
SplittingState dr_step(const SplittingState& state, const ScenarioTree& tree,
                       const std::vector<QpScenarioProblem>& problems,
                       const ProxSettings& settings = {},
                       std::vector<ProxWorkspace>* workspaces = nullptr);

// Single-coordinate form: only row s changes, to the value the full step
// would give it. Uses the partial projection, so only one prox is solved.
SplittingState rdr_step(const SplittingState& state, const ScenarioTree& tree,
                        const std::vector<QpScenarioProblem>& problems, int s,
                        const ProxSettings& settings = {}, ProxWorkspace* workspace = nullptr);

// Delayed coordinate update: quantities are computed from stale_z (the
// reader's snapshot) and applied to the current z with stepsize scaling
// 2*eta/(S*q_s). stale_z == z with eta = S*q_s/2 recovers rdr_step.
SplittingState arock_step(const SplittingState& state, const IterateMatrix& stale_z, int s,
                          double eta, double q_s, const ScenarioTree& tree,
                          const std::vector<QpScenarioProblem>& problems,
                          const ProxSettings& settings = {}, ProxWorkspace* workspace = nullptr);

}  // namespace hedge
