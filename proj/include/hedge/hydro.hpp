#pragma once

// Hydro-thermal scheduling benchmark family. Each scenario decides, per
// stage, the water kept in each dam (q), the water turbined per dam (y) and
// the external electricity bought (e); costs are linear, water balances are
// equalities, demand and dam capacity are inequalities, and uncertainty is a
// binary dry/wet inflow branch per stage.

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "hedge/qp.hpp"
#include "hedge/scenario_tree.hpp"

namespace hedge {

struct HydroParams {
    int B = 1;             // dams
    int T = 2;             // stages; S = 2^(T-1)
    Eigen::VectorXd c_H;   // hydro production cost, length B*T (stage-major)
    double c_E = 8.0;      // external electricity unit cost
    Eigen::VectorXd D;     // demand per stage, length T
    Eigen::VectorXd W_cap; // max water per dam, length B
    Eigen::VectorXd W_1;   // initial water per dam, length B
    Eigen::VectorXd r_dry; // inflow per dam on the dry branch, length B
    Eigen::VectorXd r_wet; // inflow per dam on the wet branch, length B
    double p_dry = 0.4;    // probability of the dry branch at every split
    double quad_reg = 0.0; // optional diagonal quadratic term, makes x* unique
    std::uint64_t seed = 0;

    // Coefficients drawn from seeded uniform ranges; fully determined by
    // (B, T, seed).
    static HydroParams random(int B, int T, std::uint64_t seed);

    void validate() const;
};

// Binary scenario tree plus one QP per scenario. Per stage the variable
// block is (q_t in R^B, y_t in R^B, e_t); the dry/wet branch taken at stage
// t by scenario s is bit (T - t) of s, zero meaning dry.
std::pair<ScenarioTree, std::vector<QpScenarioProblem>> build_hydro(const HydroParams& params);

// Deterministic-equivalent solve over node variables (one block per tree
// node, so the result lies in the non-anticipativity subspace exactly).
// Returns the expanded S x n solution and the probability-weighted optimal
// objective. Works for any tree/problem list, not just hydro instances.
std::pair<IterateMatrix, double> extensive_form(const ScenarioTree& tree,
                                                const std::vector<QpScenarioProblem>& problems,
                                                double tol = 1e-10);

}  // namespace hedge
