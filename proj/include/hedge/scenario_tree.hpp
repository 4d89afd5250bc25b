#pragma once

// Scenario tree with per-stage bundle partitions, probability weights, and
// the projection onto the non-anticipativity subspace W (rows of a scenario
// matrix must agree within every bundle at every stage). The projection is a
// probability-weighted bundle average, orthogonal in the P = diag(p) weighted
// inner product.

#include <Eigen/Dense>
#include <vector>

#include "hedge/error.hpp"

namespace hedge {

// Row s holds the full decision vector of scenario s; columns are grouped by
// stage according to a StageLayout.
using IterateMatrix = Eigen::MatrixXd;

struct StageLayout {
    std::vector<int> stage_dims;               // n_1, ..., n_T
    std::vector<std::pair<int, int>> offsets;  // half-open [begin, end) per stage
    int n = 0;                                 // sum of stage_dims
    int T = 0;

    StageLayout() = default;
    explicit StageLayout(std::vector<int> dims);
};

class ScenarioTree {
public:
    // partitions[t] is the list of bundles at stage t (0-based); each bundle
    // is a sorted list of scenario indices. Stage 0 must be the single bundle
    // {0..S-1} and each later stage must refine the previous one.
    // Probabilities must be positive and sum to 1 within 1e-12; they are
    // renormalized exactly so bundle averages are idempotent.
    ScenarioTree(Eigen::VectorXd probabilities,
                 std::vector<std::vector<std::vector<int>>> partitions,
                 StageLayout layout);

    int num_scenarios() const { return S_; }
    int num_stages() const { return layout_.T; }
    const StageLayout& layout() const { return layout_; }
    const Eigen::VectorXd& probabilities() const { return probabilities_; }
    const std::vector<std::vector<std::vector<int>>>& partitions() const { return partitions_; }

    // The unique bundle at stage t containing scenario s.
    const std::vector<int>& bundle(int s, int t) const {
        return partitions_[t][bundle_of_[t][s]];
    }
    double bundle_weight(int s, int t) const { return bundle_weight_[t][bundle_of_[t][s]]; }
    int bundle_id(int s, int t) const { return bundle_of_[t][s]; }

    void check_dims(const IterateMatrix& z) const;

private:
    int S_;
    Eigen::VectorXd probabilities_;
    std::vector<std::vector<std::vector<int>>> partitions_;
    std::vector<std::vector<int>> bundle_of_;        // [stage][scenario] -> bundle id
    std::vector<std::vector<double>> bundle_weight_; // [stage][bundle] -> sum of p
    StageLayout layout_;
};

// Orthogonal projection of z onto W in the P-weighted inner product:
// x_t^s = (sum_{sigma in B(s,t)} p_sigma z_t^sigma) / (sum p_sigma).
IterateMatrix project_nonanticipative(const IterateMatrix& z, const ScenarioTree& tree);

// Row s of project_nonanticipative(z) without touching the other rows.
// Summation order over a bundle matches the full projection exactly.
Eigen::VectorXd project_scenario(const IterateMatrix& z, int s, const ScenarioTree& tree);

// <a, b>_P = sum_s p_s <a^s, b^s>
double p_inner(const IterateMatrix& a, const IterateMatrix& b, const ScenarioTree& tree);

inline double p_norm(const IterateMatrix& a, const ScenarioTree& tree) {
    return std::sqrt(p_inner(a, a, tree));
}

// Balanced binary tree: S = 2^(T-1) scenarios, stage t has 2^(t-1) equal
// bundles. Scenario s belongs at stage t (1-based) to bundle s >> (T-t).
// Probabilities are uniform when not supplied.
ScenarioTree binary_tree(int T, std::vector<int> stage_dims,
                         const Eigen::VectorXd* probabilities = nullptr);

}  // namespace hedge
