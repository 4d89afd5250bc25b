#include "hedge/scenario_tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace hedge {

StageLayout::StageLayout(std::vector<int> dims) : stage_dims(std::move(dims)) {
    if (stage_dims.empty()) throw parse_error("StageLayout: need at least one stage");
    T = static_cast<int>(stage_dims.size());
    int begin = 0;
    for (int d : stage_dims) {
        if (d < 1) throw parse_error("StageLayout: stage dimensions must be positive");
        offsets.emplace_back(begin, begin + d);
        begin += d;
    }
    n = begin;
}

ScenarioTree::ScenarioTree(Eigen::VectorXd probabilities,
                           std::vector<std::vector<std::vector<int>>> partitions,
                           StageLayout layout)
    : S_(static_cast<int>(probabilities.size())),
      probabilities_(std::move(probabilities)),
      partitions_(std::move(partitions)),
      layout_(std::move(layout)) {
    if (S_ < 1) throw parse_error("ScenarioTree: empty probability vector");
    if (static_cast<int>(partitions_.size()) != layout_.T)
        throw parse_error("ScenarioTree: one partition per stage required");

    for (int s = 0; s < S_; ++s)
        if (!(probabilities_[s] > 0.0))
            throw parse_error("ScenarioTree: probabilities must be positive");
    const double total = probabilities_.sum();
    if (std::abs(total - 1.0) > 1e-12)
        throw parse_error("ScenarioTree: probabilities must sum to 1 within 1e-12");
    probabilities_ /= total;

    bundle_of_.assign(layout_.T, std::vector<int>(S_, -1));
    bundle_weight_.resize(layout_.T);
    for (int t = 0; t < layout_.T; ++t) {
        int covered = 0;
        for (int b = 0; b < static_cast<int>(partitions_[t].size()); ++b) {
            const auto& members = partitions_[t][b];
            if (members.empty()) throw parse_error("ScenarioTree: empty bundle");
            if (!std::is_sorted(members.begin(), members.end()))
                throw parse_error("ScenarioTree: bundle members must be sorted");
            double w = 0.0;
            for (int s : members) {
                if (s < 0 || s >= S_) throw parse_error("ScenarioTree: scenario index out of range");
                if (bundle_of_[t][s] != -1) throw parse_error("ScenarioTree: bundles overlap");
                bundle_of_[t][s] = b;
                w += probabilities_[s];
                ++covered;
            }
            bundle_weight_[t].push_back(w);
        }
        if (covered != S_) throw parse_error("ScenarioTree: partition does not cover all scenarios");
    }
    if (partitions_[0].size() != 1)
        throw parse_error("ScenarioTree: stage-1 partition must be the single bundle");
    // refinement: each stage-(t+1) bundle sits inside one stage-t bundle
    for (int t = 1; t < layout_.T; ++t) {
        for (const auto& members : partitions_[t]) {
            const int parent = bundle_of_[t - 1][members.front()];
            for (int s : members)
                if (bundle_of_[t - 1][s] != parent)
                    throw parse_error("ScenarioTree: partition at stage " + std::to_string(t + 1) +
                                      " does not refine the previous stage");
        }
    }
}

void ScenarioTree::check_dims(const IterateMatrix& z) const {
    if (z.rows() != S_ || z.cols() != layout_.n)
        throw runtime_fault("iterate matrix dimensions do not match the scenario tree");
}

IterateMatrix project_nonanticipative(const IterateMatrix& z, const ScenarioTree& tree) {
    tree.check_dims(z);
    const auto& layout = tree.layout();
    IterateMatrix x(z.rows(), z.cols());
    for (int t = 0; t < layout.T; ++t) {
        const auto [begin, end] = layout.offsets[t];
        const int width = end - begin;
        for (const auto& members : tree.partitions()[t]) {
            if (members.size() == 1) {  // exact: no weighted round-trip
                x.block(members[0], begin, 1, width) = z.block(members[0], begin, 1, width);
                continue;
            }
            Eigen::RowVectorXd avg = Eigen::RowVectorXd::Zero(width);
            double w = 0.0;
            for (int sigma : members) {
                avg += tree.probabilities()[sigma] * z.block(sigma, begin, 1, width);
                w += tree.probabilities()[sigma];
            }
            avg /= w;
            for (int sigma : members) x.block(sigma, begin, 1, width) = avg;
        }
    }
    return x;
}

Eigen::VectorXd project_scenario(const IterateMatrix& z, int s, const ScenarioTree& tree) {
    tree.check_dims(z);
    if (s < 0 || s >= tree.num_scenarios())
        throw runtime_fault("project_scenario: scenario index out of range");
    const auto& layout = tree.layout();
    Eigen::VectorXd row(layout.n);
    for (int t = 0; t < layout.T; ++t) {
        const auto [begin, end] = layout.offsets[t];
        const int width = end - begin;
        if (tree.bundle(s, t).size() == 1) {  // matches the full projection exactly
            row.segment(begin, width) = z.block(s, begin, 1, width).transpose();
            continue;
        }
        Eigen::RowVectorXd avg = Eigen::RowVectorXd::Zero(width);
        double w = 0.0;
        for (int sigma : tree.bundle(s, t)) {
            avg += tree.probabilities()[sigma] * z.block(sigma, begin, 1, width);
            w += tree.probabilities()[sigma];
        }
        avg /= w;
        row.segment(begin, width) = avg.transpose();
    }
    return row;
}

double p_inner(const IterateMatrix& a, const IterateMatrix& b, const ScenarioTree& tree) {
    tree.check_dims(a);
    tree.check_dims(b);
    double acc = 0.0;
    for (int s = 0; s < tree.num_scenarios(); ++s)
        acc += tree.probabilities()[s] * a.row(s).dot(b.row(s));
    return acc;
}

ScenarioTree binary_tree(int T, std::vector<int> stage_dims, const Eigen::VectorXd* probabilities) {
    if (T < 1) throw parse_error("binary_tree: T must be >= 1");
    if (T > 21) throw parse_error("binary_tree: scenario count 2^(T-1) exceeds the capacity limit");
    const int S = 1 << (T - 1);
    Eigen::VectorXd p;
    if (probabilities) {
        if (probabilities->size() != S) throw parse_error("binary_tree: probability vector size mismatch");
        p = *probabilities;
    } else {
        p = Eigen::VectorXd::Constant(S, 1.0 / S);
    }
    std::vector<std::vector<std::vector<int>>> partitions(T);
    for (int t = 0; t < T; ++t) {
        const int bundles = 1 << t;
        const int size = S / bundles;
        partitions[t].resize(bundles);
        for (int b = 0; b < bundles; ++b) {
            partitions[t][b].resize(size);
            for (int i = 0; i < size; ++i) partitions[t][b][i] = b * size + i;
        }
    }
    return ScenarioTree(std::move(p), std::move(partitions), StageLayout(std::move(stage_dims)));
}

}  // namespace hedge
