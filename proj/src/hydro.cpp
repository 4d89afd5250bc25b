#include "hedge/hydro.hpp"

#include <cstring>
#include <map>
#include <string>

#include "hedge/rng.hpp"

namespace hedge {

namespace {

double uniform_in(Xoshiro256ss& rng, double lo, double hi) {
    return lo + (hi - lo) * rng.next_double();
}

}  // namespace

HydroParams HydroParams::random(int B, int T, std::uint64_t seed) {
    if (B < 1 || T < 1) throw parse_error("HydroParams: B and T must be at least 1");
    Xoshiro256ss rng(seed, 0);
    HydroParams p;
    p.B = B;
    p.T = T;
    p.seed = seed;
    p.c_H.resize(B * T);
    for (int i = 0; i < B * T; ++i) p.c_H[i] = uniform_in(rng, 1.0, 3.0);
    p.c_E = uniform_in(rng, 6.0, 12.0);
    p.D.resize(T);
    for (int t = 0; t < T; ++t) p.D[t] = uniform_in(rng, 0.8 * B, 1.8 * B);
    p.W_cap.resize(B);
    p.W_1.resize(B);
    p.r_dry.resize(B);
    p.r_wet.resize(B);
    for (int b = 0; b < B; ++b) {
        p.W_cap[b] = uniform_in(rng, 8.0, 12.0);
        p.W_1[b] = p.W_cap[b] * uniform_in(rng, 0.3, 0.8);
        p.r_dry[b] = uniform_in(rng, 0.2, 0.8);
        p.r_wet[b] = p.r_dry[b] + uniform_in(rng, 0.5, 1.5);
    }
    p.p_dry = uniform_in(rng, 0.3, 0.7);
    return p;
}

void HydroParams::validate() const {
    if (B < 1 || T < 1) throw parse_error("HydroParams: B and T must be at least 1");
    if (c_H.size() != static_cast<long>(B) * T) throw parse_error("HydroParams: c_H must have B*T entries");
    if (D.size() != T) throw parse_error("HydroParams: D must have T entries");
    if (W_cap.size() != B || W_1.size() != B || r_dry.size() != B || r_wet.size() != B)
        throw parse_error("HydroParams: per-dam vectors must have B entries");
    if (!(p_dry > 0.0 && p_dry < 1.0)) throw parse_error("HydroParams: p_dry must lie in (0,1)");
    if (quad_reg < 0.0) throw parse_error("HydroParams: quad_reg must be nonnegative");
    auto nonneg = [](const Eigen::VectorXd& v) { return (v.array() >= 0.0).all(); };
    if (!nonneg(c_H) || !nonneg(D) || !nonneg(W_cap) || !nonneg(W_1) || !nonneg(r_dry) ||
        !nonneg(r_wet) || c_E < 0.0)
        throw parse_error("HydroParams: all coefficients must be nonnegative");
    if (!((W_1.array() <= W_cap.array()).all()))
        throw parse_error("HydroParams: W_1 must not exceed W_cap");
}

std::pair<ScenarioTree, std::vector<QpScenarioProblem>> build_hydro(const HydroParams& params) {
    params.validate();
    const int B = params.B;
    const int T = params.T;
    const int S = T >= 1 ? (1 << (T - 1)) : 1;
    const int nt = 2 * B + 1;  // (q_t, y_t, e_t)
    const int n = nt * T;

    Eigen::VectorXd probs(S);
    for (int s = 0; s < S; ++s) {
        double p = 1.0;
        for (int t = 2; t <= T; ++t) {
            const int wet = (s >> (T - t)) & 1;
            p *= wet ? (1.0 - params.p_dry) : params.p_dry;
        }
        probs[s] = p;
    }
    ScenarioTree tree = binary_tree(T, std::vector<int>(T, nt), &probs);

    std::vector<QpScenarioProblem> problems;
    problems.reserve(S);
    for (int s = 0; s < S; ++s) {
        QpScenarioProblem p;
        p.n = n;
        p.c = Eigen::VectorXd::Zero(n);
        if (params.quad_reg > 0.0)
            p.Q = 2.0 * params.quad_reg * Eigen::MatrixXd::Identity(n, n);
        p.A_eq = Eigen::MatrixXd::Zero(B * T, n);
        p.b_eq = Eigen::VectorXd::Zero(B * T);
        p.A_in = Eigen::MatrixXd::Zero(T + B * T, n);
        p.b_in = Eigen::VectorXd::Zero(T + B * T);
        p.lower = Eigen::VectorXd::Zero(n);
        p.upper = Eigen::VectorXd::Constant(n, kInf);

        for (int t = 0; t < T; ++t) {
            const int off = t * nt;      // stage block start
            const int q0 = off;          // q_t
            const int y0 = off + B;      // y_t
            const int e0 = off + 2 * B;  // e_t

            for (int b = 0; b < B; ++b) p.c[y0 + b] = params.c_H[t * B + b];
            p.c[e0] = params.c_E;

            // water balance: q_1 + y_1 = W_1; q_t - q_{t-1} + y_t = inflow
            for (int b = 0; b < B; ++b) {
                const int row = t * B + b;
                p.A_eq(row, q0 + b) = 1.0;
                p.A_eq(row, y0 + b) = 1.0;
                if (t == 0) {
                    p.b_eq[row] = params.W_1[b];
                } else {
                    p.A_eq(row, (t - 1) * nt + b) = -1.0;
                    const int wet = (s >> (T - 1 - t)) & 1;
                    p.b_eq[row] = wet ? params.r_wet[b] : params.r_dry[b];
                }
            }

            // demand: sum_b y_t^b + e_t >= D_t
            for (int b = 0; b < B; ++b) p.A_in(t, y0 + b) = -1.0;
            p.A_in(t, e0) = -1.0;
            p.b_in[t] = -params.D[t];

            // capacity: q_t <= W_cap
            for (int b = 0; b < B; ++b) {
                const int row = T + t * B + b;
                p.A_in(row, q0 + b) = 1.0;
                p.b_in[row] = params.W_cap[b];
            }
        }
        p.finalize();
        problems.push_back(std::move(p));
    }
    return {std::move(tree), std::move(problems)};
}

namespace {

// Exact binary key for a mapped constraint row, used to drop the copies a
// shared node receives from every scenario in its bundle.
std::string row_key(const std::map<int, double>& coeffs, double rhs) {
    std::string key;
    key.reserve(coeffs.size() * 12 + 8);
    auto push_bits = [&key](double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        key.append(reinterpret_cast<const char*>(&bits), sizeof(bits));
    };
    for (const auto& [col, val] : coeffs) {
        key.append(reinterpret_cast<const char*>(&col), sizeof(col));
        push_bits(val);
    }
    key.push_back('=');
    push_bits(rhs);
    return key;
}

}  // namespace

std::pair<IterateMatrix, double> extensive_form(const ScenarioTree& tree,
                                                const std::vector<QpScenarioProblem>& problems,
                                                double tol) {
    const int S = tree.num_scenarios();
    const int T = tree.num_stages();
    const StageLayout& layout = tree.layout();
    if (static_cast<int>(problems.size()) != S)
        throw parse_error("extensive_form: one scenario problem per scenario required");

    // one variable block per (stage, bundle) node
    std::vector<std::vector<int>> node_off(T);
    int N = 0;
    for (int t = 0; t < T; ++t) {
        const int dim = layout.stage_dims[t];
        node_off[t].resize(tree.partitions()[t].size());
        for (std::size_t b = 0; b < tree.partitions()[t].size(); ++b) {
            node_off[t][b] = N;
            N += dim;
        }
    }
    auto node_col = [&](int s, int j) {
        int t = 0;
        while (j >= layout.offsets[t].second) ++t;
        return node_off[t][tree.bundle_id(s, t)] + (j - layout.offsets[t].first);
    };

    QpScenarioProblem ext;
    ext.n = N;
    ext.Q = Eigen::MatrixXd::Zero(N, N);
    ext.c = Eigen::VectorXd::Zero(N);
    ext.lower = Eigen::VectorXd::Constant(N, -kInf);
    ext.upper = Eigen::VectorXd::Constant(N, kInf);

    std::vector<int> colmap;
    std::map<std::string, int> seen_eq, seen_in;
    std::vector<std::map<int, double>> eq_rows, in_rows;
    std::vector<double> eq_rhs, in_rhs;

    for (int s = 0; s < S; ++s) {
        const QpScenarioProblem& p = problems[s];
        if (p.n != layout.n) throw parse_error("extensive_form: scenario dimension mismatch");
        const double ps = tree.probabilities()[s];
        colmap.resize(p.n);
        for (int j = 0; j < p.n; ++j) colmap[j] = node_col(s, j);

        for (int j = 0; j < p.n; ++j) {
            ext.c[colmap[j]] += ps * p.c[j];
            ext.lower[colmap[j]] = std::max(ext.lower[colmap[j]], p.lower[j]);
            ext.upper[colmap[j]] = std::min(ext.upper[colmap[j]], p.upper[j]);
            for (int i = 0; i < p.n; ++i)
                if (p.Q(i, j) != 0.0) ext.Q(colmap[i], colmap[j]) += ps * p.Q(i, j);
        }

        auto add_rows = [&](const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                            std::map<std::string, int>& seen,
                            std::vector<std::map<int, double>>& rows, std::vector<double>& rhs) {
            for (int r = 0; r < A.rows(); ++r) {
                std::map<int, double> coeffs;
                for (int j = 0; j < p.n; ++j)
                    if (A(r, j) != 0.0) coeffs[colmap[j]] += A(r, j);
                const std::string key = row_key(coeffs, b[r]);
                if (seen.emplace(key, static_cast<int>(rows.size())).second) {
                    rows.push_back(std::move(coeffs));
                    rhs.push_back(b[r]);
                }
            }
        };
        add_rows(p.A_eq, p.b_eq, seen_eq, eq_rows, eq_rhs);
        add_rows(p.A_in, p.b_in, seen_in, in_rows, in_rhs);
    }

    auto densify = [N](const std::vector<std::map<int, double>>& rows,
                       const std::vector<double>& rhs, Eigen::MatrixXd& A, Eigen::VectorXd& b) {
        A = Eigen::MatrixXd::Zero(static_cast<int>(rows.size()), N);
        b = Eigen::VectorXd::Zero(static_cast<int>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (const auto& [col, val] : rows[r]) A(static_cast<int>(r), col) = val;
            b[static_cast<int>(r)] = rhs[r];
        }
    };
    densify(eq_rows, eq_rhs, ext.A_eq, ext.b_eq);
    densify(in_rows, in_rhs, ext.A_in, ext.b_in);
    ext.finalize();

    ProxSettings settings;
    settings.tol = tol;
    settings.max_iterations = 200000;
    ProxResult res = solve_qp(ext, settings);
    if (res.status == ProxStatus::infeasible)
        throw infeasible_error("extensive form infeasible");
    if (res.status != ProxStatus::solved)
        throw numerical_error("extensive-form solve did not converge");

    IterateMatrix x_star(S, layout.n);
    for (int s = 0; s < S; ++s)
        for (int j = 0; j < layout.n; ++j) x_star(s, j) = res.y[node_col(s, j)];

    double f_star = 0.0;
    for (int s = 0; s < S; ++s)
        f_star += tree.probabilities()[s] * problems[s].objective(x_star.row(s).transpose());
    return {std::move(x_star), f_star};
}

}  // namespace hedge
