#include "hedge/qp.hpp"

#include <algorithm>
#include <cmath>

namespace hedge {

QpScenarioProblem QpScenarioProblem::unconstrained(Eigen::MatrixXd Q, Eigen::VectorXd c) {
    QpScenarioProblem p;
    p.n = static_cast<int>(c.size());
    p.Q = std::move(Q);
    p.c = std::move(c);
    p.finalize();
    return p;
}

void QpScenarioProblem::finalize() {
    if (n == 0) n = static_cast<int>(c.size());
    if (n < 1) throw parse_error("QpScenarioProblem: empty problem");
    if (c.size() == 0) c = Eigen::VectorXd::Zero(n);
    if (Q.size() == 0) Q = Eigen::MatrixXd::Zero(n, n);
    if (lower.size() == 0) lower = Eigen::VectorXd::Constant(n, -kInf);
    if (upper.size() == 0) upper = Eigen::VectorXd::Constant(n, kInf);
    if (A_eq.size() == 0) { A_eq.resize(0, n); b_eq.resize(0); }
    if (A_in.size() == 0) { A_in.resize(0, n); b_in.resize(0); }

    if (Q.rows() != n || Q.cols() != n || c.size() != n || lower.size() != n || upper.size() != n)
        throw parse_error("QpScenarioProblem: dimension mismatch");
    if (A_eq.cols() != n || A_eq.rows() != b_eq.size())
        throw parse_error("QpScenarioProblem: equality block mismatch");
    if (A_in.cols() != n || A_in.rows() != b_in.size())
        throw parse_error("QpScenarioProblem: inequality block mismatch");

    const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw parse_error("QpScenarioProblem: Q must be symmetric");
    for (int i = 0; i < n; ++i)
        if (lower[i] > upper[i]) throw parse_error("QpScenarioProblem: crossed bounds");
}

double QpScenarioProblem::objective(const Eigen::VectorXd& x) const {
    return 0.5 * x.dot(Q * x) + c.dot(x);
}

std::string to_string(ProxStatus status) {
    switch (status) {
        case ProxStatus::solved: return "solved";
        case ProxStatus::max_iterations: return "max-iterations";
        case ProxStatus::infeasible: return "infeasible";
    }
    return "unknown";
}

namespace {

struct Residuals {
    double primal;
    double stationarity;
    double complementarity;
    double primal_scale;  // normalization for penalty adaptation
    double dual_scale;
};

}  // namespace

// Shared engine for prox (shift = 1/mu) and plain QP solve (shift = 0).
class QpEngine {
public:
    QpEngine(const QpScenarioProblem& p, double shift, const Eigen::VectorXd& q,
             const ProxSettings& settings, ProxWorkspace& ws)
        : p_(p), shift_(shift), q_(q), st_(settings), ws_(ws) {
        prime();
    }

    ProxResult run() {
        const int n = p_.n;
        const int m = static_cast<int>(ws_.l.size());
        Eigen::VectorXd& x = ws_.x;
        Eigen::VectorXd& zbar = ws_.zbar;
        Eigen::VectorXd& lambda = ws_.lambda;

        ProxResult best;
        best.y = x;
        double best_rp = kInf;
        int last_improvement = 0;
        ws_.lambda_check = lambda;

        for (int k = 1; k <= st_.max_iterations; ++k) {
            // regularized linear solve
            Eigen::VectorXd rhs = st_.sigma * x - q_ +
                                  ws_.Abar.transpose() * (ws_.rho_vec.cwiseProduct(zbar) - lambda);
            Eigen::VectorXd xt = ws_.llt.solve(rhs);
            Eigen::VectorXd zt = ws_.Abar * xt;
            x = st_.alpha * xt + (1.0 - st_.alpha) * x;
            Eigen::VectorXd z_pre = st_.alpha * zt + (1.0 - st_.alpha) * zbar +
                                    lambda.cwiseQuotient(ws_.rho_vec);
            zbar = z_pre.cwiseMax(ws_.l).cwiseMin(ws_.u);
            lambda = ws_.rho_vec.cwiseProduct(z_pre - zbar);

            if (k % st_.check_interval != 0 && k != st_.max_iterations) continue;

            const Residuals res = residuals(x, lambda);
            if (res.primal < best_rp * 0.99) {
                best_rp = std::min(best_rp, res.primal);
                last_improvement = k;
            }
            if (res.primal <= best.primal_residual) {
                best.y = x;
                best.primal_residual = res.primal;
                best.dual_residual = std::max(res.stationarity, res.complementarity);
            }
            best.inner_iterations = k;

            if (res.primal <= st_.tol && res.stationarity <= st_.tol &&
                res.complementarity <= st_.tol) {
                best.y = x;
                best.primal_residual = res.primal;
                best.dual_residual = std::max(res.stationarity, res.complementarity);
                best.status = ProxStatus::solved;
                return best;
            }

            // unbounded multiplier ray certifies an empty feasible set
            const Eigen::VectorXd dy = lambda - ws_.lambda_check;
            ws_.lambda_check = lambda;
            if (certifies_infeasible(dy)) {
                best.status = ProxStatus::infeasible;
                return best;
            }

            // polish once the splitting iterates are in the right basin, or
            // when progress has flattened out
            const bool stalled = k - last_improvement >= st_.stall_iterations;
            if (stalled ||
                (res.primal <= 1e-4 &&
                 res.stationarity <= 1e-2 * (1.0 + q_.lpNorm<Eigen::Infinity>()))) {
                if (auto polished = try_polish(x, lambda, k)) return *polished;
            }

            // rebalance the penalty when the residuals drift apart
            if (res.stationarity > 0.0 && res.primal > 0.0) {
                const double ratio = (res.primal / res.primal_scale) /
                                     (res.stationarity / res.dual_scale);
                const double rho_new =
                    std::clamp(ws_.rho_cur * std::sqrt(ratio), st_.rho_min, st_.rho_max);
                if (rho_new > st_.rho_trigger * ws_.rho_cur ||
                    rho_new < ws_.rho_cur / st_.rho_trigger) {
                    set_rho(rho_new);
                }
            }
        }
        (void)m;
        (void)n;
        best.status = ProxStatus::max_iterations;
        return best;
    }

private:
    void prime() {
        const int n = p_.n;
        const int me = p_.num_eq();
        const int mi = p_.num_in();
        const int m = me + mi + n;
        const bool refactor = !ws_.primed || ws_.key_shift != shift_;
        if (refactor) {
            ws_.Abar.resize(m, n);
            ws_.Abar.topRows(me) = p_.A_eq;
            ws_.Abar.middleRows(me, mi) = p_.A_in;
            ws_.Abar.bottomRows(n) = Eigen::MatrixXd::Identity(n, n);
            ws_.l.resize(m);
            ws_.u.resize(m);
            ws_.l.head(me) = p_.b_eq;
            ws_.u.head(me) = p_.b_eq;
            ws_.l.segment(me, mi).setConstant(-kInf);
            ws_.u.segment(me, mi) = p_.b_in;
            ws_.l.tail(n) = p_.lower;
            ws_.u.tail(n) = p_.upper;
            ws_.rho_vec.resize(m);
            if (ws_.rho_cur <= 0.0) ws_.rho_cur = st_.rho;
            ws_.rho_vec.head(me).setConstant(1e3 * ws_.rho_cur);
            ws_.rho_vec.tail(mi + n).setConstant(ws_.rho_cur);
            factorize();
            ws_.key_shift = shift_;
        }
        if (!ws_.primed || ws_.x.size() != n) {
            ws_.x = Eigen::VectorXd::Zero(n);
            ws_.zbar = (ws_.Abar * ws_.x).cwiseMax(ws_.l).cwiseMin(ws_.u);
            ws_.lambda = Eigen::VectorXd::Zero(m);
            ws_.primed = true;
        }
    }

    Residuals residuals(const Eigen::VectorXd& x, const Eigen::VectorXd& lambda) const {
        const Eigen::VectorXd v = ws_.Abar * x;
        double primal = 0.0, comp = 0.0;
        for (int i = 0; i < v.size(); ++i) {
            primal = std::max({primal, ws_.l[i] - v[i], v[i] - ws_.u[i]});
            if (lambda[i] > 0.0) {
                const double slack = std::isinf(ws_.u[i]) ? 1.0 : std::max(ws_.u[i] - v[i], 0.0);
                comp = std::max(comp, lambda[i] * slack);
            } else if (lambda[i] < 0.0) {
                const double slack = std::isinf(ws_.l[i]) ? 1.0 : std::max(v[i] - ws_.l[i], 0.0);
                comp = std::max(comp, -lambda[i] * slack);
            }
        }
        const Eigen::VectorXd grad = p_.Q * x + shift_ * x;
        const Eigen::VectorXd aty = ws_.Abar.transpose() * lambda;
        const double stat = (grad + q_ + aty).lpNorm<Eigen::Infinity>();
        double primal_scale = std::max(1.0, v.lpNorm<Eigen::Infinity>());
        double dual_scale = std::max({1.0, grad.lpNorm<Eigen::Infinity>(),
                                      aty.lpNorm<Eigen::Infinity>(),
                                      q_.lpNorm<Eigen::Infinity>()});
        return {std::max(primal, 0.0), stat, comp, primal_scale, dual_scale};
    }

    // Farkas-style certificate: a multiplier increment dy with A'dy ~ 0 and a
    // negative support value over the box proves there is no feasible point.
    bool certifies_infeasible(const Eigen::VectorXd& dy) const {
        const double norm = dy.lpNorm<Eigen::Infinity>();
        if (!(norm > 0.0)) return false;
        const Eigen::VectorXd d = dy / norm;
        if ((ws_.Abar.transpose() * d).lpNorm<Eigen::Infinity>() > st_.eps_infeasible)
            return false;
        double support = 0.0;
        for (int i = 0; i < d.size(); ++i) {
            if (d[i] > st_.eps_infeasible) {
                if (std::isinf(ws_.u[i])) return false;
                support += ws_.u[i] * d[i];
            } else if (d[i] < -st_.eps_infeasible) {
                if (std::isinf(ws_.l[i])) return false;
                support += ws_.l[i] * d[i];
            }
        }
        return support < -st_.eps_infeasible;
    }

    void set_rho(double rho_new) {
        const int me = p_.num_eq();
        ws_.rho_cur = rho_new;
        ws_.rho_vec.head(me).setConstant(1e3 * rho_new);
        ws_.rho_vec.tail(ws_.rho_vec.size() - me).setConstant(rho_new);
        factorize();
    }

    void factorize() {
        const int n = p_.n;
        Eigen::MatrixXd M = p_.Q + (shift_ + st_.sigma) * Eigen::MatrixXd::Identity(n, n);
        M.noalias() += ws_.Abar.transpose() * ws_.rho_vec.asDiagonal() * ws_.Abar;
        ws_.llt.compute(M);
        if (ws_.llt.info() != Eigen::Success)
            throw numerical_error("prox: regularized KKT system is not positive definite");
    }

    // Exact solve of the equality-constrained KKT system for the current
    // active guess; accepted only if the full KKT certificate passes.
    std::optional<ProxResult> try_polish(const Eigen::VectorXd& x, const Eigen::VectorXd& lambda,
                                         int iterations) {
        const int n = p_.n;
        const int m = static_cast<int>(ws_.l.size());
        const double kappa = 1e-9 * (1.0 + lambda.lpNorm<Eigen::Infinity>());

        std::vector<int> active;     // row index in Abar
        std::vector<double> target;  // bound value
        std::vector<int> side;       // +1 upper, -1 lower, 0 equality
        for (int i = 0; i < m; ++i) {
            if (ws_.l[i] == ws_.u[i]) {
                active.push_back(i); target.push_back(ws_.u[i]); side.push_back(0);
            } else if (lambda[i] > kappa && !std::isinf(ws_.u[i])) {
                active.push_back(i); target.push_back(ws_.u[i]); side.push_back(+1);
            } else if (lambda[i] < -kappa && !std::isinf(ws_.l[i])) {
                active.push_back(i); target.push_back(ws_.l[i]); side.push_back(-1);
            }
        }
        const int na = static_cast<int>(active.size());

        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + na, n + na);
        K.topLeftCorner(n, n) = p_.Q + shift_ * Eigen::MatrixXd::Identity(n, n);
        Eigen::VectorXd rhs(n + na);
        rhs.head(n) = -q_;
        for (int a = 0; a < na; ++a) {
            K.block(n + a, 0, 1, n) = ws_.Abar.row(active[a]);
            K.block(0, n + a, n, 1) = ws_.Abar.row(active[a]).transpose();
            rhs[n + a] = target[a];
        }
        const Eigen::VectorXd sol = K.colPivHouseholderQr().solve(rhs);
        const Eigen::VectorXd xp = sol.head(n);
        Eigen::VectorXd full_lambda = Eigen::VectorXd::Zero(m);
        bool sign_ok = true;
        for (int a = 0; a < na; ++a) {
            const double nu = sol[n + a];
            if (side[a] == +1 && nu < -st_.tol) sign_ok = false;
            if (side[a] == -1 && nu > st_.tol) sign_ok = false;
            full_lambda[active[a]] = nu;
        }
        if (!sign_ok) return std::nullopt;

        const Residuals res = residuals(xp, full_lambda);
        if (res.primal > st_.tol || res.stationarity > st_.tol || res.complementarity > st_.tol)
            return std::nullopt;

        // polished point seeds the next warm start
        ws_.x = xp;
        ws_.zbar = (ws_.Abar * xp).cwiseMax(ws_.l).cwiseMin(ws_.u);
        ws_.lambda = full_lambda;

        ProxResult out;
        out.y = xp;
        out.primal_residual = res.primal;
        out.dual_residual = std::max(res.stationarity, res.complementarity);
        out.inner_iterations = iterations;
        out.status = ProxStatus::solved;
        return out;
    }

    const QpScenarioProblem& p_;
    double shift_;
    const Eigen::VectorXd& q_;
    const ProxSettings& st_;
    ProxWorkspace& ws_;
};

ProxResult prox(const QpScenarioProblem& problem, const Eigen::VectorXd& v, double mu,
                const ProxSettings& settings, ProxWorkspace* workspace) {
    if (!(mu > 0.0)) throw numerical_error("prox: mu must be positive");
    if (!(settings.tol > 0.0)) throw numerical_error("prox: tol must be positive");
    if (v.size() != problem.n) throw runtime_fault("prox: anchor dimension mismatch");
    ProxWorkspace scratch;
    ProxWorkspace& ws = workspace ? *workspace : scratch;
    const double shift = 1.0 / mu;
    const Eigen::VectorXd q = problem.c - shift * v;
    return QpEngine(problem, shift, q, settings, ws).run();
}

ProxResult solve_qp(const QpScenarioProblem& problem, const ProxSettings& settings,
                    ProxWorkspace* workspace) {
    ProxWorkspace scratch;
    ProxWorkspace& ws = workspace ? *workspace : scratch;
    return QpEngine(problem, 0.0, problem.c, settings, ws).run();
}

std::vector<ProxResult> prox_batch(const std::vector<QpScenarioProblem>& problems,
                                   const std::vector<Eigen::VectorXd>& points, double mu,
                                   const ProxSettings& settings,
                                   std::vector<ProxWorkspace>* workspaces) {
    if (problems.size() != points.size())
        throw runtime_fault("prox_batch: problem/point count mismatch");
    if (workspaces && workspaces->size() != problems.size())
        throw runtime_fault("prox_batch: workspace count mismatch");
    std::vector<ProxResult> out;
    out.reserve(problems.size());
    for (std::size_t i = 0; i < problems.size(); ++i) {
        try {
            out.push_back(prox(problems[i], points[i], mu, settings,
                               workspaces ? &(*workspaces)[i] : nullptr));
        } catch (const Error& e) {
            throw Error(e.category, "prox_batch element " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace hedge
