#pragma once

// Exact proximal oracle for one scenario subproblem:
//
//   argmin_y  (1/2) y'Qy + c'y + (1/(2 mu)) ||y - v||^2
//   s.t.      A_eq y = b_eq,  A_in y <= b_in,  lower <= y <= upper.
//
// The engine is an operator-splitting QP iteration: a fixed regularized
// linear-system solve alternated with clamping onto the constraint box,
// followed by an active-set polish step that solves the equality-constrained
// KKT system exactly once the active structure has settled. The prox term
// makes the subproblem 1/mu-strongly convex, so no acceleration is needed.

#include <Eigen/Dense>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hedge/error.hpp"

namespace hedge {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct QpScenarioProblem {
    int n = 0;
    Eigen::MatrixXd Q;    // n x n, symmetric PSD; empty means zero
    Eigen::VectorXd c;    // length n
    Eigen::MatrixXd A_eq; // me x n
    Eigen::VectorXd b_eq;
    Eigen::MatrixXd A_in; // mi x n
    Eigen::VectorXd b_in;
    Eigen::VectorXd lower; // length n, -inf allowed
    Eigen::VectorXd upper; // length n, +inf allowed

    static QpScenarioProblem unconstrained(Eigen::MatrixXd Q, Eigen::VectorXd c);

    // Fills empty blocks with the right-sized zero/infinite defaults and
    // checks symmetry and dimension consistency.
    void finalize();

    // Unconstrained objective value (1/2) x'Qx + c'x.
    double objective(const Eigen::VectorXd& x) const;

    int num_eq() const { return static_cast<int>(b_eq.size()); }
    int num_in() const { return static_cast<int>(b_in.size()); }
};

enum class ProxStatus { solved, max_iterations, infeasible };

std::string to_string(ProxStatus status);

struct ProxResult {
    Eigen::VectorXd y;
    double primal_residual = kInf;  // max constraint violation
    double dual_residual = kInf;    // max of stationarity and complementarity residuals
    int inner_iterations = 0;
    ProxStatus status = ProxStatus::max_iterations;
};

struct ProxSettings {
    double tol = 1e-10;
    int max_iterations = 20000;
    double sigma = 1e-6;   // primal regularization of the linear system
    double rho = 0.1;      // initial splitting penalty (equality rows use 1e3 * rho)
    double alpha = 1.6;    // over-relaxation
    int check_interval = 25;
    // penalty adaptation: rebalance primal/dual residuals, refactorizing
    // when the penalty moves by more than the trigger ratio
    double rho_min = 1e-6;
    double rho_max = 1e6;
    double rho_trigger = 5.0;
    // certificate threshold for declaring primal infeasibility
    double eps_infeasible = 1e-9;
    // after this many non-improving iterations, force a polish attempt
    int stall_iterations = 1000;
};

// Caller-owned mutable state: warm-start iterates and the cached
// factorization. Reusing a workspace across nearby prox calls for the same
// problem is what makes repeated outer passes cheap.
class ProxWorkspace {
public:
    ProxWorkspace() = default;

private:
    friend class QpEngine;
    bool primed = false;
    double key_shift = -1.0;  // 1/mu the cached factorization was built for
    double rho_cur = -1.0;    // adapted penalty the factorization uses
    Eigen::LLT<Eigen::MatrixXd> llt;
    Eigen::MatrixXd Abar;   // stacked [A_eq; A_in; I]
    Eigen::VectorXd l, u;   // combined box
    Eigen::VectorXd rho_vec;
    Eigen::VectorXd x, zbar, lambda;
    Eigen::VectorXd lambda_check;  // multiplier snapshot at the last check
};

// Proximal step. A null workspace solves cold with internal scratch state.
ProxResult prox(const QpScenarioProblem& problem, const Eigen::VectorXd& v, double mu,
                const ProxSettings& settings = {}, ProxWorkspace* workspace = nullptr);

// Plain QP solve (no proximal term), used for the extensive-form reference.
ProxResult solve_qp(const QpScenarioProblem& problem, const ProxSettings& settings = {},
                    ProxWorkspace* workspace = nullptr);

// Elementwise prox over a batch; order preserved, identical to sequential
// calls. Errors carry the offending index.
std::vector<ProxResult> prox_batch(const std::vector<QpScenarioProblem>& problems,
                                   const std::vector<Eigen::VectorXd>& points, double mu,
                                   const ProxSettings& settings = {},
                                   std::vector<ProxWorkspace>* workspaces = nullptr);

}  // namespace hedge
