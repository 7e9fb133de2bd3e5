#pragma once

#include <Eigen/Dense>

#include <vector>

namespace bisched {

/// One step's allocation program over the active job and server classes:
///
///   maximise (1/V) sum_i w_i Q_i log(sum_j y_ij) - sum_ij (gamma - rhat_ij) y_ij
///   s.t.     sum_i y_ij <= n_j,  y >= 0.
struct AllocationProblem {
    Eigen::VectorXd weights;    // w_i
    Eigen::VectorXd queues;     // Q_i >= 1
    Eigen::MatrixXd estimates;  // rhat_ij in [-a, a]
    Eigen::VectorXd capacities; // n_j
    double gamma = 1.2;
    double V = 1.0;
    double bound = 1.0;

    int classes() const { return static_cast<int>(weights.size()); }
    int servers() const { return static_cast<int>(capacities.size()); }
    /// w_i Q_i / V
    Eigen::VectorXd utility_coefficients() const;
    /// gamma - rhat_ij
    Eigen::MatrixXd marginal_costs() const;
};

void validate(const AllocationProblem& problem);

struct Allocation {
    Eigen::MatrixXd y;      // |I| x |J|
    Eigen::VectorXd q;      // capacity prices
    Eigen::MatrixXd h;      // nonnegativity multipliers
    double kkt_residual = 0.0;
    double objective = 0.0;
    int iterations = 0;
    bool converged = true;

    Eigen::VectorXd row_sums() const { return y.rowwise().sum(); }
};

double allocation_objective(const AllocationProblem& problem, const Eigen::MatrixXd& y);

/// Max-norm of the stationarity gaps |w_iQ_i/(V Y_i) - q_j - (gamma - rhat_ij) + h_ij|,
/// primal and dual infeasibilities, and complementary-slackness products.
/// Zero exactly at a KKT point; infinite if some Y_i <= 0.
double kkt_residual(const AllocationProblem& problem, const Eigen::MatrixXd& y, const Eigen::VectorXd& q,
                    const Eigen::MatrixXd& h);

/// q_j = max(0, max over entries with y_ij > support_tol of the marginal
/// utility gap); h from the stationarity slack.
void recover_duals(const AllocationProblem& problem, const Eigen::MatrixXd& y, double support_tol,
                   Eigen::VectorXd& q, Eigen::MatrixXd& h);

struct AllocationOptions {
    double tolerance = 1e-8;
    int max_iterations = 100000;
};

/// Projected gradient ascent with per-column capped-simplex projection.
/// `warm_start`, when given, must be |I| x |J|; rows summing to zero are
/// re-initialised. Non-convergence is reported through `converged` and the
/// best residual, not thrown.
Allocation solve_allocation(const AllocationProblem& problem, const AllocationOptions& options = {},
                            const Eigen::MatrixXd* warm_start = nullptr);

/// Exact solution for a single server class via a one-dimensional root
/// search on the capacity price.
Allocation closed_form_single_server(const AllocationProblem& problem);

}  // namespace bisched
