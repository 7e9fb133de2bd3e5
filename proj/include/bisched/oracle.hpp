#pragma once

#include "bisched/model.hpp"

#include <Eigen/Dense>

namespace bisched {

/// max sum_ij r_ij rho_i p_ij  s.t.  sum_i rho_i p_ij <= n_j,  sum_j p_ij = 1,  p >= 0.
struct OracleProblem {
    Eigen::VectorXd traffic;    // rho_i > 0
    Eigen::VectorXd capacities; // n_j > 0
    Eigen::MatrixXd rewards;    // r_ij
};

struct OracleSolution {
    Eigen::MatrixXd p;
    double value = 0.0;
    /// Dual certificate of the transportation form on z = rho p:
    /// u_i + v_j >= r_ij, v_j >= 0, dual value sum rho_i u_i + sum n_j v_j.
    Eigen::VectorXd row_potentials;
    Eigen::VectorXd column_prices;
    double duality_gap = 0.0;
    double slackness_residual = 0.0;
};

/// Dense two-phase primal simplex with Bland's rule. Throws ValidationError
/// when the problem is malformed or infeasible.
OracleSolution solve_oracle(const OracleProblem& problem);

/// Traffic intensities, fixed capacities and true mean rewards of a scenario.
OracleProblem oracle_problem(const Scenario& scenario);

/// T times the oracle value.
double regret_reference(const OracleSolution& solution, long horizon);

/// Result of the generic solver below.
struct LinearProgramResult {
    Eigen::VectorXd x;
    Eigen::VectorXd duals; // one per equality row
    double value = 0.0;
    bool feasible = false;
    bool bounded = true;
};

/// max c^T x  s.t.  A x = b,  x >= 0, with b >= 0.
LinearProgramResult simplex_maximize(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c);

}  // namespace bisched
