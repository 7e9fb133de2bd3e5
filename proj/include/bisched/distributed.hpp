#pragma once

#include "bisched/allocation.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace bisched {

enum class PenaltyKind { Power, Bounded, Rational };

/// Soft capacity penalty p_j(z) of a server class with capacity n, and its
/// integral C_j(z). With x = z / n:
///   power     p = x^beta
///   bounded   p = ceiling * x^beta / (1 + x^beta)   (p' z <= beta p, p <= ceiling)
///   rational  p = x / (1 - x), finite only for z < n
struct Penalty {
    PenaltyKind kind = PenaltyKind::Power;
    double beta = 1.0;
    double ceiling = 1.0;
    double capacity = 1.0;

    double value(double z) const;
    double derivative(double z) const;
    double integral(double z) const;
    /// Largest admissible load (n for rational, infinity otherwise).
    double domain_limit() const;
    std::string describe() const;
};

/// "power:BETA", "bounded:BETA:CEILING" or "rational".
Penalty parse_penalty(const std::string& text, double capacity);

/// maximise sum_i k_i log(Y_i) - sum_j C_j(Z_j) - sum_ij pi_ij y_ij over y >= 0,
/// with Y_i the row sums and Z_j the column sums.
struct SoftPenaltyProblem {
    Eigen::VectorXd utility;       // k_i = w_i Q_i / V
    Eigen::MatrixXd prices;        // pi_ij = gamma - rhat_ij >= 0
    std::vector<Penalty> penalties; // one per server class

    int classes() const { return static_cast<int>(utility.size()); }
    int servers() const { return static_cast<int>(penalties.size()); }
};

void validate(const SoftPenaltyProblem& problem);

/// Same utilities and prices as an allocation problem, with the hard
/// capacities replaced by penalties.
SoftPenaltyProblem soft_penalty_problem(const AllocationProblem& problem, const std::vector<Penalty>& penalties);

double soft_penalty_objective(const SoftPenaltyProblem& problem, const Eigen::MatrixXd& y);

/// g_ij = k_i / Y_i - p_j(Z_j) - pi_ij.
Eigen::MatrixXd optimality_gaps(const SoftPenaltyProblem& problem, const Eigen::MatrixXd& y);

/// max_ij |y_ij - max(0, y_ij + g_ij)|; zero exactly when y >= 0, g <= 0 and y g = 0.
double equilibrium_residual(const SoftPenaltyProblem& problem, const Eigen::MatrixXd& y);

struct EquilibriumPoint {
    Eigen::MatrixXd y;
    Eigen::VectorXd row_sums;    // Y*_i
    Eigen::VectorXd column_sums; // Z*_j
    double residual = 0.0;
    bool interior = false; // every pair has y > 1e-6 or g < -1e-6
    bool converged = false;
    int iterations = 0;
};

EquilibriumPoint equilibrium_solve(const SoftPenaltyProblem& problem, double tolerance = 1e-11,
                                   int max_iterations = 200000);

enum class NodeMode { Job, Server };

/// Additive: y + alpha (1 - lambda / u'), the iteration as usually stated.
/// Proportional: y + alpha y (1 - lambda / u'), the rate-scaled form of
/// joint routing and rate control. The local stability margin below is
/// scale-free only for the proportional form; in the additive form the
/// loop gain of pair (i, j) is the margin divided by Y*_i.
enum class UpdateForm { Additive, Proportional };

/// Step sizes and integer delays (in ticks) of the delayed iteration.
/// Both delay matrices are indexed (i, j): forward is job node i to server
/// node j, backward is server node j to job node i.
struct DelayedDynamics {
    Eigen::MatrixXd alpha;
    Eigen::MatrixXi forward;
    Eigen::MatrixXi backward;
    NodeMode mode = NodeMode::Job;
    UpdateForm form = UpdateForm::Additive;

    Eigen::MatrixXi round_trip() const { return forward + backward; }
    int history_length() const; // ticks of history the iteration reads
};

void validate(const DelayedDynamics& dynamics, const SoftPenaltyProblem& problem);

struct Trajectory {
    std::vector<Eigen::MatrixXd> y;        // y(r), r = 0..R
    std::vector<Eigen::VectorXd> row_sums; // the node's delayed Y_i(r)
    std::vector<Eigen::VectorXd> column_sums; // the node's delayed Z_j(r)

    /// ||Y(r) - Y*||_inf + ||Z(r) - Z*||_inf for every tick.
    std::vector<double> distance_to(const EquilibriumPoint& equilibrium) const;
};

/// Runs R ticks of
///   y_ij(r+1) = [y_ij(r) + alpha_ij (1 - lambda_ij(r) / u_i'(Y_i(.)))]_+
/// with the delayed aggregates of the chosen node mode. `initial` holds
/// y(r) for r = -H..0 (H = history_length()); a single matrix means a
/// constant history. Throws Error naming the tick of a non-finite iterate.
Trajectory simulate_dynamics(const SoftPenaltyProblem& problem, const DelayedDynamics& dynamics,
                             const std::vector<Eigen::MatrixXd>& initial, int ticks);

struct StabilityReport {
    bool applicable = false; // equilibrium is interior
    Eigen::MatrixXd margins; // alpha tau (1 + p'(Z) Z / (p(Z) + pi))
    double max_margin = 0.0;
    bool stable = false;     // max margin < pi/2
    /// Bound on alpha tau from the general condition, with the pair's price
    /// and with the price replaced by zero (the stronger condition).
    Eigen::MatrixXd general_thresholds;
    Eigen::MatrixXd zero_price_thresholds;
    /// Closed-form bound on alpha tau per server class for the penalty's
    /// family: power (pi/2)/(1+beta); bounded (pi/2)(g+c)/(g+g beta+c) with
    /// c the smallest price; rational (pi/4) eps with eps = 1 - Z*/n.
    Eigen::VectorXd specialized_thresholds;
    Eigen::VectorXd epsilon; // 1 - Z*_j / n_j
};

StabilityReport stability_check(const SoftPenaltyProblem& problem, const DelayedDynamics& dynamics,
                                const EquilibriumPoint& equilibrium);

}  // namespace bisched
