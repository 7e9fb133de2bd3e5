#pragma once

#include "bisched/allocation.hpp"
#include "bisched/estimator.hpp"
#include "bisched/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace bisched {

struct Job {
    std::uint64_t id = 0;
    int job_class = 0;
};

using JobQueues = std::vector<std::deque<Job>>; // one FIFO per job class

constexpr std::int64_t kNoJob = -1;

struct AssignmentRecord {
    long t = 0;
    int server_class = 0;
    int slot = 0;
    std::int64_t job_id = kNoJob;
    int job_class = -1;
    double reward = 0.0; // observed xi; 0 until observed
};

/// Every slot of server class j independently picks class i with
/// probability y_ij / n_j and then a uniform job of that class, or stays
/// idle. `y` is |I| x |J| over all job classes; rows of empty classes must
/// be zero. Throws ValidationError if a slot's selection mass exceeds 1.
std::vector<AssignmentRecord> randomized_allocation(const Eigen::MatrixXd& y, const JobQueues& queues,
                                                    const std::vector<int>& capacities, long t, Rng& rng);

/// One Bernoulli(mu) completion trial per assignment; returns the ids of
/// jobs with at least one success, in first-success order.
std::vector<std::uint64_t> departures(const std::vector<AssignmentRecord>& assignments,
                                      const std::vector<JobClass>& classes, Rng& rng);

/// Removes the given job ids from the queues.
void remove_jobs(JobQueues& queues, const std::vector<std::uint64_t>& ids);

/// With probability lambda = sum(lambda_i) one job of class i arrives with
/// probability lambda_i / lambda. Returns the class that arrived or -1.
int arrivals(JobQueues& queues, const std::vector<JobClass>& classes, std::uint64_t& next_id, Rng& rng);

struct StepMetrics {
    long t = 0;
    std::vector<int> queue;       // Q_i(t)
    std::vector<int> arrivals;    // A_i(t+1)
    std::vector<int> departures;  // D_i(t)
    std::vector<int> assignments; // per server class
    std::vector<int> capacity;    // n_j(t)
    double expected_reward = 0.0; // sum over active i of r_ij y_ij
    double realized_reward = 0.0;
    double holding_cost = 0.0;    // sum c_i Q_i(t)
    double regret = 0.0;          // cumulative
    long refresh_count = 0;
    double kkt_residual = 0.0;
    bool solver_converged = true;
    int theta_covered = -1;       // 1/0 when tracked, -1 otherwise

    int queue_total() const;
    int assignment_total() const;
    int departure_total() const;
    int arrival_total() const;
};

struct MetricsLog {
    std::string policy;
    std::uint64_t seed = 0;
    double V = 0.0;
    double oracle_value = 0.0;
    std::vector<int> initial_arrivals; // A_i(1)
    std::vector<StepMetrics> steps;

    double final_regret() const { return steps.empty() ? 0.0 : steps.back().regret; }
    double cumulative_expected_reward() const;
    /// Mean of Q(t) over steps t in [from, to].
    double mean_queue(long from, long to) const;
    double mean_holding_cost(long from, long to) const;
    /// Whether theta stayed inside the confidence set on every tracked step.
    bool always_covered() const;
    bool operator==(const MetricsLog& other) const;
};

struct SimOptions {
    bool track_coverage = true;
    AllocationOptions solver;
};

/// Scenario as a policy sees it: unit weights for SABR and its switching
/// variant, the scenario weights otherwise.
Scenario effective_scenario(const Scenario& scenario, Policy policy);

/// Single-run state machine. Each step(): refresh estimates, solve the
/// allocation, randomise assignments, observe rewards, learn, depart,
/// admit arrivals for the next step, record metrics.
class Simulator {
public:
    Simulator(const Scenario& scenario, Policy policy, long horizon, std::uint64_t seed, SimOptions options = {});

    void step();
    void run();

    long next_step() const { return t_; }
    long horizon() const { return horizon_; }
    bool done() const { return t_ > horizon_; }

    const Scenario& scenario() const { return scenario_; }
    const BilinearEnvironment& environment() const { return env_; }
    const MetricsLog& log() const { return log_; }
    const JobQueues& queues() const { return queues_; }
    std::vector<int> queue_lengths() const;
    double V() const { return V_; }

    /// Full |I| x |J| matrices from the last completed step.
    const Eigen::MatrixXd& last_allocation() const { return y_; }
    const Eigen::MatrixXd& last_estimates() const { return estimates_; }
    const std::vector<AssignmentRecord>& last_assignments() const { return assignments_; }
    const std::vector<std::uint64_t>& last_departed() const { return departed_; }

    /// Present for learning policies (SABR variants).
    const RegularizedDesign* design() const { return design_ ? &*design_ : nullptr; }
    const ConfidenceParams& confidence() const { return confidence_; }

private:
    bool learns_bilinear() const;
    void refresh_estimates(const std::vector<int>& active);

    Scenario scenario_;
    Policy policy_;
    long horizon_;
    SimOptions options_;
    BilinearEnvironment env_;
    // Separate streams per source of randomness, so that runs of different
    // policies with the same seed see the same arrival sequence.
    Rng arrival_rng_;
    Rng assignment_rng_;
    Rng reward_rng_;
    Rng departure_rng_;
    double V_;
    long t_ = 1;
    std::uint64_t next_id_ = 0;
    JobQueues queues_;

    std::optional<RegularizedDesign> design_;
    std::optional<SwitchingIndexCache> switching_;
    ConfidenceParams confidence_;
    std::vector<Eigen::VectorXd> features_;
    long refreshes_ = 0;

    struct CellStats {
        long count = 0;
        double sum = 0.0;
    };
    std::unordered_map<std::uint64_t, std::vector<CellStats>> per_job_;

    Eigen::MatrixXd y_;
    Eigen::MatrixXd estimates_;
    std::vector<AssignmentRecord> assignments_;
    std::vector<std::uint64_t> departed_;
    MetricsLog log_;
};

MetricsLog run(const Scenario& scenario, Policy policy, long horizon, std::uint64_t seed, SimOptions options = {});

}  // namespace bisched
