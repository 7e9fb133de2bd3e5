#pragma once

#include "bisched/simulation.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace bisched {

/// metrics.csv columns, one row per step:
///   policy,seed,t,queue,arrivals,departures,assignments,capacity,
///   expected_reward,realized_reward,holding_cost,regret,refresh_count,
///   kkt_residual,solver_converged,theta_covered,q_0..q_{I-1}
/// queue, arrivals, departures, assignments and capacity are totals.
void write_metrics_header(std::ostream& out, int job_classes);
void write_metrics_rows(std::ostream& out, const MetricsLog& log);

/// summary.csv columns, one row per run:
///   policy,seed,V,oracle_value,T,final_regret,expected_reward,realized_reward,
///   mean_queue,mean_holding_cost,refresh_count,max_kkt_residual,
///   unconverged_steps,always_covered
void write_summary_header(std::ostream& out);
void write_summary_row(std::ostream& out, const MetricsLog& log);

/// Seed of repetition `index` under a master seed. Every policy of a sweep
/// uses the same seed for the same repetition.
std::uint64_t run_seed(std::uint64_t master_seed, int index);

struct SweepOptions {
    std::vector<Policy> policies{Policy::Sabr};
    int repetitions = 10;
    std::uint64_t master_seed = 1;
    long horizon = 0; // 0 uses the scenario horizon
    int threads = 0;  // 0 uses the hardware concurrency
    SimOptions sim;
};

/// Runs every (policy, repetition) pair in parallel. Results are ordered
/// policy-major, then by repetition, independent of scheduling.
std::vector<MetricsLog> run_sweep(const Scenario& scenario, const SweepOptions& options);

/// aggregate.csv: policy,t,<metric>_mean,<metric>_lo,<metric>_hi for
/// regret, queue and holding_cost (95% normal intervals across runs).
void write_aggregate(std::ostream& out, const std::vector<MetricsLog>& runs);

/// Writes metrics.csv, summary.csv, aggregate.csv and regret.svg,
/// queue.svg, holding_cost.svg into `directory`.
void write_sweep_outputs(const std::string& directory, const std::vector<MetricsLog>& runs);

}  // namespace bisched
