#pragma once

#include "bisched/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace bisched {

// Trace files (comma separated, header row, LF line endings):
//   collections.csv  collection_id,enqueue_time,instance_index,cpu_request,memory_request
//   machines.csv     machine_id,cpu_capacity,memory_capacity
//   cpi.csv          collection_id,machine_id,cpi
// One collections.csv row per instance; one cpi.csv row per observed
// (instance placement, machine) sample.

struct InstanceRecord {
    long collection_id = 0;
    double enqueue_time = 0.0; // seconds
    long instance_index = 0;
    double cpu_request = 0.0;
    double memory_request = 0.0;
};

struct MachineRecord {
    long machine_id = 0;
    double cpu_capacity = 0.0;
    double memory_capacity = 0.0;
};

struct CpiRecord {
    long collection_id = 0;
    long machine_id = 0;
    double cpi = 0.0;
};

struct RejectedRow {
    std::string file;
    long line = 0;
    std::string reason;
};

struct Trace {
    std::vector<InstanceRecord> instances;
    std::vector<MachineRecord> machines;
    std::vector<CpiRecord> cpi;
    std::vector<RejectedRow> rejected;
    long rows_read = 0; // data rows across the three files

    long rows_parsed() const {
        return static_cast<long>(instances.size() + machines.size() + cpi.size());
    }
};

/// Rows with enqueue times outside [window_start, window_start + window_length)
/// are rejected.
struct IngestOptions {
    double window_start = 0.0;
    double window_length = 5000.0;
};

/// Parses the three files. Malformed rows are rejected with a reason
/// rather than aborting, so rows_read == rows_parsed() + rejected.size().
/// A missing column or an empty file raises ParseError.
Trace ingest_trace(std::istream& collections, std::istream& machines, std::istream& cpi,
                   const IngestOptions& options = {});
Trace load_trace(const std::string& directory, const IngestOptions& options = {});
void save_trace(const std::string& directory, const Trace& trace);

/// Unit-norm (cpu, mem, 1/cpu, 1/mem).
Eigen::VectorXd build_features(double cpu, double memory);

struct KMeansResult {
    std::vector<int> labels;
    std::vector<Eigen::VectorXd> centroids;
    double wcss = 0.0;
    std::vector<double> wcss_history; // after each Lloyd iteration
    int iterations = 0;
    bool converged = false;
};

/// Lloyd's algorithm started from K distinct points chosen with the seed.
/// Throws ValidationError unless 1 <= K <= number of distinct points, and
/// Error if an iteration ever increases the within-cluster sum of squares.
KMeansResult kmeans(const std::vector<Eigen::VectorXd>& points, int K, std::uint64_t seed, int max_iterations = 300);

struct RewardSample {
    int job_class = 0;
    int machine_class = 0;
    double cpi = 0.0;
};

/// Per-cell mean and unbiased variance of 1/cpi. Cells without samples
/// get mean 0, variance 0 and count 0; one sample gives variance 0.
RewardTable estimate_reward_table(const std::vector<RewardSample>& samples, int job_classes, int machine_classes);

struct ExportOptions {
    int job_classes = 5;
    double step_seconds = 5.0;
    std::uint64_t seed = 1;
    double gamma_factor = 1.2; // gamma = gamma_factor * a
};

struct TraceSummary {
    Scenario scenario;
    std::vector<long> collection_ids;   // in clustering order
    std::vector<int> collection_class;  // job class per collection
    std::vector<long> machine_ids;
    std::vector<int> machine_class;     // machine class per machine
    std::vector<std::pair<double, double>> machine_types; // (cpu, mem) per class
    KMeansResult clustering;
};

/// Builds a tabular scenario from an ingested trace: K-means job classes
/// over collection features, one machine class per distinct capacity pair
/// (capacity = machines in the class), arrival rates from collections per
/// step, mu = 1, horizon = window / step, rewards from inverse CPI.
/// Throws ValidationError for an empty trace or more than one arrival per step.
TraceSummary export_scenario(const Trace& trace, const IngestOptions& window, const ExportOptions& options = {});

struct SyntheticTraceOptions {
    int groups = 5;           // latent collection groups
    int machine_types = 4;
    int machines_per_type = 2;
    double window_length = 5000.0;
    double arrival_fraction = 0.5; // collections per step
    double step_seconds = 5.0;
    int max_instances = 3;
    double unobserved_fraction = 0.15; // (group, type) pairs never co-located
};

/// Schema-compatible random trace with known group structure.
Trace generate_trace(const SyntheticTraceOptions& options, std::uint64_t seed);

}  // namespace bisched
