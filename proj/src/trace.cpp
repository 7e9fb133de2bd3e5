#include "bisched/trace.hpp"

#include "bisched/csv.hpp"
#include "bisched/error.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace bisched {

namespace {

// Parses the named columns of every row; rows that fail are rejected.
// Returns the numeric fields of accepted rows with their line numbers.
struct NumericRows {
    std::vector<std::vector<double>> values;
    std::vector<long> lines;
};

NumericRows numeric_rows(const CsvTable& table, const std::string& file, const std::vector<std::string>& columns,
                         Trace& trace) {
    std::vector<int> index;
    for (const auto& c : columns) index.push_back(table.require_column(c));
    NumericRows out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        ++trace.rows_read;
        const auto& row = table.rows[r];
        const long line = table.line_numbers[r];
        if (row.size() != table.header.size()) {
            trace.rejected.push_back({file, line, "expected " + std::to_string(table.header.size()) + " fields, got " +
                                                      std::to_string(row.size())});
            continue;
        }
        std::vector<double> values;
        std::string bad;
        for (std::size_t k = 0; k < index.size(); ++k) {
            double v = 0.0;
            if (!parse_double(row[index[k]], v) || !std::isfinite(v)) {
                bad = columns[k];
                break;
            }
            values.push_back(v);
        }
        if (!bad.empty()) {
            trace.rejected.push_back({file, line, "non-numeric " + bad});
            continue;
        }
        out.values.push_back(std::move(values));
        out.lines.push_back(line);
    }
    return out;
}

bool is_integer(double v) {
    return std::floor(v) == v && std::abs(v) < 9e15;
}

}  // namespace

Trace ingest_trace(std::istream& collections, std::istream& machines, std::istream& cpi, const IngestOptions& options) {
    if (!(options.window_length > 0.0)) throw ValidationError("trace window length must be positive");
    Trace trace;
    const double window_end = options.window_start + options.window_length;

    const CsvTable ct = read_csv(collections);
    const auto crow = numeric_rows(
        ct, "collections.csv", {"collection_id", "enqueue_time", "instance_index", "cpu_request", "memory_request"},
        trace);
    std::set<std::pair<long, long>> seen_instances;
    std::set<long> collection_ids;
    for (std::size_t r = 0; r < crow.values.size(); ++r) {
        const auto& v = crow.values[r];
        auto reject = [&](const std::string& why) { trace.rejected.push_back({"collections.csv", crow.lines[r], why}); };
        if (!is_integer(v[0]) || !is_integer(v[2])) {
            reject("non-integer id");
            continue;
        }
        if (v[3] <= 0.0 || v[4] <= 0.0) {
            reject("non-positive resource request");
            continue;
        }
        if (v[1] < options.window_start || v[1] >= window_end) {
            reject("enqueue time outside window");
            continue;
        }
        InstanceRecord rec{static_cast<long>(v[0]), v[1], static_cast<long>(v[2]), v[3], v[4]};
        if (!seen_instances.insert({rec.collection_id, rec.instance_index}).second) {
            reject("duplicate instance");
            continue;
        }
        collection_ids.insert(rec.collection_id);
        trace.instances.push_back(rec);
    }

    const CsvTable mt = read_csv(machines);
    const auto mrow = numeric_rows(mt, "machines.csv", {"machine_id", "cpu_capacity", "memory_capacity"}, trace);
    std::set<long> machine_ids;
    for (std::size_t r = 0; r < mrow.values.size(); ++r) {
        const auto& v = mrow.values[r];
        auto reject = [&](const std::string& why) { trace.rejected.push_back({"machines.csv", mrow.lines[r], why}); };
        if (!is_integer(v[0])) {
            reject("non-integer id");
            continue;
        }
        if (v[1] <= 0.0 || v[2] <= 0.0) {
            reject("non-positive capacity");
            continue;
        }
        if (!machine_ids.insert(static_cast<long>(v[0])).second) {
            reject("duplicate machine");
            continue;
        }
        trace.machines.push_back({static_cast<long>(v[0]), v[1], v[2]});
    }

    const CsvTable pt = read_csv(cpi);
    const auto prow = numeric_rows(pt, "cpi.csv", {"collection_id", "machine_id", "cpi"}, trace);
    for (std::size_t r = 0; r < prow.values.size(); ++r) {
        const auto& v = prow.values[r];
        auto reject = [&](const std::string& why) { trace.rejected.push_back({"cpi.csv", prow.lines[r], why}); };
        if (!is_integer(v[0]) || !is_integer(v[1])) {
            reject("non-integer id");
            continue;
        }
        if (v[2] <= 0.0) {
            reject("non-positive cpi");
            continue;
        }
        if (!collection_ids.count(static_cast<long>(v[0]))) {
            reject("unknown collection");
            continue;
        }
        if (!machine_ids.count(static_cast<long>(v[1]))) {
            reject("unknown machine");
            continue;
        }
        trace.cpi.push_back({static_cast<long>(v[0]), static_cast<long>(v[1]), v[2]});
    }
    return trace;
}

Trace load_trace(const std::string& directory, const IngestOptions& options) {
    namespace fs = std::filesystem;
    auto open = [&](const char* name) {
        std::ifstream in(fs::path(directory) / name);
        if (!in) throw ParseError("cannot open '" + (fs::path(directory) / name).string() + "'");
        return in;
    };
    std::ifstream c = open("collections.csv");
    std::ifstream m = open("machines.csv");
    std::ifstream p = open("cpi.csv");
    return ingest_trace(c, m, p, options);
}

void save_trace(const std::string& directory, const Trace& trace) {
    namespace fs = std::filesystem;
    fs::create_directories(directory);
    auto open = [&](const char* name) {
        std::ofstream out(fs::path(directory) / name, std::ios::binary);
        if (!out) throw Error("cannot write '" + (fs::path(directory) / name).string() + "'");
        return out;
    };
    std::ofstream c = open("collections.csv");
    write_csv_row(c, {"collection_id", "enqueue_time", "instance_index", "cpu_request", "memory_request"});
    for (const auto& r : trace.instances)
        write_csv_row(c, {std::to_string(r.collection_id), format_number(r.enqueue_time),
                          std::to_string(r.instance_index), format_number(r.cpu_request),
                          format_number(r.memory_request)});
    std::ofstream m = open("machines.csv");
    write_csv_row(m, {"machine_id", "cpu_capacity", "memory_capacity"});
    for (const auto& r : trace.machines)
        write_csv_row(m, {std::to_string(r.machine_id), format_number(r.cpu_capacity), format_number(r.memory_capacity)});
    std::ofstream p = open("cpi.csv");
    write_csv_row(p, {"collection_id", "machine_id", "cpi"});
    for (const auto& r : trace.cpi)
        write_csv_row(p, {std::to_string(r.collection_id), std::to_string(r.machine_id), format_number(r.cpi)});
}

Eigen::VectorXd build_features(double cpu, double memory) {
    if (!(cpu > 0.0) || !(memory > 0.0) || !std::isfinite(cpu) || !std::isfinite(memory))
        throw ValidationError("build_features: resources must be positive and finite");
    Eigen::VectorXd f(4);
    f << cpu, memory, 1.0 / cpu, 1.0 / memory;
    return f / f.norm();
}

KMeansResult kmeans(const std::vector<Eigen::VectorXd>& points, int K, std::uint64_t seed, int max_iterations) {
    const int N = static_cast<int>(points.size());
    if (N == 0) throw ValidationError("kmeans: no points");
    const int dim = static_cast<int>(points[0].size());
    for (const auto& p : points)
        if (p.size() != dim) throw ValidationError("kmeans: points have different lengths");

    auto less = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
    };
    std::vector<Eigen::VectorXd> distinct(points);
    std::sort(distinct.begin(), distinct.end(), less);
    distinct.erase(std::unique(distinct.begin(), distinct.end(),
                               [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a == b; }),
                   distinct.end());
    if (K < 1 || K > static_cast<int>(distinct.size()))
        throw ValidationError("kmeans: K must lie between 1 and the number of distinct points");

    Rng rng = make_rng(seed);
    std::vector<int> order(distinct.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    KMeansResult result;
    for (int k = 0; k < K; ++k) result.centroids.push_back(distinct[order[k]]);
    result.labels.assign(N, -1);

    auto wcss = [&]() {
        double total = 0.0;
        for (int n = 0; n < N; ++n) total += (points[n] - result.centroids[result.labels[n]]).squaredNorm();
        return total;
    };
    auto check = [](double before, double after) {
        if (after > before + 1e-12 * (1.0 + before)) throw Error("kmeans: within-cluster sum of squares increased");
    };

    double previous = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= max_iterations; ++it) {
        result.iterations = it;
        bool changed = false;
        for (int n = 0; n < N; ++n) {
            int best = 0;
            double best_d = (points[n] - result.centroids[0]).squaredNorm();
            for (int k = 1; k < K; ++k) {
                const double d = (points[n] - result.centroids[k]).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = k;
                }
            }
            if (best != result.labels[n]) {
                changed = true;
                result.labels[n] = best;
            }
        }
        const double assigned = wcss();
        check(previous, assigned);
        if (!changed) {
            result.converged = true;
            break;
        }

        // Empty clusters keep their previous centroid.
        std::vector<Eigen::VectorXd> sums(K, Eigen::VectorXd::Zero(dim));
        std::vector<int> counts(K, 0);
        for (int n = 0; n < N; ++n) {
            sums[result.labels[n]] += points[n];
            ++counts[result.labels[n]];
        }
        for (int k = 0; k < K; ++k)
            if (counts[k] > 0) result.centroids[k] = sums[k] / counts[k];
        const double updated = wcss();
        check(assigned, updated);
        result.wcss_history.push_back(updated);
        previous = updated;
    }
    result.wcss = wcss();
    if (result.wcss_history.empty() || result.wcss_history.back() != result.wcss)
        result.wcss_history.push_back(result.wcss);
    return result;
}

RewardTable estimate_reward_table(const std::vector<RewardSample>& samples, int job_classes, int machine_classes) {
    if (job_classes < 1 || machine_classes < 1) throw ValidationError("reward table needs at least one class each way");
    RewardTable table;
    table.mean = Eigen::MatrixXd::Zero(job_classes, machine_classes);
    table.variance = Eigen::MatrixXd::Zero(job_classes, machine_classes);
    table.count = Eigen::MatrixXi::Zero(job_classes, machine_classes);
    Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(job_classes, machine_classes);
    for (const auto& s : samples) {
        if (s.job_class < 0 || s.job_class >= job_classes || s.machine_class < 0 || s.machine_class >= machine_classes)
            throw ValidationError("reward sample class out of range");
        if (!(s.cpi > 0.0)) throw ValidationError("reward sample cpi must be positive");
        // Welford update of the running mean and squared deviations.
        const double x = 1.0 / s.cpi;
        const int c = ++table.count(s.job_class, s.machine_class);
        double& mean = table.mean(s.job_class, s.machine_class);
        const double delta = x - mean;
        mean += delta / c;
        m2(s.job_class, s.machine_class) += delta * (x - mean);
    }
    for (int i = 0; i < job_classes; ++i)
        for (int j = 0; j < machine_classes; ++j)
            if (table.count(i, j) > 1) table.variance(i, j) = m2(i, j) / (table.count(i, j) - 1);
    return table;
}

TraceSummary export_scenario(const Trace& trace, const IngestOptions& window, const ExportOptions& options) {
    if (trace.instances.empty()) throw ValidationError("export_scenario: trace has no collections");
    if (trace.machines.empty()) throw ValidationError("export_scenario: trace has no machines");
    if (!(options.step_seconds > 0.0)) throw ValidationError("export_scenario: step length must be positive");
    const long T = std::lround(window.window_length / options.step_seconds);
    if (T < 1) throw ValidationError("export_scenario: window shorter than one step");

    // Collections: mean request over instances.
    struct Acc {
        double cpu = 0.0, mem = 0.0;
        int n = 0;
    };
    std::map<long, Acc> by_collection;
    for (const auto& r : trace.instances) {
        auto& a = by_collection[r.collection_id];
        a.cpu += r.cpu_request;
        a.mem += r.memory_request;
        ++a.n;
    }
    TraceSummary out;
    std::vector<Eigen::VectorXd> points;
    std::vector<std::pair<double, double>> requests;
    for (const auto& [id, a] : by_collection) {
        out.collection_ids.push_back(id);
        requests.emplace_back(a.cpu / a.n, a.mem / a.n);
        points.push_back(build_features(a.cpu / a.n, a.mem / a.n));
    }
    out.clustering = kmeans(points, options.job_classes, options.seed);

    // Drop clusters that ended empty and renumber the rest.
    std::vector<int> members(options.job_classes, 0);
    for (int l : out.clustering.labels) ++members[l];
    std::vector<int> renumber(options.job_classes, -1);
    int I = 0;
    for (int k = 0; k < options.job_classes; ++k)
        if (members[k] > 0) renumber[k] = I++;
    for (int l : out.clustering.labels) out.collection_class.push_back(renumber[l]);
    std::map<long, int> class_of_collection;
    for (std::size_t c = 0; c < out.collection_ids.size(); ++c)
        class_of_collection[out.collection_ids[c]] = out.collection_class[c];

    // Machine classes: distinct (cpu, mem) capacity pairs in sorted order.
    std::map<std::pair<double, double>, int> type_index;
    for (const auto& m : trace.machines) type_index.emplace(std::make_pair(m.cpu_capacity, m.memory_capacity), 0);
    int J = 0;
    for (auto& [pair, index] : type_index) {
        index = J++;
        out.machine_types.push_back(pair);
    }
    std::map<long, int> class_of_machine;
    std::vector<int> machines_in(J, 0);
    for (const auto& m : trace.machines) {
        const int j = type_index.at({m.cpu_capacity, m.memory_capacity});
        out.machine_ids.push_back(m.machine_id);
        out.machine_class.push_back(j);
        class_of_machine[m.machine_id] = j;
        ++machines_in[j];
    }

    std::vector<RewardSample> samples;
    samples.reserve(trace.cpi.size());
    for (const auto& r : trace.cpi) {
        const auto c = class_of_collection.find(r.collection_id);
        const auto m = class_of_machine.find(r.machine_id);
        if (c == class_of_collection.end() || m == class_of_machine.end())
            throw ValidationError("export_scenario: cpi record refers to an unknown collection or machine");
        samples.push_back({c->second, m->second, r.cpi});
    }

    Scenario& s = out.scenario;
    s.name = "trace";
    s.reward_table = estimate_reward_table(samples, I, J);
    const RewardTable& table = *s.reward_table;
    s.bound = std::max(1.0, table.mean.cwiseAbs().maxCoeff());

    std::vector<int> collections_in(I, 0);
    std::vector<Eigen::VectorXd> centroid_sum(I, Eigen::VectorXd::Zero(4));
    for (std::size_t c = 0; c < points.size(); ++c) {
        ++collections_in[out.collection_class[c]];
        centroid_sum[out.collection_class[c]] += points[c];
    }
    for (int i = 0; i < I; ++i) {
        JobClass job;
        job.feature = centroid_sum[i] / centroid_sum[i].norm();
        job.arrival_rate = static_cast<double>(collections_in[i]) / static_cast<double>(T);
        job.service_rate = 1.0;
        s.jobs.push_back(job);
    }
    if (s.total_arrival_rate() > 1.0)
        throw ValidationError("export_scenario: more than one collection per step on average; use a shorter step");
    for (int j = 0; j < J; ++j) {
        ServerClass server;
        server.feature = build_features(out.machine_types[j].first, out.machine_types[j].second);
        server.capacity = machines_in[j];
        s.servers.push_back(server);
    }

    // theta: least-squares bilinear fit to the observed cells, shrunk so
    // that ||theta|| <= sqrt(a). The environment itself samples the table.
    std::vector<std::pair<int, int>> observed;
    for (int i = 0; i < I; ++i)
        for (int j = 0; j < J; ++j)
            if (table.count(i, j) > 0) observed.emplace_back(i, j);
    Eigen::MatrixXd X(observed.size(), 16);
    Eigen::VectorXd target(observed.size());
    for (std::size_t k = 0; k < observed.size(); ++k) {
        const auto [i, j] = observed[k];
        X.row(k) = vectorize_outer(s.jobs[i].feature, s.servers[j].feature).transpose();
        target[k] = table.mean(i, j);
    }
    Eigen::VectorXd fit = Eigen::VectorXd::Zero(16);
    if (!observed.empty())
        fit = (X.transpose() * X + 1e-6 * Eigen::MatrixXd::Identity(16, 16)).ldlt().solve(X.transpose() * target);
    if (fit.norm() > std::sqrt(s.bound)) fit *= std::sqrt(s.bound) / fit.norm();
    s.theta = Eigen::Map<const Eigen::Matrix<double, 4, 4, Eigen::RowMajor>>(fit.data());

    s.noise.kind = NoiseKind::Gaussian;
    s.noise.scale = std::sqrt(table.variance.maxCoeff());
    s.config.gamma = options.gamma_factor * s.bound;
    s.config.horizon = T;
    s.config.seed = options.seed;
    return out;
}

Trace generate_trace(const SyntheticTraceOptions& o, std::uint64_t seed) {
    if (o.groups < 1 || o.machine_types < 1 || o.machine_types > 16 || o.machines_per_type < 1 || o.max_instances < 1)
        throw ValidationError("generate_trace: invalid sizes");
    if (!(o.arrival_fraction > 0.0 && o.arrival_fraction <= 1.0))
        throw ValidationError("generate_trace: arrival fraction must lie in (0, 1]");
    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    // Group centres on a log grid with a permuted memory axis.
    std::vector<int> perm(o.groups);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::pair<double, double>> centre;
    for (int g = 0; g < o.groups; ++g) centre.emplace_back(0.02 * std::pow(2.0, g), 0.02 * std::pow(2.0, perm[g]));

    // Machine types: distinct pairs from a 4 x 4 capacity grid.
    std::vector<int> grid(16);
    std::iota(grid.begin(), grid.end(), 0);
    std::shuffle(grid.begin(), grid.end(), rng);
    Trace trace;
    long machine_id = 1;
    for (int k = 0; k < o.machine_types; ++k) {
        const double cpu = 0.25 * (1 + grid[k] / 4);
        const double mem = 0.25 * (1 + grid[k] % 4);
        for (int m = 0; m < o.machines_per_type; ++m) trace.machines.push_back({machine_id++, cpu, mem});
    }

    // Efficiency (inverse CPI) per (group, type); some pairs never co-locate.
    Eigen::MatrixXd efficiency(o.groups, o.machine_types);
    std::vector<std::vector<int>> allowed(o.groups);
    for (int g = 0; g < o.groups; ++g) {
        for (int k = 0; k < o.machine_types; ++k) {
            efficiency(g, k) = 0.3 + 0.6 * unit(rng);
            if (unit(rng) >= o.unobserved_fraction) allowed[g].push_back(k);
        }
        if (allowed[g].empty()) allowed[g].push_back(static_cast<int>(rng() % o.machine_types));
    }

    const long steps = std::lround(o.window_length / o.step_seconds);
    const long count = std::max(1L, std::lround(o.arrival_fraction * static_cast<double>(steps)));
    std::vector<double> times(count);
    for (auto& t : times) t = o.window_length * unit(rng);
    std::sort(times.begin(), times.end());
    for (long c = 0; c < count; ++c) {
        const int g = static_cast<int>(rng() % o.groups);
        const int instances = 1 + static_cast<int>(rng() % o.max_instances);
        for (int n = 0; n < instances; ++n) {
            InstanceRecord r;
            r.collection_id = c + 1;
            r.enqueue_time = times[c];
            r.instance_index = n;
            r.cpu_request = centre[g].first * std::exp(0.05 * normal(rng));
            r.memory_request = centre[g].second * std::exp(0.05 * normal(rng));
            trace.instances.push_back(r);

            const int k = allowed[g][rng() % allowed[g].size()];
            const long machine = trace.machines[k * o.machines_per_type + rng() % o.machines_per_type].machine_id;
            const double inv = std::max(0.02, efficiency(g, k) + 0.05 * normal(rng));
            trace.cpi.push_back({r.collection_id, machine, 1.0 / inv});
        }
    }
    trace.rows_read = trace.rows_parsed();
    return trace;
}

}  // namespace bisched
