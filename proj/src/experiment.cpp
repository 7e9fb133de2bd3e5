#include "bisched/experiment.hpp"

#include "bisched/csv.hpp"
#include "bisched/error.hpp"
#include "bisched/plot.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

namespace bisched {

void write_metrics_header(std::ostream& out, int job_classes) {
    std::vector<std::string> h{"policy",          "seed",         "t",           "queue",         "arrivals",
                               "departures",      "assignments",  "capacity",    "expected_reward",
                               "realized_reward", "holding_cost", "regret",      "refresh_count", "kkt_residual",
                               "solver_converged", "theta_covered"};
    for (int i = 0; i < job_classes; ++i) h.push_back("q_" + std::to_string(i));
    write_csv_row(out, h);
}

void write_metrics_rows(std::ostream& out, const MetricsLog& log) {
    for (const auto& m : log.steps) {
        int capacity = 0;
        for (int c : m.capacity) capacity += c;
        std::vector<std::string> f{log.policy,
                                   std::to_string(log.seed),
                                   std::to_string(m.t),
                                   std::to_string(m.queue_total()),
                                   std::to_string(m.arrival_total()),
                                   std::to_string(m.departure_total()),
                                   std::to_string(m.assignment_total()),
                                   std::to_string(capacity),
                                   format_number(m.expected_reward),
                                   format_number(m.realized_reward),
                                   format_number(m.holding_cost),
                                   format_number(m.regret),
                                   std::to_string(m.refresh_count),
                                   format_number(m.kkt_residual),
                                   m.solver_converged ? "1" : "0",
                                   std::to_string(m.theta_covered)};
        for (int q : m.queue) f.push_back(std::to_string(q));
        write_csv_row(out, f);
    }
}

void write_summary_header(std::ostream& out) {
    write_csv_row(out, {"policy", "seed", "V", "oracle_value", "T", "final_regret", "expected_reward",
                        "realized_reward", "mean_queue", "mean_holding_cost", "refresh_count", "max_kkt_residual",
                        "unconverged_steps", "always_covered"});
}

void write_summary_row(std::ostream& out, const MetricsLog& log) {
    const long T = log.steps.empty() ? 0 : log.steps.back().t;
    double realized = 0.0, max_kkt = 0.0;
    long unconverged = 0;
    for (const auto& m : log.steps) {
        realized += m.realized_reward;
        if (std::isfinite(m.kkt_residual)) max_kkt = std::max(max_kkt, m.kkt_residual);
        unconverged += !m.solver_converged;
    }
    write_csv_row(out, {log.policy, std::to_string(log.seed), format_number(log.V), format_number(log.oracle_value),
                        std::to_string(T), format_number(log.final_regret()),
                        format_number(log.cumulative_expected_reward()), format_number(realized),
                        format_number(T ? log.mean_queue(1, T) : 0.0), format_number(T ? log.mean_holding_cost(1, T) : 0.0),
                        std::to_string(log.steps.empty() ? 0 : log.steps.back().refresh_count), format_number(max_kkt),
                        std::to_string(unconverged), log.always_covered() ? "1" : "0"});
}

std::uint64_t run_seed(std::uint64_t master_seed, int index) {
    Rng rng = make_rng(master_seed, static_cast<std::uint64_t>(index));
    return rng();
}

std::vector<MetricsLog> run_sweep(const Scenario& scenario, const SweepOptions& options) {
    if (options.policies.empty() || options.repetitions < 1) throw ValidationError("sweep: nothing to run");
    const long horizon = options.horizon > 0 ? options.horizon : scenario.config.horizon;
    const int total = static_cast<int>(options.policies.size()) * options.repetitions;
    std::vector<MetricsLog> results(total);

    int threads = options.threads > 0 ? options.threads : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::clamp(threads, 1, total);

    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
        for (int k = next++; k < total; k = next++) {
            try {
                const Policy policy = options.policies[k / options.repetitions];
                results[k] = run(scenario, policy, horizon, run_seed(options.master_seed, k % options.repetitions),
                                 options.sim);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return results;
}

namespace {

CsvTable long_table(const std::vector<MetricsLog>& runs) {
    CsvTable table;
    table.header = {"policy", "t", "regret", "queue", "holding_cost"};
    for (const auto& log : runs)
        for (const auto& m : log.steps) {
            table.rows.push_back({log.policy, std::to_string(m.t), format_number(m.regret),
                                  std::to_string(m.queue_total()), format_number(m.holding_cost)});
            table.line_numbers.push_back(static_cast<long>(table.rows.size()) + 1);
        }
    return table;
}

}  // namespace

void write_aggregate(std::ostream& out, const std::vector<MetricsLog>& runs) {
    const CsvTable table = long_table(runs);
    const std::vector<std::string> metrics{"regret", "queue", "holding_cost"};
    std::vector<std::vector<PlotSeries>> series;
    for (const auto& m : metrics) series.push_back(aggregate_series(table, "t", m, "policy"));

    std::vector<std::string> header{"policy", "t"};
    for (const auto& m : metrics)
        for (const char* suffix : {"_mean", "_lo", "_hi"}) header.push_back(m + suffix);
    write_csv_row(out, header);
    for (std::size_t s = 0; s < series[0].size(); ++s)
        for (std::size_t p = 0; p < series[0][s].points.size(); ++p) {
            std::vector<std::string> row{series[0][s].name, format_number(series[0][s].points[p].x)};
            for (const auto& by_metric : series) {
                const SeriesPoint& point = by_metric[s].points[p];
                row.push_back(format_number(point.mean));
                row.push_back(format_number(point.lower));
                row.push_back(format_number(point.upper));
            }
            write_csv_row(out, row);
        }
}

void write_sweep_outputs(const std::string& directory, const std::vector<MetricsLog>& runs) {
    namespace fs = std::filesystem;
    if (runs.empty()) throw ValidationError("sweep: no runs to write");
    fs::create_directories(directory);
    auto open = [&](const char* name) {
        std::ofstream out(fs::path(directory) / name, std::ios::binary);
        if (!out) throw Error("cannot write '" + (fs::path(directory) / name).string() + "'");
        return out;
    };
    {
        std::ofstream metrics = open("metrics.csv");
        write_metrics_header(metrics, static_cast<int>(runs.front().initial_arrivals.size()));
        for (const auto& log : runs) write_metrics_rows(metrics, log);
        std::ofstream summary = open("summary.csv");
        write_summary_header(summary);
        for (const auto& log : runs) write_summary_row(summary, log);
        std::ofstream aggregate = open("aggregate.csv");
        write_aggregate(aggregate, runs);
    }
    const CsvTable table = long_table(runs);
    for (const char* metric : {"regret", "queue", "holding_cost"}) {
        PlotStyle style;
        style.title = metric;
        style.y_label = metric;
        std::ofstream svg = open((std::string(metric) + ".svg").c_str());
        svg << render_svg(aggregate_series(table, "t", metric, "policy"), style);
    }
}

}  // namespace bisched
