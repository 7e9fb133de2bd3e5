#include "bisched/allocation.hpp"
#include "bisched/csv.hpp"
#include "bisched/distributed.hpp"
#include "bisched/error.hpp"
#include "bisched/experiment.hpp"
#include "bisched/oracle.hpp"
#include "bisched/plot.hpp"
#include "bisched/problem_io.hpp"
#include "bisched/scenario_io.hpp"
#include "bisched/simulation.hpp"
#include "bisched/trace.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace bisched;
using nlohmann::json;

namespace {

std::ifstream open_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return in;
}

json to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::vector<double> row(m.cols());
        for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = m(r, c);
        rows.push_back(row);
    }
    return rows;
}

json to_json(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
}

std::ofstream open_in(const std::string& directory, const std::string& name) {
    std::filesystem::create_directories(directory);
    std::ofstream out(std::filesystem::path(directory) / name, std::ios::binary);
    if (!out) throw Error("cannot write into '" + directory + "'");
    return out;
}

std::vector<Policy> parse_policies(const std::string& list) {
    std::vector<Policy> out;
    std::stringstream in(list);
    std::string name;
    while (std::getline(in, name, ',')) out.push_back(parse_policy(name));
    if (out.empty()) throw ValidationError("no policies given");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scheduling with bilinear rewards: simulation, solvers and trace tools"};
    app.require_subcommand(1);

    // simulate
    std::string scenario_path, policy_name = "sabr", out_dir = "out";
    long horizon = 0;
    std::uint64_t seed = 1;
    double v_override = 0.0;
    auto* simulate = app.add_subcommand("simulate", "Run one policy on a scenario");
    simulate->add_option("--scenario", scenario_path, "Scenario file")->required();
    simulate->add_option("--policy", policy_name, "sabr|wsabr|switching|oracle|nolearn|perjob");
    simulate->add_option("--T", horizon, "Horizon (default: scenario horizon)");
    simulate->add_option("--seed", seed, "Seed");
    simulate->add_option("--V", v_override, "Override V");
    simulate->add_option("--out", out_dir, "Output directory");

    // sweep
    std::string policy_list = "sabr,perjob";
    int repetitions = 10, threads = 0;
    auto* sweep = app.add_subcommand("sweep", "Run a seed x policy grid in parallel");
    sweep->add_option("--scenario", scenario_path, "Scenario file")->required();
    sweep->add_option("--policies", policy_list, "Comma separated policy names");
    sweep->add_option("--seeds", repetitions, "Repetitions per policy");
    sweep->add_option("--master-seed", seed, "Master seed");
    sweep->add_option("--T", horizon, "Horizon (default: scenario horizon)");
    sweep->add_option("--threads", threads, "Worker threads (0: hardware)");
    sweep->add_option("--out", out_dir, "Output directory");

    // solve
    std::string problem_path, out_path;
    auto* solve = app.add_subcommand("solve", "Solve one allocation problem");
    solve->add_option("--problem", problem_path, "CSV with columns i,j,rhat,Q,w,n,gamma,V[,bound]")->required();
    solve->add_option("--out", out_path, "Output CSV (default stdout)");

    // oracle
    auto* oracle = app.add_subcommand("oracle", "Solve the oracle linear program of a scenario");
    oracle->add_option("--scenario", scenario_path, "Scenario file");
    oracle->add_option("--problem", problem_path, "CSV with columns i,j,r,rho,n");
    oracle->add_option("--out", out_path, "Output CSV (default stdout)");

    // distsim
    std::string penalty_spec = "power:1.0", delays_path, mode_name = "job", form_name = "additive";
    double alpha = 0.1, perturbation = 0.01;
    int ticks = 1000;
    auto* distsim = app.add_subcommand("distsim", "Simulate the delayed distributed allocation iteration");
    distsim->add_option("--problem", problem_path, "Allocation problem CSV (as for solve)")->required();
    distsim->add_option("--penalty", penalty_spec, "power:BETA | bounded:BETA:CEILING | rational");
    distsim->add_option("--alpha", alpha, "Step size for every pair");
    distsim->add_option("--delays", delays_path, "CSV with columns i,j,forward,backward (default: zero)");
    distsim->add_option("--ticks", ticks, "Number of ticks");
    distsim->add_option("--mode", mode_name, "job|server")->check(CLI::IsMember({"job", "server"}));
    distsim->add_option("--form", form_name, "additive|proportional")->check(CLI::IsMember({"additive", "proportional"}));
    distsim->add_option("--perturb", perturbation, "Start at y* scaled by factors in [1-p, 1+p]");
    distsim->add_option("--seed", seed, "Seed of the perturbation");
    distsim->add_option("--out", out_path, "Trajectory CSV")->required();

    // ingest
    std::string collections_path, machines_path, cpi_path, rejected_path;
    int clusters = 5;
    double step_seconds = 5.0, window_start = 0.0, window_length = 5000.0;
    auto* ingest = app.add_subcommand("ingest", "Build a scenario from cluster trace CSVs");
    ingest->add_option("--collections", collections_path, "collections.csv")->required();
    ingest->add_option("--machines", machines_path, "machines.csv")->required();
    ingest->add_option("--cpi", cpi_path, "cpi.csv")->required();
    ingest->add_option("--K", clusters, "Job classes");
    ingest->add_option("--step", step_seconds, "Seconds per simulation step");
    ingest->add_option("--window-start", window_start, "Window start (s)");
    ingest->add_option("--window", window_length, "Window length (s)");
    ingest->add_option("--seed", seed, "Clustering seed");
    ingest->add_option("--rejected", rejected_path, "Write rejected rows to this CSV");
    ingest->add_option("--out", out_path, "Scenario file")->required();

    // gen-trace
    SyntheticTraceOptions trace_options;
    auto* gen_trace = app.add_subcommand("gen-trace", "Write a synthetic trace in the ingest schema");
    gen_trace->add_option("--seed", seed, "Seed");
    gen_trace->add_option("--groups", trace_options.groups, "Latent collection groups");
    gen_trace->add_option("--machine-types", trace_options.machine_types, "Distinct machine types (<= 16)");
    gen_trace->add_option("--machines-per-type", trace_options.machines_per_type, "Machines of each type");
    gen_trace->add_option("--window", trace_options.window_length, "Window length (s)");
    gen_trace->add_option("--rate", trace_options.arrival_fraction, "Collections per step");
    gen_trace->add_option("--out", out_dir, "Output directory")->required();

    // plot
    std::string in_path, column = "regret", x_column = "t", group_column = "policy";
    auto* plot = app.add_subcommand("plot", "Render a metrics CSV column as SVG with 95% bands");
    plot->add_option("--in", in_path, "Metrics CSV")->required();
    plot->add_option("--out", out_path, "SVG file")->required();
    plot->add_option("--column", column, "Column to plot");
    plot->add_option("--x", x_column, "X column");
    plot->add_option("--group", group_column, "Series column (empty for one series)");

    // gen-scenario
    SyntheticOptions synthetic;
    auto* gen_scenario = app.add_subcommand("gen-scenario", "Write a random bilinear scenario");
    gen_scenario->add_option("--seed", seed, "Seed");
    gen_scenario->add_option("--classes", synthetic.job_classes, "Job classes");
    gen_scenario->add_option("--server-classes", synthetic.server_classes, "Server classes");
    gen_scenario->add_option("--dim", synthetic.dim, "Feature dimension");
    gen_scenario->add_option("--servers", synthetic.total_servers, "Total servers");
    gen_scenario->add_option("--traffic", synthetic.total_traffic, "Total traffic intensity");
    gen_scenario->add_option("--T", synthetic.horizon, "Horizon");
    gen_scenario->add_option("--out", out_path, "Scenario file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*simulate) {
            Scenario s = load_scenario(scenario_path);
            if (v_override > 0.0) s.config.V = v_override;
            const long T = horizon > 0 ? horizon : s.config.horizon;
            const MetricsLog log = run(s, parse_policy(policy_name), T, seed);
            std::ofstream metrics = open_in(out_dir, "metrics.csv");
            write_metrics_header(metrics, s.job_count());
            write_metrics_rows(metrics, log);
            std::ofstream summary = open_in(out_dir, "summary.csv");
            write_summary_header(summary);
            write_summary_row(summary, log);
            std::cout << "policy=" << log.policy << " T=" << T << " regret=" << log.final_regret()
                      << " mean_queue=" << (T ? log.mean_queue(1, T) : 0.0) << '\n';
        } else if (*sweep) {
            const Scenario s = load_scenario(scenario_path);
            SweepOptions o;
            o.policies = parse_policies(policy_list);
            o.repetitions = repetitions;
            o.master_seed = seed;
            o.horizon = horizon;
            o.threads = threads;
            const auto runs = run_sweep(s, o);
            write_sweep_outputs(out_dir, runs);
            std::cout << runs.size() << " runs written to " << out_dir << '\n';
        } else if (*solve) {
            std::ifstream in = open_file(problem_path);
            const Allocation a = solve_allocation(read_allocation_problem(in));
            std::ostringstream csv;
            write_allocation(csv, a);
            write_output(out_path, csv.str());
            if (!a.converged) return 2;
        } else if (*oracle) {
            OracleProblem p;
            if (!scenario_path.empty()) {
                const Scenario s = load_scenario(scenario_path);
                validate(s);
                p = oracle_problem(s);
            } else if (!problem_path.empty()) {
                std::ifstream in = open_file(problem_path);
                p = read_oracle_problem(in);
            } else {
                throw ValidationError("oracle needs --scenario or --problem");
            }
            std::ostringstream csv;
            write_oracle_solution(csv, solve_oracle(p));
            write_output(out_path, csv.str());
        } else if (*distsim) {
            std::ifstream in = open_file(problem_path);
            const AllocationProblem base = read_allocation_problem(in);
            validate(base);
            std::vector<Penalty> penalties;
            for (int j = 0; j < base.servers(); ++j) penalties.push_back(parse_penalty(penalty_spec, base.capacities[j]));
            const SoftPenaltyProblem p = soft_penalty_problem(base, penalties);
            const int I = p.classes(), J = p.servers();

            DelayedDynamics d;
            d.alpha = Eigen::MatrixXd::Constant(I, J, alpha);
            d.forward = Eigen::MatrixXi::Zero(I, J);
            d.backward = Eigen::MatrixXi::Zero(I, J);
            if (!delays_path.empty()) {
                std::ifstream delays = open_file(delays_path);
                read_delays(delays, I, J, d.forward, d.backward);
            }
            d.mode = mode_name == "job" ? NodeMode::Job : NodeMode::Server;
            d.form = form_name == "additive" ? UpdateForm::Additive : UpdateForm::Proportional;

            const EquilibriumPoint eq = equilibrium_solve(p);
            if (!eq.converged) throw Error("equilibrium solver did not converge");
            Rng rng = make_rng(seed);
            std::uniform_real_distribution<double> factor(1.0 - perturbation, 1.0 + perturbation);
            Eigen::MatrixXd y0 = eq.y;
            for (Eigen::Index k = 0; k < y0.size(); ++k) y0.data()[k] *= factor(rng);

            const Trajectory tr = simulate_dynamics(p, d, {y0}, ticks);
            const std::vector<double> distance = tr.distance_to(eq);
            std::ostringstream csv;
            std::vector<std::string> header{"tick", "distance"};
            for (int i = 0; i < I; ++i) header.push_back("Y_" + std::to_string(i));
            for (int j = 0; j < J; ++j) header.push_back("Z_" + std::to_string(j));
            for (int i = 0; i < I; ++i)
                for (int j = 0; j < J; ++j) header.push_back("y_" + std::to_string(i) + "_" + std::to_string(j));
            write_csv_row(csv, header);
            for (std::size_t r = 0; r < tr.y.size(); ++r) {
                std::vector<std::string> row{std::to_string(r), format_number(distance[r])};
                for (int i = 0; i < I; ++i) row.push_back(format_number(tr.row_sums[r][i]));
                for (int j = 0; j < J; ++j) row.push_back(format_number(tr.column_sums[r][j]));
                for (int i = 0; i < I; ++i)
                    for (int j = 0; j < J; ++j) row.push_back(format_number(tr.y[r](i, j)));
                write_csv_row(csv, row);
            }
            write_output(out_path, csv.str());

            const StabilityReport rep = stability_check(p, d, eq);
            json report{{"penalty", penalties.front().describe()},
                        {"equilibrium", to_json(eq.y)},
                        {"equilibrium_residual", eq.residual},
                        {"interior", eq.interior},
                        {"applicable", rep.applicable},
                        {"margins", to_json(rep.margins)},
                        {"max_margin", rep.max_margin},
                        {"stable", rep.stable},
                        {"general_thresholds", to_json(rep.general_thresholds)},
                        {"specialized_thresholds", to_json(rep.specialized_thresholds)},
                        {"final_distance", distance.back()}};
            std::cout << report.dump(2) << '\n';
        } else if (*ingest) {
            std::ifstream c(collections_path), m(machines_path), k(cpi_path);
            if (!c || !m || !k) throw ParseError("cannot open one of the trace files");
            const IngestOptions window{window_start, window_length};
            const Trace trace = ingest_trace(c, m, k, window);
            ExportOptions o;
            o.job_classes = clusters;
            o.step_seconds = step_seconds;
            o.seed = seed;
            const TraceSummary summary = export_scenario(trace, window, o);
            save_scenario(out_path, summary.scenario);
            if (!rejected_path.empty()) {
                std::ofstream rej(rejected_path, std::ios::binary);
                write_csv_row(rej, {"file", "line", "reason"});
                for (const auto& r : trace.rejected) write_csv_row(rej, {r.file, std::to_string(r.line), r.reason});
            }
            std::cout << "rows=" << trace.rows_read << " parsed=" << trace.rows_parsed()
                      << " rejected=" << trace.rejected.size() << " job_classes=" << summary.scenario.job_count()
                      << " machine_classes=" << summary.scenario.server_count()
                      << " T=" << summary.scenario.config.horizon << '\n';
        } else if (*gen_trace) {
            save_trace(out_dir, generate_trace(trace_options, seed));
            std::cout << "trace written to " << out_dir << '\n';
        } else if (*plot) {
            emit_plot(in_path, out_path, column, x_column, group_column);
        } else if (*gen_scenario) {
            const Scenario s = make_synthetic_scenario(synthetic, seed);
            save_scenario(out_path, s);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
