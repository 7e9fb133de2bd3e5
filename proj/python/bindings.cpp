#include "bisched/allocation.hpp"
#include "bisched/distributed.hpp"
#include "bisched/error.hpp"
#include "bisched/estimator.hpp"
#include "bisched/oracle.hpp"
#include "bisched/scenario_io.hpp"
#include "bisched/simulation.hpp"
#include "bisched/trace.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace bisched;

namespace {

AllocationProblem allocation_problem(const Eigen::VectorXd& weights, const Eigen::VectorXd& queues,
                                     const Eigen::MatrixXd& estimates, const Eigen::VectorXd& capacities,
                                     double gamma, double V, double bound) {
    AllocationProblem p;
    p.weights = weights;
    p.queues = queues;
    p.estimates = estimates;
    p.capacities = capacities;
    p.gamma = gamma;
    p.V = V;
    p.bound = bound;
    return p;
}

py::dict allocation_dict(const Allocation& a) {
    py::dict d;
    d["y"] = a.y;
    d["row_sums"] = Eigen::VectorXd(a.row_sums());
    d["q"] = a.q;
    d["h"] = a.h;
    d["objective"] = a.objective;
    d["kkt_residual"] = a.kkt_residual;
    d["iterations"] = a.iterations;
    d["converged"] = a.converged;
    return d;
}

SoftPenaltyProblem soft_problem(const Eigen::VectorXd& utility, const Eigen::MatrixXd& prices,
                                const std::vector<std::string>& penalties, const Eigen::VectorXd& capacities) {
    if (penalties.size() != static_cast<std::size_t>(capacities.size()))
        throw ValidationError("one penalty per capacity required");
    SoftPenaltyProblem p;
    p.utility = utility;
    p.prices = prices;
    for (std::size_t j = 0; j < penalties.size(); ++j)
        p.penalties.push_back(parse_penalty(penalties[j], capacities[static_cast<Eigen::Index>(j)]));
    validate(p);
    return p;
}

DelayedDynamics dynamics(const Eigen::MatrixXd& alpha, const Eigen::MatrixXi& forward, const Eigen::MatrixXi& backward,
                         const std::string& mode, const std::string& form) {
    DelayedDynamics d;
    d.alpha = alpha;
    d.forward = forward;
    d.backward = backward;
    if (mode == "job")
        d.mode = NodeMode::Job;
    else if (mode == "server")
        d.mode = NodeMode::Server;
    else
        throw ValidationError("mode must be 'job' or 'server'");
    if (form == "additive")
        d.form = UpdateForm::Additive;
    else if (form == "proportional")
        d.form = UpdateForm::Proportional;
    else
        throw ValidationError("form must be 'additive' or 'proportional'");
    return d;
}

py::dict equilibrium_dict(const EquilibriumPoint& e) {
    py::dict d;
    d["y"] = e.y;
    d["row_sums"] = e.row_sums;
    d["column_sums"] = e.column_sums;
    d["residual"] = e.residual;
    d["interior"] = e.interior;
    d["converged"] = e.converged;
    d["iterations"] = e.iterations;
    return d;
}

py::dict metrics_dict(const MetricsLog& log) {
    const Eigen::Index T = static_cast<Eigen::Index>(log.steps.size());
    const Eigen::Index I = static_cast<Eigen::Index>(log.initial_arrivals.size());
    Eigen::VectorXi t(T), refreshes(T), covered(T);
    Eigen::MatrixXi queue(T, I), arrivals(T, I), departures(T, I);
    Eigen::VectorXd expected(T), realized(T), holding(T), regret(T), kkt(T);
    for (Eigen::Index k = 0; k < T; ++k) {
        const StepMetrics& m = log.steps[static_cast<std::size_t>(k)];
        t[k] = static_cast<int>(m.t);
        refreshes[k] = static_cast<int>(m.refresh_count);
        covered[k] = m.theta_covered;
        for (Eigen::Index i = 0; i < I; ++i) {
            queue(k, i) = m.queue[i];
            arrivals(k, i) = m.arrivals[i];
            departures(k, i) = m.departures[i];
        }
        expected[k] = m.expected_reward;
        realized[k] = m.realized_reward;
        holding[k] = m.holding_cost;
        regret[k] = m.regret;
        kkt[k] = m.kkt_residual;
    }
    py::dict d;
    d["policy"] = log.policy;
    d["seed"] = log.seed;
    d["V"] = log.V;
    d["oracle_value"] = log.oracle_value;
    d["t"] = t;
    d["queue"] = queue;
    d["arrivals"] = arrivals;
    d["departures"] = departures;
    d["expected_reward"] = expected;
    d["realized_reward"] = realized;
    d["holding_cost"] = holding;
    d["regret"] = regret;
    d["refresh_count"] = refreshes;
    d["kkt_residual"] = kkt;
    d["theta_covered"] = covered;
    return d;
}

}  // namespace

PYBIND11_MODULE(_bisched, m) {
    m.doc() = "Queueing simulation and allocation solvers for scheduling with bilinear rewards.";

    // Translators are tried newest first, so the base class goes first.
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

    py::class_<Scenario>(m, "Scenario")
        .def_readwrite("name", &Scenario::name)
        .def_readwrite("bound", &Scenario::bound)
        .def_readwrite("theta", &Scenario::theta)
        .def_property_readonly("job_count", &Scenario::job_count)
        .def_property_readonly("server_count", &Scenario::server_count)
        .def_property_readonly("dim", &Scenario::dim)
        .def_property_readonly("total_traffic", &Scenario::total_traffic)
        .def_property_readonly("total_capacity", &Scenario::total_capacity)
        .def_property_readonly("tabular", [](const Scenario& s) { return s.reward_table.has_value(); })
        .def_property(
            "horizon", [](const Scenario& s) { return s.config.horizon; },
            [](Scenario& s, long T) { s.config.horizon = T; })
        .def_property(
            "gamma", [](const Scenario& s) { return s.config.gamma; },
            [](Scenario& s, double g) { s.config.gamma = g; })
        .def_property(
            "V", [](const Scenario& s) { return s.config.V; },
            [](Scenario& s, std::optional<double> v) { s.config.V = v; })
        .def_property(
            "weights",
            [](const Scenario& s) {
                std::vector<double> w;
                for (const auto& j : s.jobs) w.push_back(j.weight);
                return w;
            },
            [](Scenario& s, const std::vector<double>& w) {
                if (w.size() != s.jobs.size()) throw ValidationError("one weight per job class required");
                for (std::size_t i = 0; i < w.size(); ++i) s.jobs[i].weight = w[i];
            })
        .def_property(
            "holding_costs",
            [](const Scenario& s) {
                std::vector<double> c;
                for (const auto& j : s.jobs) c.push_back(j.holding_cost);
                return c;
            },
            [](Scenario& s, const std::vector<double>& c) {
                if (c.size() != s.jobs.size()) throw ValidationError("one holding cost per job class required");
                for (std::size_t i = 0; i < c.size(); ++i) s.jobs[i].holding_cost = c[i];
            })
        .def("mean_rewards", [](const Scenario& s) { return BilinearEnvironment(s).mean_rewards(); })
        .def("validate", [](const Scenario& s) { validate(s); });

    m.def(
        "synthetic_scenario",
        [](std::uint64_t seed, int job_classes, int server_classes, int dim, int total_servers, double total_traffic,
           double gamma, double noise_variance, long horizon) {
            SyntheticOptions o;
            o.job_classes = job_classes;
            o.server_classes = server_classes;
            o.dim = dim;
            o.total_servers = total_servers;
            o.total_traffic = total_traffic;
            o.gamma = gamma;
            o.noise_variance = noise_variance;
            o.horizon = horizon;
            return make_synthetic_scenario(o, seed);
        },
        py::arg("seed") = 1, py::arg("job_classes") = 10, py::arg("server_classes") = 2, py::arg("dim") = 2,
        py::arg("total_servers") = 4, py::arg("total_traffic") = 1.0, py::arg("gamma") = 1.2,
        py::arg("noise_variance") = 0.01, py::arg("horizon") = 500);
    m.def("load_scenario", &load_scenario, py::arg("path"));
    m.def("save_scenario", [](const Scenario& s, const std::string& path) { save_scenario(path, s); },
          py::arg("scenario"), py::arg("path"));
    m.def("recommended_v", &recommended_v, py::arg("scenario"));
    m.def(
        "theorem_bounds",
        [](const Scenario& s, double V) {
            const TheoremBounds b = theorem_bounds(s, V);
            py::dict d;
            d["alpha1"] = b.alpha1;
            d["alpha2"] = b.alpha2;
            d["alpha3"] = b.alpha3;
            d["alpha4"] = b.alpha4;
            d["alpha5"] = b.alpha5;
            d["holding_cost_bound"] = b.holding_cost_bound;
            d["queue_bound"] = b.queue_bound;
            d["recommended_v"] = b.recommended_v;
            return d;
        },
        py::arg("scenario"), py::arg("V"));
    m.def(
        "beta",
        [](double kappa, long horizon, double zeta, int dim, long t) {
            return beta(ConfidenceParams{kappa, horizon, zeta, dim}, t);
        },
        py::arg("kappa"), py::arg("horizon"), py::arg("zeta"), py::arg("dim"), py::arg("t"));

    py::class_<RegularizedDesign>(m, "RegularizedDesign")
        .def(py::init<int, double>(), py::arg("dim"), py::arg("zeta"))
        .def("update", &RegularizedDesign::update, py::arg("w"), py::arg("xi"))
        .def("theta_hat", &RegularizedDesign::theta_hat)
        .def("inverse_norm", &RegularizedDesign::inverse_norm)
        .def_property_readonly("inv_lambda", &RegularizedDesign::inv_lambda)
        .def_property_readonly("lambda_", &RegularizedDesign::lambda)
        .def_property_readonly("log_det", &RegularizedDesign::log_det_lambda)
        .def_property_readonly("update_count", &RegularizedDesign::update_count);

    m.def(
        "simulate",
        [](const Scenario& s, const std::string& policy, long horizon, std::uint64_t seed) {
            MetricsLog log;
            {
                py::gil_scoped_release release;
                log = run(s, parse_policy(policy), horizon, seed);
            }
            return metrics_dict(log);
        },
        py::arg("scenario"), py::arg("policy") = "sabr", py::arg("horizon") = 500, py::arg("seed") = 1,
        "Runs one policy and returns per-step metrics as arrays.");

    m.def(
        "solve_allocation",
        [](const Eigen::VectorXd& w, const Eigen::VectorXd& q, const Eigen::MatrixXd& r, const Eigen::VectorXd& n,
           double gamma, double V, double bound, double tolerance) {
            AllocationOptions o;
            o.tolerance = tolerance;
            return allocation_dict(solve_allocation(allocation_problem(w, q, r, n, gamma, V, bound), o));
        },
        py::arg("weights"), py::arg("queues"), py::arg("estimates"), py::arg("capacities"), py::arg("gamma") = 1.2,
        py::arg("V") = 1.0, py::arg("bound") = 1.0, py::arg("tolerance") = 1e-8);
    m.def(
        "closed_form_single_server",
        [](const Eigen::VectorXd& w, const Eigen::VectorXd& q, const Eigen::MatrixXd& r, const Eigen::VectorXd& n,
           double gamma, double V, double bound) {
            return allocation_dict(closed_form_single_server(allocation_problem(w, q, r, n, gamma, V, bound)));
        },
        py::arg("weights"), py::arg("queues"), py::arg("estimates"), py::arg("capacities"), py::arg("gamma") = 1.2,
        py::arg("V") = 1.0, py::arg("bound") = 1.0);

    m.def(
        "solve_oracle",
        [](const Eigen::VectorXd& traffic, const Eigen::VectorXd& capacities, const Eigen::MatrixXd& rewards) {
            const OracleSolution sol = solve_oracle(OracleProblem{traffic, capacities, rewards});
            py::dict d;
            d["p"] = sol.p;
            d["value"] = sol.value;
            d["row_potentials"] = sol.row_potentials;
            d["column_prices"] = sol.column_prices;
            d["duality_gap"] = sol.duality_gap;
            return d;
        },
        py::arg("traffic"), py::arg("capacities"), py::arg("rewards"));

    m.def(
        "equilibrium_solve",
        [](const Eigen::VectorXd& utility, const Eigen::MatrixXd& prices, const std::vector<std::string>& penalties,
           const Eigen::VectorXd& capacities, double tolerance) {
            return equilibrium_dict(equilibrium_solve(soft_problem(utility, prices, penalties, capacities), tolerance));
        },
        py::arg("utility"), py::arg("prices"), py::arg("penalties"), py::arg("capacities"),
        py::arg("tolerance") = 1e-11);
    m.def(
        "simulate_dynamics",
        [](const Eigen::VectorXd& utility, const Eigen::MatrixXd& prices, const std::vector<std::string>& penalties,
           const Eigen::VectorXd& capacities, const Eigen::MatrixXd& alpha, const Eigen::MatrixXi& forward,
           const Eigen::MatrixXi& backward, const Eigen::MatrixXd& initial, int ticks, const std::string& mode,
           const std::string& form) {
            const SoftPenaltyProblem p = soft_problem(utility, prices, penalties, capacities);
            const DelayedDynamics d = dynamics(alpha, forward, backward, mode, form);
            const EquilibriumPoint eq = equilibrium_solve(p);
            const Trajectory tr = simulate_dynamics(p, d, {initial}, ticks);
            const StabilityReport rep = stability_check(p, d, eq);
            py::dict out;
            out["y"] = tr.y;
            out["distance"] = tr.distance_to(eq);
            out["equilibrium"] = equilibrium_dict(eq);
            out["margins"] = rep.margins;
            out["max_margin"] = rep.max_margin;
            out["stable"] = rep.stable;
            out["specialized_thresholds"] = rep.specialized_thresholds;
            out["general_thresholds"] = rep.general_thresholds;
            return out;
        },
        py::arg("utility"), py::arg("prices"), py::arg("penalties"), py::arg("capacities"), py::arg("alpha"),
        py::arg("forward"), py::arg("backward"), py::arg("initial"), py::arg("ticks"), py::arg("mode") = "job",
        py::arg("form") = "additive");

    m.def("build_features", &build_features, py::arg("cpu"), py::arg("memory"));
    m.def(
        "kmeans",
        [](const Eigen::MatrixXd& points, int K, std::uint64_t seed, int max_iterations) {
            std::vector<Eigen::VectorXd> rows;
            for (Eigen::Index r = 0; r < points.rows(); ++r) rows.push_back(points.row(r).transpose());
            const KMeansResult res = kmeans(rows, K, seed, max_iterations);
            Eigen::MatrixXd centroids(K, points.cols());
            for (int k = 0; k < K; ++k) centroids.row(k) = res.centroids[k].transpose();
            py::dict d;
            d["labels"] = res.labels;
            d["centroids"] = centroids;
            d["wcss"] = res.wcss;
            d["wcss_history"] = res.wcss_history;
            d["iterations"] = res.iterations;
            d["converged"] = res.converged;
            return d;
        },
        py::arg("points"), py::arg("K"), py::arg("seed") = 1, py::arg("max_iterations") = 300);
    m.def(
        "estimate_reward_table",
        [](const std::vector<std::tuple<int, int, double>>& samples, int I, int J) {
            std::vector<RewardSample> s;
            for (const auto& [i, j, cpi] : samples) s.push_back({i, j, cpi});
            const RewardTable t = estimate_reward_table(s, I, J);
            py::dict d;
            d["mean"] = t.mean;
            d["variance"] = t.variance;
            d["count"] = t.count;
            return d;
        },
        py::arg("samples"), py::arg("job_classes"), py::arg("machine_classes"));
    m.def(
        "generate_trace",
        [](const std::string& directory, std::uint64_t seed, int groups, int machine_types, double window) {
            SyntheticTraceOptions o;
            o.groups = groups;
            o.machine_types = machine_types;
            o.window_length = window;
            save_trace(directory, generate_trace(o, seed));
        },
        py::arg("directory"), py::arg("seed") = 1, py::arg("groups") = 5, py::arg("machine_types") = 4,
        py::arg("window") = 5000.0);
    m.def(
        "ingest_trace",
        [](const std::string& directory, int K, double step, double window, std::uint64_t seed) {
            const IngestOptions w{0.0, window};
            const Trace trace = load_trace(directory, w);
            ExportOptions o;
            o.job_classes = K;
            o.step_seconds = step;
            o.seed = seed;
            TraceSummary summary = export_scenario(trace, w, o);
            py::dict d;
            d["scenario"] = summary.scenario;
            d["rows_read"] = trace.rows_read;
            d["rows_parsed"] = trace.rows_parsed();
            d["rejected"] = trace.rejected.size();
            d["wcss_history"] = summary.clustering.wcss_history;
            return d;
        },
        py::arg("directory"), py::arg("K") = 5, py::arg("step") = 5.0, py::arg("window") = 5000.0,
        py::arg("seed") = 1);
}
