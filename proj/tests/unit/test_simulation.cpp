#include "../support/oracles.hpp"

#include "bisched/error.hpp"
#include "bisched/simulation.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace bisched;

namespace {

JobQueues queues_with(const std::vector<int>& lengths) {
    JobQueues q(lengths.size());
    std::uint64_t id = 0;
    for (std::size_t i = 0; i < lengths.size(); ++i)
        for (int k = 0; k < lengths[i]; ++k) q[i].push_back(Job{id++, static_cast<int>(i)});
    return q;
}

Scenario single_pair_scenario() {
    Scenario s;
    s.theta = Eigen::MatrixXd::Ones(1, 1);
    JobClass job;
    job.feature = Eigen::VectorXd::Ones(1);
    job.arrival_rate = 1.0;
    s.jobs.push_back(job);
    ServerClass server;
    server.feature = Eigen::VectorXd::Constant(1, 0.5);
    server.capacity = 2;
    s.servers.push_back(server);
    s.config.V = 1.0;
    s.config.horizon = 20;
    return s;
}

Scenario small_synthetic(long horizon) {
    SyntheticOptions o;
    o.job_classes = 4;
    o.total_servers = 4;
    o.horizon = horizon;
    return make_synthetic_scenario(o, 3);
}

void check_conservation(const MetricsLog& log) {
    REQUIRE_FALSE(log.steps.empty());
    CHECK(log.steps.front().queue == log.initial_arrivals);
    for (std::size_t k = 0; k < log.steps.size(); ++k) {
        const StepMetrics& m = log.steps[k];
        for (std::size_t j = 0; j < m.capacity.size(); ++j) CHECK(m.assignments[j] <= m.capacity[j]);
        for (std::size_t i = 0; i < m.queue.size(); ++i) CHECK(m.departures[i] <= m.queue[i]);
        if (k + 1 == log.steps.size()) break;
        const StepMetrics& next = log.steps[k + 1];
        for (std::size_t i = 0; i < m.queue.size(); ++i)
            CHECK(next.queue[i] == m.queue[i] + m.arrivals[i] - m.departures[i]);
    }
}

}  // namespace

TEST_CASE("randomized allocation: degenerate cases") {
    Rng rng = make_rng(1);
    const JobQueues one = queues_with({1});
    const auto full = randomized_allocation(Eigen::MatrixXd::Constant(1, 1, 3.0), one, {3}, 1, rng);
    REQUIRE(full.size() == 3);
    for (const auto& rec : full) CHECK(rec.job_id == 0);

    const auto none = randomized_allocation(Eigen::MatrixXd::Zero(1, 1), one, {3}, 1, rng);
    for (const auto& rec : none) CHECK(rec.job_id == kNoJob);

    CHECK_THROWS_AS(randomized_allocation(Eigen::MatrixXd::Constant(1, 1, 3.5), one, {3}, 1, rng), ValidationError);
}

TEST_CASE("randomized allocation frequencies") {
    Rng rng = make_rng(5);
    const JobQueues q = queues_with({2, 2});
    Eigen::MatrixXd y(2, 1);
    y << 1.0, 0.0; // n = 1: job 0 and job 1 each with probability 1/2
    const int draws = 100000;
    std::map<std::int64_t, int> hits;
    for (int k = 0; k < draws; ++k)
        for (const auto& rec : randomized_allocation(y, q, {1}, 1, rng)) ++hits[rec.job_id];
    for (std::int64_t id : {0, 1}) CHECK(std::abs(hits[id] / double(draws) - 0.5) <= oracles::three_sigma(0.5, draws));
    CHECK(hits.count(2) == 0);
    CHECK(hits.count(3) == 0);

    Eigen::MatrixXd mixed(2, 1);
    mixed << 0.6, 0.2; // per job 0.3, 0.3, 0.1, 0.1 and idle 0.2
    hits.clear();
    for (int k = 0; k < draws; ++k)
        for (const auto& rec : randomized_allocation(mixed, q, {1}, 1, rng)) ++hits[rec.job_id];
    const std::map<std::int64_t, double> expected{{0, 0.3}, {1, 0.3}, {2, 0.1}, {3, 0.1}, {kNoJob, 0.2}};
    for (const auto& [id, p] : expected) CHECK(std::abs(hits[id] / double(draws) - p) <= oracles::three_sigma(p, draws));
}

TEST_CASE("departures") {
    std::vector<JobClass> classes(1);
    classes[0].service_rate = 0.5;
    std::vector<AssignmentRecord> twice(2);
    for (int l = 0; l < 2; ++l) twice[l] = AssignmentRecord{1, 0, l, 7, 0, 0.0};
    Rng rng = make_rng(9);
    const int runs = 100000;
    int left = 0;
    for (int k = 0; k < runs; ++k) left += departures(twice, classes, rng).size() == 1 ? 1 : 0;
    CHECK(std::abs(left / double(runs) - 0.75) <= oracles::three_sigma(0.75, runs));

    classes[0].service_rate = 1.0;
    CHECK(departures(twice, classes, rng) == std::vector<std::uint64_t>{7});
    CHECK(departures({}, classes, rng).empty());
    std::vector<AssignmentRecord> idle(1);
    CHECK(departures(idle, classes, rng).empty());
}

TEST_CASE("arrivals") {
    std::vector<JobClass> classes(2);
    classes[0].arrival_rate = 0.3;
    classes[1].arrival_rate = 0.2;
    JobQueues q(2);
    std::uint64_t next = 0;
    Rng rng = make_rng(13);
    const int steps = 100000;
    for (int k = 0; k < steps; ++k) arrivals(q, classes, next, rng);
    const double total = static_cast<double>(q[0].size() + q[1].size());
    CHECK(std::abs(total / steps - 0.5) <= oracles::three_sigma(0.5, steps));
    CHECK(std::abs(q[0].size() / total - 0.6) <= oracles::three_sigma(0.6, total));
    CHECK(next == q[0].size() + q[1].size());

    std::vector<JobClass> single(1);
    single[0].arrival_rate = 1.0;
    JobQueues one(1);
    for (int k = 0; k < 50; ++k) CHECK(arrivals(one, single, next, rng) == 0);
    CHECK(one[0].size() == 50);

    std::vector<JobClass> silent(1);
    silent[0].arrival_rate = 0.0;
    JobQueues empty(1);
    for (int k = 0; k < 50; ++k) CHECK(arrivals(empty, silent, next, rng) == -1);
}

TEST_CASE("empty system step") {
    Scenario s = small_synthetic(50);
    for (auto& job : s.jobs) job.arrival_rate = 1e-4;
    for (std::uint64_t seed = 1; seed < 20; ++seed) {
        Simulator sim(s, Policy::Sabr, 50, seed);
        if (sim.queue_lengths() != std::vector<int>(4, 0)) continue;
        sim.step();
        const StepMetrics& m = sim.log().steps.front();
        CHECK(m.queue_total() == 0);
        CHECK(m.assignment_total() == 0);
        CHECK(m.departure_total() == 0);
        CHECK(m.expected_reward == 0.0);
        CHECK(m.holding_cost == 0.0);
        CHECK(m.arrival_total() <= 1);
        return;
    }
    FAIL("no seed produced an empty first step");
}

TEST_CASE("run contract") {
    const Scenario s = small_synthetic(60);
    CHECK(run(s, Policy::Sabr, 0, 1).steps.empty());
    const MetricsLog a = run(s, Policy::Sabr, 60, 4);
    const MetricsLog b = run(s, Policy::Sabr, 60, 4);
    CHECK(a == b);
    CHECK(a.steps.size() == 60);
    CHECK_FALSE(a == run(s, Policy::Sabr, 60, 5));
    for (Policy p : {Policy::Sabr, Policy::WeightedSabr, Policy::SwitchingSabr, Policy::OracleInformed,
                     Policy::NoLearning, Policy::PerJobUcb})
        check_conservation(run(s, p, 60, 2));
}

TEST_CASE("single job step reproduces the closed form") {
    const Scenario s = single_pair_scenario();
    Simulator sim(s, Policy::OracleInformed, 20, 1);
    REQUIRE(sim.queue_lengths() == std::vector<int>{1});
    sim.step();
    AllocationProblem p;
    p.weights = Eigen::VectorXd::Ones(1);
    p.queues = Eigen::VectorXd::Ones(1);
    p.estimates = Eigen::MatrixXd::Constant(1, 1, 0.5);
    p.capacities = Eigen::VectorXd::Constant(1, 2.0);
    p.V = 1.0;
    const Allocation exact = closed_form_single_server(p);
    CHECK(sim.last_allocation()(0, 0) == doctest::Approx(exact.y(0, 0)).epsilon(1e-7));
    CHECK(sim.last_allocation()(0, 0) == doctest::Approx(1.0 / 0.7).epsilon(1e-7));
}

TEST_CASE("capacity schedules in runs") {
    Scenario fixed = small_synthetic(40);
    Scenario constant = fixed;
    std::vector<int> caps;
    for (const auto& server : fixed.servers) caps.push_back(server.capacity);
    constant.schedule.rows = {caps};
    CHECK(run(fixed, Policy::Sabr, 40, 3) == run(constant, Policy::Sabr, 40, 3));

    Scenario varying = fixed;
    varying.schedule.rows = {caps, std::vector<int>(caps.size(), caps[0] + 1)};
    const MetricsLog log = run(varying, Policy::Sabr, 40, 3);
    check_conservation(log);
    CHECK(log.steps[0].capacity == caps);
    CHECK(log.steps[1].capacity == varying.schedule.rows[1]);

    varying.schedule.rows = {std::vector<int>(caps.size(), 0)};
    CHECK_THROWS_AS(run(varying, Policy::Sabr, 40, 3), ValidationError);
}

TEST_CASE("oracle-informed regret grows slower than SABR") {
    const Scenario s = make_synthetic_scenario(SyntheticOptions{}, 1);
    double oracle = 0.0, sabr = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        oracle += run(s, Policy::OracleInformed, 500, seed).final_regret();
        sabr += run(s, Policy::Sabr, 500, seed).final_regret();
    }
    CHECK(oracle < sabr);
}
