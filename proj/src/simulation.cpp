#include "bisched/simulation.hpp"

#include "bisched/error.hpp"
#include "bisched/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

namespace bisched {

std::vector<AssignmentRecord> randomized_allocation(const Eigen::MatrixXd& y, const JobQueues& queues,
                                                    const std::vector<int>& capacities, long t, Rng& rng) {
    const int I = static_cast<int>(queues.size());
    const int J = static_cast<int>(capacities.size());
    if (y.rows() != I || y.cols() != J) throw ValidationError("randomized_allocation: allocation shape mismatch");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<AssignmentRecord> records;
    std::vector<double> mass(I);
    for (int j = 0; j < J; ++j) {
        const int n = capacities[j];
        if (n <= 0) continue;
        double total = 0.0;
        for (int i = 0; i < I; ++i) {
            const double v = y(i, j);
            if (v < -1e-12) throw ValidationError("randomized_allocation: negative allocation");
            if (queues[i].empty() && v > 1e-12) throw ValidationError("randomized_allocation: allocation to an empty class");
            mass[i] = queues[i].empty() ? 0.0 : std::max(0.0, v) / n;
            total += mass[i];
        }
        if (total > 1.0 + 1e-9) throw ValidationError("randomized_allocation: slot selection mass exceeds 1");
        for (int l = 0; l < n; ++l) {
            AssignmentRecord rec;
            rec.t = t;
            rec.server_class = j;
            rec.slot = l;
            const double u = unit(rng);
            double cumulative = 0.0;
            for (int i = 0; i < I; ++i) {
                if (mass[i] <= 0.0) continue;
                cumulative += mass[i];
                if (u < cumulative) {
                    const auto& q = queues[i];
                    std::uniform_int_distribution<std::size_t> pick(0, q.size() - 1);
                    const Job& job = q[pick(rng)];
                    rec.job_id = static_cast<std::int64_t>(job.id);
                    rec.job_class = i;
                    break;
                }
            }
            records.push_back(rec);
        }
    }
    return records;
}

std::vector<std::uint64_t> departures(const std::vector<AssignmentRecord>& assignments,
                                      const std::vector<JobClass>& classes, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::uint64_t> out;
    std::unordered_set<std::uint64_t> seen;
    for (const auto& rec : assignments) {
        if (rec.job_id == kNoJob) continue;
        const bool done = unit(rng) < classes.at(static_cast<std::size_t>(rec.job_class)).service_rate;
        const auto id = static_cast<std::uint64_t>(rec.job_id);
        if (done && seen.insert(id).second) out.push_back(id);
    }
    return out;
}

void remove_jobs(JobQueues& queues, const std::vector<std::uint64_t>& ids) {
    if (ids.empty()) return;
    const std::unordered_set<std::uint64_t> gone(ids.begin(), ids.end());
    for (auto& q : queues) std::erase_if(q, [&](const Job& job) { return gone.count(job.id) > 0; });
}

int arrivals(JobQueues& queues, const std::vector<JobClass>& classes, std::uint64_t& next_id, Rng& rng) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double cumulative = 0.0;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        cumulative += classes[i].arrival_rate;
        if (u < cumulative) {
            queues[i].push_back(Job{next_id++, static_cast<int>(i)});
            return static_cast<int>(i);
        }
    }
    return -1;
}

int StepMetrics::queue_total() const { return std::accumulate(queue.begin(), queue.end(), 0); }
int StepMetrics::assignment_total() const { return std::accumulate(assignments.begin(), assignments.end(), 0); }
int StepMetrics::departure_total() const { return std::accumulate(departures.begin(), departures.end(), 0); }
int StepMetrics::arrival_total() const { return std::accumulate(arrivals.begin(), arrivals.end(), 0); }

double MetricsLog::cumulative_expected_reward() const {
    double total = 0.0;
    for (const auto& s : steps) total += s.expected_reward;
    return total;
}

double MetricsLog::mean_queue(long from, long to) const {
    double total = 0.0;
    long count = 0;
    for (const auto& s : steps) {
        if (s.t < from || s.t > to) continue;
        total += s.queue_total();
        ++count;
    }
    return count ? total / static_cast<double>(count) : 0.0;
}

double MetricsLog::mean_holding_cost(long from, long to) const {
    double total = 0.0;
    long count = 0;
    for (const auto& s : steps) {
        if (s.t < from || s.t > to) continue;
        total += s.holding_cost;
        ++count;
    }
    return count ? total / static_cast<double>(count) : 0.0;
}

bool MetricsLog::always_covered() const {
    return std::none_of(steps.begin(), steps.end(), [](const StepMetrics& s) { return s.theta_covered == 0; });
}

bool MetricsLog::operator==(const MetricsLog& o) const {
    if (policy != o.policy || seed != o.seed || V != o.V || oracle_value != o.oracle_value ||
        initial_arrivals != o.initial_arrivals || steps.size() != o.steps.size())
        return false;
    for (std::size_t k = 0; k < steps.size(); ++k) {
        const auto& a = steps[k];
        const auto& b = o.steps[k];
        if (a.t != b.t || a.queue != b.queue || a.arrivals != b.arrivals || a.departures != b.departures ||
            a.assignments != b.assignments || a.capacity != b.capacity || a.expected_reward != b.expected_reward ||
            a.realized_reward != b.realized_reward || a.holding_cost != b.holding_cost || a.regret != b.regret ||
            a.refresh_count != b.refresh_count || a.kkt_residual != b.kkt_residual ||
            a.solver_converged != b.solver_converged || a.theta_covered != b.theta_covered)
            return false;
    }
    return true;
}

Scenario effective_scenario(const Scenario& scenario, Policy policy) {
    Scenario s = scenario;
    if (policy == Policy::Sabr || policy == Policy::SwitchingSabr)
        for (auto& job : s.jobs) job.weight = 1.0;
    s.config.policy = policy;
    return s;
}

namespace {

Scenario prepared(const Scenario& scenario, Policy policy, long horizon) {
    if (horizon < 0) throw ValidationError("horizon must be nonnegative");
    Scenario s = effective_scenario(scenario, policy);
    if (horizon > 0) s.config.horizon = horizon;
    validate(s);
    return s;
}

}  // namespace

Simulator::Simulator(const Scenario& scenario, Policy policy, long horizon, std::uint64_t seed, SimOptions options)
    : scenario_(prepared(scenario, policy, horizon)),
      policy_(policy),
      horizon_(horizon),
      options_(options),
      env_(scenario_),
      arrival_rng_(make_rng(seed, 0)),
      assignment_rng_(make_rng(seed, 1)),
      reward_rng_(make_rng(seed, 2)),
      departure_rng_(make_rng(seed, 3)),
      V_(scenario_.config.V ? *scenario_.config.V : recommended_v(scenario_)),
      queues_(scenario_.jobs.size()) {
    const int I = scenario_.job_count();
    const int J = scenario_.server_count();
    y_ = Eigen::MatrixXd::Zero(I, J);
    estimates_ = Eigen::MatrixXd::Constant(I, J, std::numeric_limits<double>::quiet_NaN());

    if (learns_bilinear()) {
        const int d = scenario_.dim();
        confidence_ = ConfidenceParams{scenario_.confidence_kappa(), scenario_.config.horizon, scenario_.default_zeta(), d};
        design_.emplace(d * d, confidence_.zeta);
        const double C = scenario_.config.switch_threshold;
        if (policy_ == Policy::SwitchingSabr) switching_.emplace(C > 0.0 ? C : 1.0);
        else if (C > 0.0) switching_.emplace(C);
        features_.reserve(static_cast<std::size_t>(I * J));
        for (int i = 0; i < I; ++i)
            for (int j = 0; j < J; ++j) features_.push_back(env_.feature(i, j));
    }

    log_.policy = to_string(policy_);
    log_.seed = seed;
    log_.V = V_;
    log_.oracle_value = solve_oracle(oracle_problem(scenario_)).value;
    log_.initial_arrivals.assign(static_cast<std::size_t>(I), 0);
    const int first = arrivals(queues_, scenario_.jobs, next_id_, arrival_rng_);
    if (first >= 0) log_.initial_arrivals[static_cast<std::size_t>(first)] = 1;
    log_.steps.reserve(static_cast<std::size_t>(horizon_));
}

bool Simulator::learns_bilinear() const {
    return policy_ == Policy::Sabr || policy_ == Policy::WeightedSabr || policy_ == Policy::SwitchingSabr;
}

std::vector<int> Simulator::queue_lengths() const {
    std::vector<int> q;
    q.reserve(queues_.size());
    for (const auto& queue : queues_) q.push_back(static_cast<int>(queue.size()));
    return q;
}

void Simulator::refresh_estimates(const std::vector<int>& active) {
    const int J = scenario_.server_count();
    const double a = scenario_.bound;
    estimates_.setConstant(std::numeric_limits<double>::quiet_NaN());
    switch (policy_) {
        case Policy::OracleInformed:
            estimates_ = env_.mean_rewards().cwiseMax(-a).cwiseMin(a);
            return;
        case Policy::NoLearning:
            estimates_.setZero();
            return;
        case Policy::PerJobUcb: {
            const double log_t = std::log(static_cast<double>(t_));
            for (int i : active) {
                for (int j = 0; j < J; ++j) {
                    double total = 0.0;
                    for (const Job& job : queues_[static_cast<std::size_t>(i)]) {
                        auto& cells = per_job_[job.id];
                        if (cells.empty()) cells.resize(static_cast<std::size_t>(J));
                        const CellStats& c = cells[static_cast<std::size_t>(j)];
                        if (c.count == 0) {
                            total += a;
                        } else {
                            const double n = static_cast<double>(c.count);
                            total += truncated_estimate(c.sum / n + std::sqrt(2.0 * log_t / n), a);
                        }
                    }
                    estimates_(i, j) = total / static_cast<double>(queues_[static_cast<std::size_t>(i)].size());
                }
            }
            return;
        }
        default:
            break;
    }

    if (switching_) {
        const Eigen::MatrixXd& idx =
            switching_->maybe_refresh(*design_, confidence_, features_, scenario_.job_count(), t_);
        estimates_ = idx.unaryExpr([a](double v) { return truncated_estimate(v, a); });
        return;
    }
    if (active.empty()) return;
    const Eigen::VectorXd theta_hat = design_->theta_hat();
    const double sqrt_beta = std::sqrt(beta(confidence_, t_));
    for (int i : active)
        for (int j = 0; j < J; ++j)
            estimates_(i, j) = truncated_estimate(ucb_index(*design_, theta_hat, sqrt_beta, env_.feature(i, j)), a);
}

void Simulator::step() {
    if (done()) throw Error("simulation already reached its horizon");
    const int I = scenario_.job_count();
    const int J = scenario_.server_count();
    const long t = t_;

    StepMetrics m;
    m.t = t;
    m.capacity = scenario_.capacities_at(t);
    m.queue = queue_lengths();
    m.arrivals.assign(static_cast<std::size_t>(I), 0);
    m.departures.assign(static_cast<std::size_t>(I), 0);
    m.assignments.assign(static_cast<std::size_t>(J), 0);

    std::vector<int> active;
    for (int i = 0; i < I; ++i)
        if (m.queue[static_cast<std::size_t>(i)] > 0) active.push_back(i);
    std::vector<int> open;
    for (int j = 0; j < J; ++j)
        if (m.capacity[static_cast<std::size_t>(j)] > 0) open.push_back(j);

    // (1) estimates
    refresh_estimates(active);
    if (design_ && options_.track_coverage && !env_.tabular()) {
        const Eigen::VectorXd err = design_->theta_hat() - env_.theta();
        m.theta_covered = design_->lambda_norm(err) <= std::sqrt(beta(confidence_, t)) ? 1 : 0;
    }

    // (2) allocation over active classes and open server classes
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(I, J);
    if (!active.empty() && !open.empty()) {
        const auto nI = static_cast<Eigen::Index>(active.size());
        const auto nJ = static_cast<Eigen::Index>(open.size());
        AllocationProblem p;
        p.weights.resize(nI);
        p.queues.resize(nI);
        p.estimates.resize(nI, nJ);
        p.capacities.resize(nJ);
        p.gamma = scenario_.config.gamma;
        p.V = V_;
        p.bound = scenario_.bound;
        Eigen::MatrixXd warm(nI, nJ);
        for (Eigen::Index r = 0; r < nI; ++r) {
            const int i = active[static_cast<std::size_t>(r)];
            p.weights[r] = scenario_.jobs[static_cast<std::size_t>(i)].weight;
            p.queues[r] = m.queue[static_cast<std::size_t>(i)];
            for (Eigen::Index c = 0; c < nJ; ++c) {
                const int j = open[static_cast<std::size_t>(c)];
                p.estimates(r, c) = estimates_(i, j);
                warm(r, c) = y_(i, j);
            }
        }
        for (Eigen::Index c = 0; c < nJ; ++c) p.capacities[c] = m.capacity[static_cast<std::size_t>(open[c])];
        const Allocation sol = solve_allocation(p, options_.solver, &warm);
        m.kkt_residual = sol.kkt_residual;
        m.solver_converged = sol.converged;
        for (Eigen::Index r = 0; r < nI; ++r)
            for (Eigen::Index c = 0; c < nJ; ++c)
                y(active[static_cast<std::size_t>(r)], open[static_cast<std::size_t>(c)]) = sol.y(r, c);
        if (!switching_ && design_) ++refreshes_;
    }
    y_ = y;
    m.refresh_count = switching_ ? switching_->refresh_count() : refreshes_;

    const Eigen::MatrixXd& r = env_.mean_rewards();
    for (int i : active) m.expected_reward += r.row(i).dot(y.row(i));

    // (3) randomized assignment, (4) observation, (5) learning
    assignments_ = randomized_allocation(y, queues_, m.capacity, t, assignment_rng_);
    for (auto& rec : assignments_) {
        if (rec.job_id == kNoJob) continue;
        ++m.assignments[static_cast<std::size_t>(rec.server_class)];
        rec.reward = env_.sample_reward(rec.job_class, rec.server_class, reward_rng_);
        m.realized_reward += rec.reward;
        if (design_) design_->update(env_.feature(rec.job_class, rec.server_class), rec.reward);
        if (policy_ == Policy::PerJobUcb) {
            auto& cells = per_job_[static_cast<std::uint64_t>(rec.job_id)];
            if (cells.empty()) cells.resize(static_cast<std::size_t>(J));
            auto& c = cells[static_cast<std::size_t>(rec.server_class)];
            ++c.count;
            c.sum += rec.reward;
        }
    }

    // (6) departures
    departed_ = departures(assignments_, scenario_.jobs, departure_rng_);
    if (!departed_.empty()) {
        std::unordered_map<std::uint64_t, int> job_class;
        for (const auto& rec : assignments_)
            if (rec.job_id != kNoJob) job_class[static_cast<std::uint64_t>(rec.job_id)] = rec.job_class;
        for (auto id : departed_) {
            ++m.departures[static_cast<std::size_t>(job_class.at(id))];
            per_job_.erase(id);
        }
        remove_jobs(queues_, departed_);
    }

    // (7) arrivals for t + 1
    const int arrived = arrivals(queues_, scenario_.jobs, next_id_, arrival_rng_);
    if (arrived >= 0) m.arrivals[static_cast<std::size_t>(arrived)] = 1;

    // (8) metrics
    for (int i = 0; i < I; ++i)
        m.holding_cost += scenario_.jobs[static_cast<std::size_t>(i)].holding_cost * m.queue[static_cast<std::size_t>(i)];
    const double previous = log_.steps.empty() ? 0.0 : log_.steps.back().regret;
    m.regret = previous + log_.oracle_value - m.expected_reward;
    log_.steps.push_back(std::move(m));
    ++t_;
}

void Simulator::run() {
    while (!done()) step();
}

MetricsLog run(const Scenario& scenario, Policy policy, long horizon, std::uint64_t seed, SimOptions options) {
    Simulator sim(scenario, policy, horizon, seed, options);
    sim.run();
    return sim.log();
}

}  // namespace bisched
