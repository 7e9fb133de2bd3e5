#include "bisched/model.hpp"

#include "bisched/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace bisched {

namespace {

constexpr double kNormSlack = 1e-9;

std::string describe(const char* what, int index) {
    std::ostringstream os;
    os << what << ' ' << index;
    return os.str();
}

}  // namespace

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

const std::vector<int>& CapacitySchedule::at(long t) const {
    if (rows.empty()) throw ValidationError("capacity schedule is empty");
    if (t < 1) throw ValidationError("capacity schedule queried at t < 1");
    return rows[static_cast<std::size_t>((t - 1) % static_cast<long>(rows.size()))];
}

int CapacitySchedule::min_total() const {
    int best = std::numeric_limits<int>::max();
    for (const auto& row : rows) best = std::min(best, std::accumulate(row.begin(), row.end(), 0));
    return rows.empty() ? 0 : best;
}

int CapacitySchedule::max_total() const {
    int best = 0;
    for (const auto& row : rows) best = std::max(best, std::accumulate(row.begin(), row.end(), 0));
    return best;
}

double NoiseLaw::sample(Rng& rng) const {
    if (scale <= 0.0) return 0.0;
    if (kind == NoiseKind::Gaussian) return std::normal_distribution<double>(0.0, scale)(rng);
    return std::uniform_real_distribution<double>(-scale, scale)(rng);
}

std::string to_string(Policy policy) {
    switch (policy) {
        case Policy::Sabr: return "sabr";
        case Policy::WeightedSabr: return "wsabr";
        case Policy::SwitchingSabr: return "switching";
        case Policy::OracleInformed: return "oracle";
        case Policy::NoLearning: return "nolearn";
        case Policy::PerJobUcb: return "perjob";
    }
    return "unknown";
}

Policy parse_policy(const std::string& name) {
    for (auto p : {Policy::Sabr, Policy::WeightedSabr, Policy::SwitchingSabr, Policy::OracleInformed,
                   Policy::NoLearning, Policy::PerJobUcb}) {
        if (to_string(p) == name) return p;
    }
    throw ValidationError("unknown policy '" + name +
                          "' (expected sabr, wsabr, switching, oracle, nolearn or perjob)");
}

double Scenario::total_arrival_rate() const {
    double total = 0.0;
    for (const auto& job : jobs) total += job.arrival_rate;
    return total;
}

double Scenario::total_traffic() const {
    double total = 0.0;
    for (const auto& job : jobs) total += job.traffic_intensity();
    return total;
}

int Scenario::total_capacity() const {
    int total = 0;
    for (const auto& server : servers) total += server.capacity;
    return total;
}

int Scenario::min_capacity() const { return schedule.empty() ? total_capacity() : schedule.min_total(); }

int Scenario::max_capacity() const { return schedule.empty() ? total_capacity() : schedule.max_total(); }

double Scenario::min_service_rate() const {
    double best = 1.0;
    for (const auto& job : jobs) best = std::min(best, job.service_rate);
    return best;
}

bool Scenario::identical_service_rates() const {
    return std::all_of(jobs.begin(), jobs.end(),
                       [&](const JobClass& job) { return job.service_rate == jobs.front().service_rate; });
}

std::vector<int> Scenario::capacities_at(long t) const {
    if (!schedule.empty()) return schedule.at(t);
    std::vector<int> out;
    out.reserve(servers.size());
    for (const auto& server : servers) out.push_back(server.capacity);
    return out;
}

double Scenario::confidence_kappa() const {
    if (config.kappa) return *config.kappa;
    if (reward_table) return std::sqrt(std::max(0.0, reward_table->variance.maxCoeff()));
    return noise.sub_gaussian_parameter();
}

double Scenario::default_zeta() const {
    if (config.zeta) return *config.zeta;
    return bound * max_capacity();
}

Eigen::VectorXd vectorize_outer(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    if (u.size() != v.size()) throw ValidationError("vectorize_outer: feature lengths differ");
    const Eigen::Index d = u.size();
    Eigen::VectorXd w(d * d);
    for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index b = 0; b < d; ++b) w[a * d + b] = u[a] * v[b];
    return w;
}

Eigen::VectorXd vectorize(const Eigen::MatrixXd& theta) {
    const Eigen::Index d = theta.rows();
    Eigen::VectorXd out(theta.size());
    for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index b = 0; b < theta.cols(); ++b) out[a * theta.cols() + b] = theta(a, b);
    return out;
}

BilinearEnvironment::BilinearEnvironment(const Scenario& scenario)
    : dim_(scenario.dim()), bound_(scenario.bound), theta_(vectorize(scenario.theta)), noise_(scenario.noise) {
    const int I = scenario.job_count();
    const int J = scenario.server_count();
    means_.resize(I, J);
    stddev_ = Eigen::MatrixXd::Constant(I, J, noise_.scale);
    features_.reserve(static_cast<std::size_t>(I * J));
    for (int i = 0; i < I; ++i) {
        for (int j = 0; j < J; ++j) {
            features_.push_back(vectorize_outer(scenario.jobs[i].feature, scenario.servers[j].feature));
            means_(i, j) = features_.back().dot(theta_);
        }
    }
    if (scenario.reward_table) {
        tabular_ = true;
        means_ = scenario.reward_table->mean;
        stddev_ = scenario.reward_table->variance.cwiseMax(0.0).cwiseSqrt();
    }
}

const Eigen::VectorXd& BilinearEnvironment::feature(int i, int j) const {
    return features_[static_cast<std::size_t>(i * server_classes() + j)];
}

double BilinearEnvironment::mean_reward(int i, int j) const {
    if (i < 0 || i >= job_classes() || j < 0 || j >= server_classes())
        throw ValidationError("mean_reward: class id out of range");
    return means_(i, j);
}

double BilinearEnvironment::sample_reward(int i, int j, Rng& rng) const {
    const double mean = mean_reward(i, j);
    if (tabular_) {
        const double sd = stddev_(i, j);
        return sd > 0.0 ? mean + std::normal_distribution<double>(0.0, sd)(rng) : mean;
    }
    return mean + noise_.sample(rng);
}

bool is_stable(const Scenario& scenario) {
    const double lambda = scenario.total_arrival_rate();
    const double rho = scenario.total_traffic();
    return 2.0 * lambda / scenario.min_service_rate() - rho < scenario.min_capacity();
}

void validate(const Scenario& s) {
    const int d = s.dim();
    const double a = s.bound;
    if (s.jobs.empty()) throw ValidationError("scenario has no job classes");
    if (s.servers.empty()) throw ValidationError("scenario has no server classes");
    if (d < 1 || s.theta.cols() != d) throw ValidationError("theta must be a non-empty square matrix");
    if (!(a > 0.0)) throw ValidationError("bound a must be positive");
    const double root_a = std::sqrt(a);

    double lambda = 0.0;
    for (int i = 0; i < s.job_count(); ++i) {
        const auto& job = s.jobs[i];
        if (job.feature.size() != d) throw ValidationError(describe("feature length mismatch for job class", i));
        if (!(job.arrival_rate > 0.0 && job.arrival_rate <= 1.0))
            throw ValidationError(describe("arrival rate outside (0, 1] for job class", i));
        if (!(job.service_rate > 0.0 && job.service_rate <= 1.0))
            throw ValidationError(describe("service rate outside (0, 1] for job class", i));
        if (!(job.weight > 0.0)) throw ValidationError(describe("non-positive weight for job class", i));
        if (!(job.holding_cost > 0.0)) throw ValidationError(describe("non-positive holding cost for job class", i));
        if (job.feature.norm() > root_a + kNormSlack)
            throw ValidationError(describe("feature norm exceeds sqrt(a) for job class", i));
        if (job.service_rate * static_cast<double>(s.config.horizon) < 1.0)
            throw ValidationError(describe("mean service time exceeds the horizon for job class", i));
        lambda += job.arrival_rate;
    }
    if (lambda > 1.0 + 1e-12) throw ValidationError("total arrival rate exceeds one arrival per step");

    for (int j = 0; j < s.server_count(); ++j) {
        const auto& server = s.servers[j];
        if (server.feature.size() != d) throw ValidationError(describe("feature length mismatch for server class", j));
        if (server.capacity < 1) throw ValidationError(describe("capacity below 1 for server class", j));
        if (server.feature.norm() > root_a + kNormSlack)
            throw ValidationError(describe("feature norm exceeds sqrt(a) for server class", j));
    }
    for (const auto& job : s.jobs)
        for (const auto& server : s.servers)
            if (job.feature.norm() * server.feature.norm() > root_a + kNormSlack)
                throw ValidationError("assignment feature vec(u v^T) has norm above sqrt(a)");

    if (s.reward_table) {
        const auto& table = *s.reward_table;
        if (table.mean.rows() != s.job_count() || table.mean.cols() != s.server_count() ||
            table.variance.rows() != s.job_count() || table.variance.cols() != s.server_count())
            throw ValidationError("reward table dimensions do not match the classes");
        if ((table.variance.array() < 0.0).any()) throw ValidationError("negative variance in reward table");
        if (table.mean.cwiseAbs().maxCoeff() > a + kNormSlack)
            throw ValidationError("reward table mean outside [-a, a]");
    } else if (vectorize(s.theta).norm() > root_a + kNormSlack) {
        throw ValidationError("||theta|| exceeds sqrt(a)");
    }

    if (!s.schedule.empty()) {
        for (const auto& row : s.schedule.rows) {
            if (static_cast<int>(row.size()) != s.server_count())
                throw ValidationError("capacity schedule row has the wrong number of server classes");
            if (std::any_of(row.begin(), row.end(), [](int n) { return n < 0; }))
                throw ValidationError("negative capacity in schedule");
        }
        if (s.schedule.min_total() < 1) throw ValidationError("capacity schedule has a step with no servers");
    }

    const auto& c = s.config;
    if (!(c.gamma > a)) throw ValidationError("gamma must exceed the reward bound a");
    if (c.horizon < 1) throw ValidationError("horizon must be positive");
    if (c.horizon < s.max_capacity()) throw ValidationError("horizon must be at least the number of servers");
    if (c.V && !(*c.V > 0.0)) throw ValidationError("V must be positive");
    if (c.zeta && !(*c.zeta > 0.0)) throw ValidationError("zeta must be positive");
    if (c.kappa && *c.kappa < 0.0) throw ValidationError("kappa must be nonnegative");
    if (c.switch_threshold < 0.0) throw ValidationError("switch threshold must be nonnegative");
    if (s.noise.scale < 0.0) throw ValidationError("noise scale must be nonnegative");
    if (!is_stable(s)) throw ValidationError("stability condition 2*lambda/mu_min - rho < n_min violated");
}

double marginal_cost_ratio(double bound, double gamma) {
    if (!(gamma > bound && bound > 0.0)) throw ValidationError("marginal cost ratio needs 0 < a < gamma");
    return (gamma + bound) / (gamma - bound);
}

namespace {

struct WeightStats {
    double min_weight = std::numeric_limits<double>::infinity();
    double max_weight = 0.0;
    double sum_weight = 0.0;
    double min_normalized_traffic = std::numeric_limits<double>::infinity(); // min rho_i / w_i
};

WeightStats weight_stats(const Scenario& s) {
    WeightStats out;
    for (const auto& job : s.jobs) {
        out.min_weight = std::min(out.min_weight, job.weight);
        out.max_weight = std::max(out.max_weight, job.weight);
        out.sum_weight += job.weight;
        out.min_normalized_traffic = std::min(out.min_normalized_traffic, job.traffic_intensity() / job.weight);
    }
    return out;
}

}  // namespace

double recommended_v(const Scenario& s) {
    const double gamma = s.config.gamma;
    const double c = marginal_cost_ratio(s.bound, gamma);
    const double n = s.max_capacity();
    const double alpha1 = gamma * gamma * n;
    const double alpha3 = c * c * n * n;
    const auto w = weight_stats(s);
    if (!(w.min_normalized_traffic > 0.0)) throw ValidationError("recommended_v: minimum traffic intensity is zero");
    return std::sqrt((alpha3 / w.min_normalized_traffic + w.sum_weight) * s.min_service_rate() * w.min_weight / alpha1);
}

double traffic_agnostic_v(const Scenario& s, long horizon) {
    const double gamma = s.config.gamma;
    const double c = marginal_cost_ratio(s.bound, gamma);
    const double n = s.max_capacity();
    const auto w = weight_stats(s);
    return std::sqrt((c * c * n * n + w.sum_weight / w.min_weight) * s.min_service_rate() / (gamma * gamma * n)) *
           std::sqrt(static_cast<double>(horizon));
}

TheoremBounds theorem_bounds(const Scenario& s, double V) {
    if (!is_stable(s)) throw ValidationError("theorem_bounds: stability condition violated");
    const double a = s.bound;
    const double gamma = s.config.gamma;
    const double c = marginal_cost_ratio(a, gamma);
    const double n_max = s.max_capacity();
    const double n_min = s.min_capacity();
    const double rho = s.total_traffic();
    const double effective_load = (2.0 * s.total_arrival_rate() / s.min_service_rate() - rho) / n_min;
    if (!(rho < n_min)) throw ValidationError("theorem_bounds: rho must be below n_min");

    TheoremBounds out;
    out.alpha1 = gamma * gamma * n_max;
    out.alpha2 = gamma * c * n_max * n_max / (1.0 - effective_load);
    out.alpha3 = c * c * n_max * n_max;
    out.alpha4 = a * std::sqrt(n_max);
    out.alpha5 = a * n_max;

    const auto w = weight_stats(s);
    double min_ratio = std::numeric_limits<double>::infinity(); // min_i w_i / c_i
    double max_cost = 0.0;
    for (const auto& job : s.jobs) {
        min_ratio = std::min(min_ratio, job.weight / job.holding_cost);
        max_cost = std::max(max_cost, job.holding_cost);
    }
    const double saturation = (gamma + a) * V * n_max;
    const double collision = 2.0 * c * n_max * n_max / (1.0 - rho / n_min) * w.max_weight;
    const double tail = (1.0 + rho / n_min) / (1.0 - effective_load);

    out.tau1 = saturation / min_ratio;
    out.tau2 = collision / min_ratio;
    out.holding_cost_bound = std::max(out.tau1, out.tau2) + tail * max_cost + max_cost;
    out.queue_bound = std::max(saturation, collision) / w.min_weight + tail + 1.0;
    out.recommended_v = recommended_v(s);
    return out;
}

Scenario make_synthetic_scenario(const SyntheticOptions& o, std::uint64_t seed) {
    if (o.job_classes < 1 || o.server_classes < 1 || o.dim < 1 || o.total_servers < o.server_classes)
        throw ValidationError("synthetic scenario: invalid class counts");
    Rng rng = make_rng(seed, 0x5ce7a110ULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto random_unit_vector = [&](int n) {
        Eigen::VectorXd v(n);
        for (int k = 0; k < n; ++k) v[k] = unit(rng);
        return Eigen::VectorXd(v / v.norm());
    };

    Scenario s;
    s.name = "synthetic";
    s.bound = o.bound;
    const double feature_scale = std::pow(o.bound, 0.25);
    for (int i = 0; i < o.job_classes; ++i) {
        JobClass job;
        job.feature = random_unit_vector(o.dim) * feature_scale;
        job.service_rate = o.service_rate;
        job.arrival_rate = o.total_traffic / o.job_classes * o.service_rate;
        s.jobs.push_back(std::move(job));
    }
    for (int j = 0; j < o.server_classes; ++j) {
        ServerClass server;
        server.feature = random_unit_vector(o.dim) * feature_scale;
        server.capacity = o.total_servers / o.server_classes + (j < o.total_servers % o.server_classes ? 1 : 0);
        s.servers.push_back(std::move(server));
    }
    const Eigen::VectorXd theta = random_unit_vector(o.dim * o.dim) * std::sqrt(o.bound);
    s.theta.resize(o.dim, o.dim);
    for (int a = 0; a < o.dim; ++a)
        for (int b = 0; b < o.dim; ++b) s.theta(a, b) = theta[a * o.dim + b];
    s.noise = NoiseLaw{NoiseKind::Gaussian, std::sqrt(o.noise_variance)};
    s.config.gamma = o.gamma;
    s.config.horizon = o.horizon;
    return s;
}

}  // namespace bisched
