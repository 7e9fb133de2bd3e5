#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace bisched {

using Rng = std::mt19937_64;

/// Independent stream for run `stream` of a master seed.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

/// A class of jobs. The class id is its index in Scenario::jobs.
struct JobClass {
    Eigen::VectorXd feature;   // u_i
    double arrival_rate = 0.0; // lambda_i, probability per step
    double service_rate = 1.0; // mu_i, geometric service with mean 1/mu_i
    double weight = 1.0;       // w_i in the fairness term
    double holding_cost = 1.0; // c_i

    double traffic_intensity() const { return arrival_rate / service_rate; }
};

/// A class of identical servers. The class id is its index in Scenario::servers.
struct ServerClass {
    Eigen::VectorXd feature; // v_j
    int capacity = 1;        // n_j
};

/// Periodic availability pattern: at step t >= 1 the capacities are
/// rows[(t - 1) % rows.size()]. Empty means the fixed capacities apply.
struct CapacitySchedule {
    std::vector<std::vector<int>> rows;

    bool empty() const { return rows.empty(); }
    const std::vector<int>& at(long t) const;
    int min_total() const;
    int max_total() const;
};

enum class NoiseKind { Gaussian, Uniform };

/// Zero-mean sub-Gaussian reward noise. Gaussian uses `scale` as the
/// standard deviation; Uniform draws from [-scale, scale].
struct NoiseLaw {
    NoiseKind kind = NoiseKind::Gaussian;
    double scale = 0.0;

    /// kappa such that E[exp(s * eta)] <= exp(s^2 kappa^2 / 2).
    double sub_gaussian_parameter() const { return scale; }
    double sample(Rng& rng) const;
};

/// Per-cell reward statistics used instead of the bilinear means (trace replays).
struct RewardTable {
    Eigen::MatrixXd mean;
    Eigen::MatrixXd variance;
    Eigen::MatrixXi count;
};

enum class Policy {
    Sabr,           // unit weights
    WeightedSabr,   // scenario weights
    SwitchingSabr,  // unit weights, rarely switching estimator refresh
    OracleInformed, // true mean rewards, no learning
    NoLearning,     // estimates fixed at zero
    PerJobUcb,      // independent per-job estimates (baseline)
};

std::string to_string(Policy policy);
Policy parse_policy(const std::string& name);

struct SystemConfig {
    std::optional<double> V;     // defaults to recommended_v()
    double gamma = 1.2;
    std::optional<double> zeta;  // defaults to a * n (a * n_max with a schedule)
    long horizon = 500;
    std::uint64_t seed = 1;
    double switch_threshold = 0.0; // C; 0 refreshes whenever det(Lambda) grows
    std::optional<double> kappa;   // confidence-radius noise parameter override
    Policy policy = Policy::Sabr;
};

struct Scenario {
    std::string name = "scenario";
    std::vector<JobClass> jobs;
    std::vector<ServerClass> servers;
    Eigen::MatrixXd theta; // d x d
    double bound = 1.0;    // a
    NoiseLaw noise;
    std::optional<RewardTable> reward_table;
    CapacitySchedule schedule;
    SystemConfig config;

    int dim() const { return static_cast<int>(theta.rows()); }
    int job_count() const { return static_cast<int>(jobs.size()); }
    int server_count() const { return static_cast<int>(servers.size()); }

    double total_arrival_rate() const;
    double total_traffic() const;
    int total_capacity() const;
    int min_capacity() const;
    int max_capacity() const;
    double min_service_rate() const;
    bool identical_service_rates() const;
    std::vector<int> capacities_at(long t) const;

    double confidence_kappa() const;
    double default_zeta() const;
};

/// Row-major vec(u v^T): entry a*d + b equals u[a] * v[b].
Eigen::VectorXd vectorize_outer(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

/// Row-major vec(Theta), the same convention as vectorize_outer.
Eigen::VectorXd vectorize(const Eigen::MatrixXd& theta);

/// Immutable reward model of a scenario with precomputed w_ij and r_ij.
class BilinearEnvironment {
public:
    explicit BilinearEnvironment(const Scenario& scenario);

    int dim() const { return dim_; }
    int job_classes() const { return static_cast<int>(means_.rows()); }
    int server_classes() const { return static_cast<int>(means_.cols()); }
    double bound() const { return bound_; }
    const Eigen::VectorXd& theta() const { return theta_; }
    const NoiseLaw& noise() const { return noise_; }
    bool tabular() const { return tabular_; }

    const Eigen::VectorXd& feature(int i, int j) const;
    double mean_reward(int i, int j) const;
    double sample_reward(int i, int j, Rng& rng) const;
    const Eigen::MatrixXd& mean_rewards() const { return means_; }

private:
    int dim_;
    double bound_;
    Eigen::VectorXd theta_;
    NoiseLaw noise_;
    bool tabular_ = false;
    Eigen::MatrixXd means_;
    Eigen::MatrixXd stddev_;
    std::vector<Eigen::VectorXd> features_; // i * J + j
};

/// True when 2 lambda / mu_min - rho < n_min (reduces to rho < n for
/// identical service rates and fixed servers).
bool is_stable(const Scenario& scenario);

/// Throws ValidationError describing the first violated constraint.
void validate(const Scenario& scenario);

/// (gamma + a) / (gamma - a).
double marginal_cost_ratio(double bound, double gamma);

struct TheoremBounds {
    double alpha1 = 0, alpha2 = 0, alpha3 = 0, alpha4 = 0, alpha5 = 0;
    double tau1 = 0, tau2 = 0;
    double holding_cost_bound = 0; // sum_i c_i E[Q_i(t)]
    double queue_bound = 0;        // E[Q(t)], all c_i = 1
    double recommended_v = 0;
};

/// V minimising the regret bound given traffic intensities, using the
/// scenario's weights. Uses mu_min and n_max when rates differ or a
/// schedule is present.
double recommended_v(const Scenario& scenario);

/// V that needs no traffic-intensity knowledge; grows with sqrt(T).
double traffic_agnostic_v(const Scenario& scenario, long horizon);

/// Regret constants and holding-cost / queue-length bounds for the given V.
TheoremBounds theorem_bounds(const Scenario& scenario, double V);

struct SyntheticOptions {
    int job_classes = 10;
    int server_classes = 2;
    int dim = 2;
    int total_servers = 4;
    double total_traffic = 1.0;
    double service_rate = 1.0;
    double gamma = 1.2;
    double noise_variance = 0.01;
    double bound = 1.0;
    long horizon = 500;
};

/// Random instance: features and theta drawn from U[0,1], normalised to
/// unit norm; identical traffic intensities and per-class capacities.
Scenario make_synthetic_scenario(const SyntheticOptions& options, std::uint64_t seed);

}  // namespace bisched
