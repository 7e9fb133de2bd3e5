#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace bisched {

/// Ridge-regression state Lambda = zeta I + sum w w^T, b = sum w xi, kept with
/// the inverse updated by Sherman-Morrison and the log-determinant tracked
/// through the rank-one determinant identity.
class RegularizedDesign {
public:
    RegularizedDesign(int dim, double zeta);

    void update(const Eigen::VectorXd& w, double xi);

    Eigen::VectorXd theta_hat() const { return inv_lambda_ * b_; }
    /// sqrt(w^T Lambda^{-1} w)
    double inverse_norm(const Eigen::VectorXd& w) const;
    /// sqrt(x^T Lambda x)
    double lambda_norm(const Eigen::VectorXd& x) const;

    int dim() const { return static_cast<int>(b_.size()); }
    double zeta() const { return zeta_; }
    const Eigen::MatrixXd& inv_lambda() const { return inv_lambda_; }
    const Eigen::MatrixXd& lambda() const { return lambda_; }
    const Eigen::VectorXd& b() const { return b_; }
    double log_det_lambda() const { return log_det_; }
    double det_lambda() const;
    long update_count() const { return update_count_; }

    void save(std::ostream& out) const;
    static RegularizedDesign load(std::istream& in);

private:
    RegularizedDesign() = default;

    static constexpr long kSymmetrizeEvery = 10000;

    double zeta_ = 1.0;
    Eigen::MatrixXd inv_lambda_;
    Eigen::MatrixXd lambda_;
    Eigen::VectorXd b_;
    double log_det_ = 0.0;
    long update_count_ = 0;
};

struct ConfidenceParams {
    double kappa = 0.0; // sub-Gaussian noise parameter
    long horizon = 1;   // T
    double zeta = 1.0;
    int feature_dim = 1; // d; the design has dimension d^2
};

/// beta(t) = (kappa sqrt(d^2 log(t T)) + sqrt(zeta))^2 for 1 <= t <= T.
double beta(const ConfidenceParams& params, long t);

/// Value of max w^T theta' over the confidence ellipsoid at step t:
/// w^T theta_hat + ||w||_{Lambda^{-1}} sqrt(beta(t)).
double ucb_index(const RegularizedDesign& design, const ConfidenceParams& params, const Eigen::VectorXd& w, long t);

/// Same as ucb_index with theta_hat and sqrt(beta) already computed.
double ucb_index(const RegularizedDesign& design, const Eigen::VectorXd& theta_hat, double sqrt_beta,
                 const Eigen::VectorXd& w);

/// Clamp to [-a, a].
double truncated_estimate(double index, double bound);

/// Rarely-switching refresh: indices are recomputed at the first call and
/// whenever det(Lambda) > (1 + C) times its value at the last refresh.
class SwitchingIndexCache {
public:
    explicit SwitchingIndexCache(double threshold);

    /// `features[i * J + j]` holds w_ij. Returns the cached I x J index matrix.
    const Eigen::MatrixXd& maybe_refresh(const RegularizedDesign& design, const ConfidenceParams& params,
                                         const std::vector<Eigen::VectorXd>& features, int job_classes, long t);

    double threshold() const { return threshold_; }
    long refresh_count() const { return refresh_count_; }
    bool refreshed_last_call() const { return refreshed_last_; }
    const Eigen::MatrixXd& indices() const { return indices_; }

private:
    double threshold_;
    double log_det_at_refresh_ = 0.0;
    bool initialized_ = false;
    bool refreshed_last_ = false;
    long refresh_count_ = 0;
    Eigen::MatrixXd indices_;
};

}  // namespace bisched
