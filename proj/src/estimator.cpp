#include "bisched/estimator.hpp"

#include "bisched/error.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

namespace bisched {

RegularizedDesign::RegularizedDesign(int dim, double zeta)
    : zeta_(zeta),
      inv_lambda_(Eigen::MatrixXd::Identity(dim, dim) / zeta),
      lambda_(Eigen::MatrixXd::Identity(dim, dim) * zeta),
      b_(Eigen::VectorXd::Zero(dim)),
      log_det_(dim * std::log(zeta)) {
    if (dim < 1) throw ValidationError("design dimension must be positive");
    if (!(zeta > 0.0)) throw ValidationError("zeta must be positive");
}

void RegularizedDesign::update(const Eigen::VectorXd& w, double xi) {
    if (w.size() != b_.size()) throw ValidationError("design update: feature dimension mismatch");
    if (!w.allFinite() || !std::isfinite(xi)) throw ValidationError("design update: non-finite input");

    const Eigen::VectorXd z = inv_lambda_ * w;
    const double s = w.dot(z);
    inv_lambda_.noalias() -= (z * z.transpose()) / (1.0 + s);
    log_det_ += std::log1p(s);
    lambda_.noalias() += w * w.transpose();
    b_.noalias() += w * xi;
    ++update_count_;
    if (update_count_ % kSymmetrizeEvery == 0) {
        inv_lambda_ = (0.5 * (inv_lambda_ + inv_lambda_.transpose())).eval();
    }
}

double RegularizedDesign::inverse_norm(const Eigen::VectorXd& w) const {
    return std::sqrt(std::max(0.0, w.dot(inv_lambda_ * w)));
}

double RegularizedDesign::lambda_norm(const Eigen::VectorXd& x) const {
    return std::sqrt(std::max(0.0, x.dot(lambda_ * x)));
}

double RegularizedDesign::det_lambda() const { return std::exp(log_det_); }

void RegularizedDesign::save(std::ostream& out) const {
    const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
    out << "bisched-design 1\n" << dim() << ' ' << zeta_ << ' ' << update_count_ << ' ' << log_det_ << '\n';
    auto write_matrix = [&](const Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << m(r, c);
            out << '\n';
        }
    };
    write_matrix(inv_lambda_);
    write_matrix(lambda_);
    write_matrix(b_.transpose());
    out.precision(old_precision);
}

RegularizedDesign RegularizedDesign::load(std::istream& in) {
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "bisched-design" || version != 1) throw ParseError("not a design checkpoint");
    int dim = 0;
    RegularizedDesign design;
    in >> dim >> design.zeta_ >> design.update_count_ >> design.log_det_;
    if (!in || dim < 1) throw ParseError("corrupt design checkpoint header");
    design.inv_lambda_.resize(dim, dim);
    design.lambda_.resize(dim, dim);
    design.b_.resize(dim);
    for (Eigen::Index r = 0; r < dim; ++r)
        for (Eigen::Index c = 0; c < dim; ++c) in >> design.inv_lambda_(r, c);
    for (Eigen::Index r = 0; r < dim; ++r)
        for (Eigen::Index c = 0; c < dim; ++c) in >> design.lambda_(r, c);
    for (Eigen::Index k = 0; k < dim; ++k) in >> design.b_[k];
    if (!in) throw ParseError("truncated design checkpoint");
    return design;
}

double beta(const ConfidenceParams& p, long t) {
    if (t < 1 || t > p.horizon) throw ValidationError("beta: t outside [1, T]");
    const double d2 = static_cast<double>(p.feature_dim) * p.feature_dim;
    const double root = p.kappa * std::sqrt(d2 * std::log(static_cast<double>(t) * static_cast<double>(p.horizon))) +
                        std::sqrt(p.zeta);
    return root * root;
}

double ucb_index(const RegularizedDesign& design, const Eigen::VectorXd& theta_hat, double sqrt_beta,
                 const Eigen::VectorXd& w) {
    return w.dot(theta_hat) + design.inverse_norm(w) * sqrt_beta;
}

double ucb_index(const RegularizedDesign& design, const ConfidenceParams& params, const Eigen::VectorXd& w, long t) {
    return ucb_index(design, design.theta_hat(), std::sqrt(beta(params, t)), w);
}

double truncated_estimate(double index, double bound) { return std::clamp(index, -bound, bound); }

SwitchingIndexCache::SwitchingIndexCache(double threshold) : threshold_(threshold) {
    if (threshold < 0.0) throw ValidationError("switch threshold must be nonnegative");
}

const Eigen::MatrixXd& SwitchingIndexCache::maybe_refresh(const RegularizedDesign& design,
                                                          const ConfidenceParams& params,
                                                          const std::vector<Eigen::VectorXd>& features,
                                                          int job_classes, long t) {
    refreshed_last_ = false;
    if (initialized_ && !(design.log_det_lambda() > std::log1p(threshold_) + log_det_at_refresh_)) return indices_;

    const int server_classes = job_classes > 0 ? static_cast<int>(features.size()) / job_classes : 0;
    const Eigen::VectorXd theta_hat = design.theta_hat();
    const double sqrt_beta = std::sqrt(beta(params, t));
    indices_.resize(job_classes, server_classes);
    for (int i = 0; i < job_classes; ++i)
        for (int j = 0; j < server_classes; ++j)
            indices_(i, j) = ucb_index(design, theta_hat, sqrt_beta, features[i * server_classes + j]);
    log_det_at_refresh_ = design.log_det_lambda();
    initialized_ = true;
    refreshed_last_ = true;
    ++refresh_count_;
    return indices_;
}

}  // namespace bisched
