#pragma once

#include <Eigen/Dense>

#include <functional>

namespace bisched {

/// Euclidean projection of x onto {z >= 0, sum(z) <= cap}, in place.
void project_capped_simplex(Eigen::Ref<Eigen::VectorXd> x, double cap);

struct AscentOptions {
    int max_iterations = 100000;
    double tolerance = 1e-8;   // on the caller's optimality measure
    double sufficient_ascent = 1e-4;
    int nonmonotone_memory = 10;
    double min_step = 1e-12;
    double max_step = 1e12;
};

struct AscentResult {
    int iterations = 0;
    bool converged = false;
    double measure = 0.0; // optimality measure at the returned point
};

struct AscentProblem {
    /// Objective to maximise; -infinity outside its domain.
    std::function<double(const Eigen::VectorXd&)> objective;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
    /// Projection onto the feasible set, in place.
    std::function<void(Eigen::VectorXd&)> project;
    /// Nonnegative optimality measure, zero at a maximiser.
    std::function<double(const Eigen::VectorXd&)> measure;
};

/// Spectral projected gradient ascent (Barzilai-Borwein steps with a
/// nonmonotone Armijo line search along the projected direction). `x` is
/// projected first and is left at the best point found by `measure`.
AscentResult projected_gradient_ascent(const AscentProblem& problem, Eigen::VectorXd& x,
                                       const AscentOptions& options = {});

}  // namespace bisched
