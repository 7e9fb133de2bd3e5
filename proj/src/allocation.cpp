#include "bisched/allocation.hpp"

#include "bisched/error.hpp"
#include "bisched/projected_gradient.hpp"

#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace bisched {

Eigen::VectorXd AllocationProblem::utility_coefficients() const {
    return weights.cwiseProduct(queues) / V;
}

Eigen::MatrixXd AllocationProblem::marginal_costs() const {
    return (-estimates).array() + gamma;
}

void validate(const AllocationProblem& p) {
    const int I = p.classes();
    const int J = p.servers();
    if (p.queues.size() != I || p.estimates.rows() != I || p.estimates.cols() != J)
        throw ValidationError("allocation problem: dimension mismatch");
    if (!(p.V > 0.0)) throw ValidationError("allocation problem: V must be positive");
    if (!(p.bound > 0.0)) throw ValidationError("allocation problem: bound must be positive");
    if (!(p.gamma > p.bound)) throw ValidationError("allocation problem: gamma must exceed the reward bound");
    for (int i = 0; i < I; ++i) {
        if (!(p.weights[i] > 0.0)) throw ValidationError("allocation problem: weights must be positive");
        if (!(p.queues[i] >= 1.0)) throw ValidationError("allocation problem: active classes need Q_i >= 1");
        for (int j = 0; j < J; ++j)
            if (!(std::abs(p.estimates(i, j)) <= p.bound))
                throw ValidationError("allocation problem: estimate outside [-a, a]");
    }
    for (int j = 0; j < J; ++j)
        if (!(p.capacities[j] > 0.0)) throw ValidationError("allocation problem: capacities must be positive");
}

double allocation_objective(const AllocationProblem& p, const Eigen::MatrixXd& y) {
    const Eigen::VectorXd c = p.utility_coefficients();
    const Eigen::VectorXd Y = y.rowwise().sum();
    double value = 0.0;
    for (int i = 0; i < p.classes(); ++i) {
        if (!(Y[i] > 0.0)) return -std::numeric_limits<double>::infinity();
        value += c[i] * std::log(Y[i]);
    }
    return value - p.marginal_costs().cwiseProduct(y).sum();
}

double kkt_residual(const AllocationProblem& p, const Eigen::MatrixXd& y, const Eigen::VectorXd& q,
                    const Eigen::MatrixXd& h) {
    const int I = p.classes();
    const int J = p.servers();
    if (y.rows() != I || y.cols() != J || q.size() != J || h.rows() != I || h.cols() != J)
        throw ValidationError("kkt_residual: dimension mismatch");
    if (I == 0 || J == 0) return 0.0;
    const Eigen::VectorXd c = p.utility_coefficients();
    const Eigen::MatrixXd pi = p.marginal_costs();
    const Eigen::VectorXd Y = y.rowwise().sum();

    double r = 0.0;
    for (int i = 0; i < I; ++i) {
        if (!(Y[i] > 0.0)) return std::numeric_limits<double>::infinity();
        for (int j = 0; j < J; ++j) {
            r = std::max(r, std::abs(c[i] / Y[i] - q[j] - pi(i, j) + h(i, j)));
            r = std::max({r, -y(i, j), -h(i, j), std::abs(h(i, j) * y(i, j))});
        }
    }
    for (int j = 0; j < J; ++j) {
        const double load = y.col(j).sum();
        r = std::max({r, load - p.capacities[j], -q[j], std::abs(q[j] * (p.capacities[j] - load))});
    }
    return r;
}

void recover_duals(const AllocationProblem& p, const Eigen::MatrixXd& y, double support_tol, Eigen::VectorXd& q,
                   Eigen::MatrixXd& h) {
    const int I = p.classes();
    const int J = p.servers();
    const Eigen::VectorXd c = p.utility_coefficients();
    const Eigen::MatrixXd pi = p.marginal_costs();
    const Eigen::VectorXd Y = y.rowwise().sum();
    Eigen::MatrixXd gap(I, J);
    for (int i = 0; i < I; ++i)
        for (int j = 0; j < J; ++j) gap(i, j) = c[i] / Y[i] - pi(i, j);
    q = Eigen::VectorXd::Zero(J);
    for (int j = 0; j < J; ++j)
        for (int i = 0; i < I; ++i)
            if (y(i, j) > support_tol) q[j] = std::max(q[j], gap(i, j));
    h.resize(I, J);
    for (int i = 0; i < I; ++i)
        for (int j = 0; j < J; ++j) h(i, j) = std::max(0.0, q[j] - gap(i, j));
}

namespace {

Allocation empty_allocation(const AllocationProblem& p) {
    Allocation a;
    a.y = Eigen::MatrixXd::Zero(p.classes(), p.servers());
    a.q = Eigen::VectorXd::Zero(p.servers());
    a.h = Eigen::MatrixXd::Zero(p.classes(), p.servers());
    return a;
}

// Natural residual of complementary slackness: max of min(q_j, slack_j) and
// min(h_ij, y_ij). The products in kkt_residual vanish quadratically at a
// degenerate optimum, where a price and its slack are both near zero.
double complementarity_gap(const AllocationProblem& p, const Eigen::MatrixXd& y, const Eigen::VectorXd& q,
                           const Eigen::MatrixXd& h) {
    double r = 0.0;
    for (int j = 0; j < p.servers(); ++j) {
        r = std::max(r, std::min(q[j], std::abs(p.capacities[j] - y.col(j).sum())));
        for (int i = 0; i < p.classes(); ++i) r = std::max(r, std::min(h(i, j), std::abs(y(i, j))));
    }
    return r;
}

void finish(const AllocationProblem& p, double support_tol, Allocation& a) {
    recover_duals(p, a.y, support_tol, a.q, a.h);
    a.kkt_residual = kkt_residual(p, a.y, a.q, a.h);
    a.objective = allocation_objective(p, a.y);
}

}  // namespace

Allocation solve_allocation(const AllocationProblem& p, const AllocationOptions& options,
                            const Eigen::MatrixXd* warm_start) {
    validate(p);
    if (!(options.tolerance > 0.0)) throw ValidationError("solve: tolerance must be positive");
    const int I = p.classes();
    const int J = p.servers();
    Allocation result = empty_allocation(p);
    if (I == 0 || J == 0) return result;

    const Eigen::VectorXd c = p.utility_coefficients();
    const Eigen::MatrixXd pi = p.marginal_costs();

    Eigen::MatrixXd y0(I, J);
    for (int i = 0; i < I; ++i)
        for (int j = 0; j < J; ++j)
            y0(i, j) = std::min(p.capacities[j] / I, c[i] / ((p.gamma + p.bound) * J));
    if (warm_start) {
        if (warm_start->rows() != I || warm_start->cols() != J)
            throw ValidationError("solve: warm start has the wrong shape");
        for (int i = 0; i < I; ++i)
            if (warm_start->row(i).cwiseMax(0.0).sum() > 0.0) y0.row(i) = warm_start->row(i).cwiseMax(0.0);
    }

    // Column-major flattening so every server column is a contiguous block.
    auto as_matrix = [&](const Eigen::VectorXd& x) { return Eigen::Map<const Eigen::MatrixXd>(x.data(), I, J); };

    AscentProblem problem;
    problem.objective = [&](const Eigen::VectorXd& x) { return allocation_objective(p, as_matrix(x)); };
    problem.gradient = [&](const Eigen::VectorXd& x) {
        const auto y = as_matrix(x);
        const Eigen::VectorXd Y = y.rowwise().sum();
        Eigen::VectorXd g(I * J);
        for (int j = 0; j < J; ++j)
            for (int i = 0; i < I; ++i) g[j * I + i] = c[i] / Y[i] - pi(i, j);
        return g;
    };
    problem.project = [&](Eigen::VectorXd& x) {
        for (int j = 0; j < J; ++j) project_capped_simplex(x.segment(j * I, I), p.capacities[j]);
    };
    problem.measure = [&](const Eigen::VectorXd& x) {
        const Eigen::MatrixXd y = as_matrix(x);
        Eigen::VectorXd q;
        Eigen::MatrixXd h;
        if ((y.rowwise().sum().array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
        recover_duals(p, y, options.tolerance, q, h);
        return std::max(kkt_residual(p, y, q, h), complementarity_gap(p, y, q, h));
    };

    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(y0.data(), I * J);
    AscentOptions ascent;
    ascent.max_iterations = options.max_iterations;
    ascent.tolerance = options.tolerance;
    const AscentResult r = projected_gradient_ascent(problem, x, ascent);

    result.y = as_matrix(x);
    result.iterations = r.iterations;
    finish(p, options.tolerance, result);
    result.converged = result.kkt_residual <= options.tolerance;
    return result;
}

Allocation closed_form_single_server(const AllocationProblem& p) {
    validate(p);
    if (p.servers() != 1) throw ValidationError("closed_form_single_server: exactly one server class required");
    const int I = p.classes();
    Allocation result = empty_allocation(p);
    if (I == 0) return result;

    const Eigen::VectorXd c = p.utility_coefficients();
    const Eigen::VectorXd pi = p.marginal_costs().col(0);
    const double n = p.capacities[0];
    auto demand = [&](double q) { return (c.array() / (pi.array() + q)).sum(); };

    double q = 0.0;
    if (demand(0.0) > n) {
        // demand(q) - n is decreasing with a sign change on [0, sum(c)/n].
        std::uintmax_t max_iter = 200;
        const auto [lo, hi] = boost::math::tools::toms748_solve([&](double s) { return demand(s) - n; }, 0.0,
                                                                c.sum() / n, boost::math::tools::eps_tolerance<double>(),
                                                                max_iter);
        q = 0.5 * (lo + hi);
    }
    for (int i = 0; i < I; ++i) result.y(i, 0) = c[i] / (pi[i] + q);
    result.q[0] = q;
    result.kkt_residual = kkt_residual(p, result.y, result.q, result.h);
    result.objective = allocation_objective(p, result.y);
    return result;
}

}  // namespace bisched
