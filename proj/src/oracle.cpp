#include "bisched/oracle.hpp"

#include "bisched/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace bisched {

namespace {

constexpr double kPivotTol = 1e-11;

class Tableau {
public:
    Tableau(const Eigen::MatrixXd& A, const Eigen::VectorXd& b)
        : m_(static_cast<int>(A.rows())), n_(static_cast<int>(A.cols())), t_(m_, n_ + m_), rhs_(b), basis_(m_) {
        t_.leftCols(n_) = A;
        t_.rightCols(m_).setIdentity();
        for (int r = 0; r < m_; ++r) basis_[r] = n_ + r;
    }

    bool is_artificial(int k) const { return k >= n_; }

    /// Runs Bland-rule pivots for max cost^T x. Returns false if unbounded.
    bool optimize(const Eigen::VectorXd& cost, bool allow_artificial) {
        for (;;) {
            int entering = -1;
            for (int k = 0; k < n_ + m_; ++k) {
                if (!allow_artificial && is_artificial(k)) continue;
                if (reduced_cost(cost, k) > kPivotTol) {
                    entering = k;
                    break;
                }
            }
            if (entering < 0) return true;
            double best = std::numeric_limits<double>::infinity();
            for (int r = 0; r < m_; ++r)
                if (t_(r, entering) > kPivotTol) best = std::min(best, rhs_[r] / t_(r, entering));
            if (!std::isfinite(best)) return false;
            int leaving = -1;
            for (int r = 0; r < m_; ++r) {
                if (t_(r, entering) <= kPivotTol || rhs_[r] / t_(r, entering) > best + kPivotTol) continue;
                if (leaving < 0 || basis_[r] < basis_[leaving]) leaving = r;
            }
            pivot(leaving, entering);
        }
    }

    void drive_out_artificials() {
        for (int r = 0; r < m_; ++r) {
            if (!is_artificial(basis_[r])) continue;
            for (int k = 0; k < n_; ++k) {
                if (std::abs(t_(r, k)) > kPivotTol) {
                    pivot(r, k);
                    break;
                }
            }
        }
    }

    double objective(const Eigen::VectorXd& cost) const {
        double v = 0.0;
        for (int r = 0; r < m_; ++r) v += cost[basis_[r]] * rhs_[r];
        return v;
    }

    Eigen::VectorXd solution() const {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n_);
        for (int r = 0; r < m_; ++r)
            if (!is_artificial(basis_[r])) x[basis_[r]] = std::max(0.0, rhs_[r]);
        return x;
    }

    const std::vector<int>& basis() const { return basis_; }

private:
    double reduced_cost(const Eigen::VectorXd& cost, int k) const {
        double d = cost[k];
        for (int r = 0; r < m_; ++r) d -= cost[basis_[r]] * t_(r, k);
        return d;
    }

    void pivot(int r, int k) {
        const double piv = t_(r, k);
        t_.row(r) /= piv;
        rhs_[r] /= piv;
        for (int s = 0; s < m_; ++s) {
            if (s == r) continue;
            const double f = t_(s, k);
            if (f == 0.0) continue;
            t_.row(s) -= f * t_.row(r);
            rhs_[s] -= f * rhs_[r];
        }
        basis_[r] = k;
    }

    int m_;
    int n_;
    Eigen::MatrixXd t_;
    Eigen::VectorXd rhs_;
    std::vector<int> basis_;
};

}  // namespace

LinearProgramResult simplex_maximize(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
    const int m = static_cast<int>(A.rows());
    const int n = static_cast<int>(A.cols());
    if (b.size() != m || c.size() != n) throw ValidationError("simplex: dimension mismatch");
    if ((b.array() < 0.0).any()) throw ValidationError("simplex: right-hand side must be nonnegative");

    LinearProgramResult result;
    Tableau tab(A, b);

    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n + m);
    phase1.tail(m).setConstant(-1.0);
    tab.optimize(phase1, true);
    if (tab.objective(phase1) < -1e-9 * (1.0 + b.lpNorm<1>())) return result;
    result.feasible = true;
    tab.drive_out_artificials();

    Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(n + m);
    phase2.head(n) = c;
    if (!tab.optimize(phase2, false)) {
        result.bounded = false;
        return result;
    }
    result.x = tab.solution();
    result.value = c.dot(result.x);

    // Duals from B^T y = c_B over the final basis.
    Eigen::MatrixXd B(m, m);
    Eigen::VectorXd cb(m);
    for (int r = 0; r < m; ++r) {
        const int k = tab.basis()[r];
        B.col(r) = k < n ? Eigen::VectorXd(A.col(k)) : Eigen::VectorXd(Eigen::VectorXd::Unit(m, k - n));
        cb[r] = phase2[k];
    }
    result.duals = B.transpose().fullPivLu().solve(cb);
    return result;
}

OracleProblem oracle_problem(const Scenario& scenario) {
    const BilinearEnvironment env(scenario);
    OracleProblem p;
    p.traffic.resize(scenario.job_count());
    for (int i = 0; i < scenario.job_count(); ++i) p.traffic[i] = scenario.jobs[i].traffic_intensity();
    p.capacities.resize(scenario.server_count());
    for (int j = 0; j < scenario.server_count(); ++j) p.capacities[j] = scenario.servers[j].capacity;
    p.rewards = env.mean_rewards();
    return p;
}

OracleSolution solve_oracle(const OracleProblem& p) {
    const int I = static_cast<int>(p.traffic.size());
    const int J = static_cast<int>(p.capacities.size());
    if (I == 0 || J == 0) throw ValidationError("oracle: empty problem");
    if (p.rewards.rows() != I || p.rewards.cols() != J) throw ValidationError("oracle: reward matrix shape mismatch");
    if ((p.traffic.array() <= 0.0).any()) throw ValidationError("oracle: traffic intensities must be positive");
    if ((p.capacities.array() <= 0.0).any()) throw ValidationError("oracle: capacities must be positive");
    if (!p.rewards.allFinite()) throw ValidationError("oracle: non-finite rewards");
    if (p.traffic.sum() > p.capacities.sum() * (1.0 + 1e-12))
        throw ValidationError("oracle: infeasible, total traffic exceeds total capacity");

    // Variables z_ij (index i*J + j) then slacks s_j; rows: I demand rows, J capacity rows.
    const int nz = I * J;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(I + J, nz + J);
    Eigen::VectorXd b(I + J);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(nz + J);
    for (int i = 0; i < I; ++i) {
        for (int j = 0; j < J; ++j) {
            A(i, i * J + j) = 1.0;
            A(I + j, i * J + j) = 1.0;
            c[i * J + j] = p.rewards(i, j);
        }
        b[i] = p.traffic[i];
    }
    for (int j = 0; j < J; ++j) {
        A(I + j, nz + j) = 1.0;
        b[I + j] = p.capacities[j];
    }

    const LinearProgramResult lp = simplex_maximize(A, b, c);
    if (!lp.feasible) throw ValidationError("oracle: infeasible problem");

    OracleSolution s;
    s.p.resize(I, J);
    for (int i = 0; i < I; ++i) {
        for (int j = 0; j < J; ++j) s.p(i, j) = lp.x[i * J + j] / p.traffic[i];
        s.p.row(i) /= s.p.row(i).sum();
    }
    s.value = 0.0;
    for (int i = 0; i < I; ++i)
        for (int j = 0; j < J; ++j) s.value += p.rewards(i, j) * p.traffic[i] * s.p(i, j);

    s.row_potentials = lp.duals.head(I);
    s.column_prices = lp.duals.tail(J);
    double infeasibility = 0.0;
    for (int j = 0; j < J; ++j) infeasibility = std::max(infeasibility, -s.column_prices[j]);
    for (int i = 0; i < I; ++i)
        for (int j = 0; j < J; ++j)
            infeasibility = std::max(infeasibility, p.rewards(i, j) - s.row_potentials[i] - s.column_prices[j]);
    const double dual_value = p.traffic.dot(s.row_potentials) + p.capacities.dot(s.column_prices);
    s.duality_gap = std::max(std::abs(dual_value - s.value), infeasibility);

    double slack = 0.0;
    for (int j = 0; j < J; ++j) {
        const double load = p.traffic.dot(s.p.col(j));
        slack = std::max(slack, std::abs(s.column_prices[j] * (p.capacities[j] - load)));
    }
    for (int i = 0; i < I; ++i)
        for (int j = 0; j < J; ++j)
            slack = std::max(slack, std::abs(p.traffic[i] * s.p(i, j) *
                                             (s.row_potentials[i] + s.column_prices[j] - p.rewards(i, j))));
    s.slackness_residual = slack;
    return s;
}

double regret_reference(const OracleSolution& solution, long horizon) {
    if (horizon < 1) throw ValidationError("regret_reference: horizon must be positive");
    return static_cast<double>(horizon) * solution.value;
}

}  // namespace bisched
