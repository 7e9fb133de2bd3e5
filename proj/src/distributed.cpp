#include "bisched/distributed.hpp"

#include "bisched/error.hpp"
#include "bisched/projected_gradient.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace bisched {

namespace {

// Rational penalties are evaluated no closer than this to their asymptote.
constexpr double kRationalEdge = 1e-12;

}  // namespace

double Penalty::value(double z) const {
    const double x = std::max(0.0, z) / capacity;
    switch (kind) {
        case PenaltyKind::Power:
            return std::pow(x, beta);
        case PenaltyKind::Bounded: {
            const double xb = std::pow(x, beta);
            return ceiling * xb / (1.0 + xb);
        }
        case PenaltyKind::Rational: {
            const double xc = std::min(x, 1.0 - kRationalEdge);
            return xc / (1.0 - xc);
        }
    }
    return 0.0;
}

double Penalty::derivative(double z) const {
    const double x = std::max(0.0, z) / capacity;
    switch (kind) {
        case PenaltyKind::Power:
            return x > 0.0 ? beta * std::pow(x, beta - 1.0) / capacity : (beta == 1.0 ? 1.0 / capacity : 0.0);
        case PenaltyKind::Bounded: {
            if (x <= 0.0) return beta == 1.0 ? ceiling / capacity : 0.0;
            const double xb = std::pow(x, beta);
            return ceiling * beta * std::pow(x, beta - 1.0) / ((1.0 + xb) * (1.0 + xb)) / capacity;
        }
        case PenaltyKind::Rational: {
            const double xc = std::min(x, 1.0 - kRationalEdge);
            return 1.0 / ((1.0 - xc) * (1.0 - xc)) / capacity;
        }
    }
    return 0.0;
}

double Penalty::integral(double z) const {
    if (z <= 0.0) return 0.0;
    const double x = z / capacity;
    switch (kind) {
        case PenaltyKind::Power:
            return capacity * std::pow(x, beta + 1.0) / (beta + 1.0);
        case PenaltyKind::Bounded:
            return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                [this](double s) { return value(s); }, 0.0, z, 15, 1e-12);
        case PenaltyKind::Rational:
            if (x >= 1.0) return std::numeric_limits<double>::infinity();
            return capacity * (-x - std::log1p(-x));
    }
    return 0.0;
}

double Penalty::domain_limit() const {
    return kind == PenaltyKind::Rational ? capacity : std::numeric_limits<double>::infinity();
}

std::string Penalty::describe() const {
    std::ostringstream out;
    switch (kind) {
        case PenaltyKind::Power:
            out << "power:" << beta;
            break;
        case PenaltyKind::Bounded:
            out << "bounded:" << beta << ':' << ceiling;
            break;
        case PenaltyKind::Rational:
            out << "rational";
            break;
    }
    return out.str();
}

Penalty parse_penalty(const std::string& text, double capacity) {
    if (!(capacity > 0.0)) throw ValidationError("penalty capacity must be positive");
    std::vector<std::string> parts;
    std::stringstream in(text);
    std::string part;
    while (std::getline(in, part, ':')) parts.push_back(part);
    auto number = [&](std::size_t k) {
        try {
            std::size_t used = 0;
            const double v = std::stod(parts.at(k), &used);
            if (used != parts[k].size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw ParseError("penalty '" + text + "': bad number");
        }
    };
    Penalty p;
    p.capacity = capacity;
    if (parts.size() == 2 && parts[0] == "power") {
        p.kind = PenaltyKind::Power;
        p.beta = number(1);
    } else if (parts.size() == 3 && parts[0] == "bounded") {
        p.kind = PenaltyKind::Bounded;
        p.beta = number(1);
        p.ceiling = number(2);
    } else if (parts.size() == 1 && parts[0] == "rational") {
        p.kind = PenaltyKind::Rational;
    } else {
        throw ParseError("penalty '" + text + "': expected power:BETA, bounded:BETA:CEILING or rational");
    }
    if (!(p.beta > 0.0) || !(p.ceiling > 0.0)) throw ValidationError("penalty parameters must be positive");
    return p;
}

void validate(const SoftPenaltyProblem& p) {
    const int I = p.classes();
    const int J = p.servers();
    if (I == 0 || J == 0) throw ValidationError("soft-penalty problem: empty problem");
    if (p.prices.rows() != I || p.prices.cols() != J) throw ValidationError("soft-penalty problem: price shape mismatch");
    if (!(p.utility.array() > 0.0).all()) throw ValidationError("soft-penalty problem: utilities must be positive");
    if (!(p.prices.array() >= 0.0).all()) throw ValidationError("soft-penalty problem: prices must be nonnegative");
    for (const auto& pen : p.penalties)
        if (!(pen.capacity > 0.0) || !(pen.beta > 0.0) || !(pen.ceiling > 0.0))
            throw ValidationError("soft-penalty problem: invalid penalty");
}

SoftPenaltyProblem soft_penalty_problem(const AllocationProblem& problem, const std::vector<Penalty>& penalties) {
    if (static_cast<int>(penalties.size()) != problem.servers())
        throw ValidationError("soft-penalty problem: one penalty per server class required");
    SoftPenaltyProblem s;
    s.utility = problem.utility_coefficients();
    s.prices = problem.marginal_costs();
    s.penalties = penalties;
    validate(s);
    return s;
}

double soft_penalty_objective(const SoftPenaltyProblem& p, const Eigen::MatrixXd& y) {
    const Eigen::VectorXd Y = y.rowwise().sum();
    const Eigen::VectorXd Z = y.colwise().sum().transpose();
    double value = 0.0;
    for (int i = 0; i < p.classes(); ++i) {
        if (!(Y[i] > 0.0)) return -std::numeric_limits<double>::infinity();
        value += p.utility[i] * std::log(Y[i]);
    }
    for (int j = 0; j < p.servers(); ++j) {
        if (!(Z[j] < p.penalties[j].domain_limit())) return -std::numeric_limits<double>::infinity();
        value -= p.penalties[j].integral(Z[j]);
    }
    return value - p.prices.cwiseProduct(y).sum();
}

Eigen::MatrixXd optimality_gaps(const SoftPenaltyProblem& p, const Eigen::MatrixXd& y) {
    const Eigen::VectorXd Y = y.rowwise().sum();
    const Eigen::VectorXd Z = y.colwise().sum().transpose();
    Eigen::MatrixXd g(p.classes(), p.servers());
    for (int j = 0; j < p.servers(); ++j) {
        const double price = p.penalties[j].value(Z[j]);
        for (int i = 0; i < p.classes(); ++i) g(i, j) = p.utility[i] / Y[i] - price - p.prices(i, j);
    }
    return g;
}

double equilibrium_residual(const SoftPenaltyProblem& p, const Eigen::MatrixXd& y) {
    if ((y.rowwise().sum().array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
    const Eigen::MatrixXd g = optimality_gaps(p, y);
    return (y - (y + g).cwiseMax(0.0)).cwiseAbs().maxCoeff();
}

EquilibriumPoint equilibrium_solve(const SoftPenaltyProblem& p, double tolerance, int max_iterations) {
    validate(p);
    const int I = p.classes();
    const int J = p.servers();
    auto as_matrix = [&](const Eigen::VectorXd& x) { return Eigen::Map<const Eigen::MatrixXd>(x.data(), I, J); };

    // Start well inside every penalty's domain.
    Eigen::MatrixXd y0(I, J);
    for (int i = 0; i < I; ++i)
        for (int j = 0; j < J; ++j) {
            const double cap = std::isfinite(p.penalties[j].domain_limit()) ? p.penalties[j].capacity : 1.0;
            y0(i, j) = std::min(0.5 * cap / I, p.utility[i] / (J * (p.prices(i, j) + 1.0)));
        }

    AscentProblem problem;
    problem.objective = [&](const Eigen::VectorXd& x) { return soft_penalty_objective(p, as_matrix(x)); };
    problem.gradient = [&](const Eigen::VectorXd& x) {
        const Eigen::MatrixXd g = optimality_gaps(p, as_matrix(x));
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(g.data(), I * J));
    };
    problem.project = [](Eigen::VectorXd& x) { x = x.cwiseMax(0.0); };
    problem.measure = [&](const Eigen::VectorXd& x) { return equilibrium_residual(p, as_matrix(x)); };

    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(y0.data(), I * J);
    AscentOptions options;
    options.tolerance = tolerance;
    options.max_iterations = max_iterations;
    const AscentResult r = projected_gradient_ascent(problem, x, options);

    EquilibriumPoint e;
    e.y = as_matrix(x);
    e.row_sums = e.y.rowwise().sum();
    e.column_sums = e.y.colwise().sum().transpose();
    e.residual = equilibrium_residual(p, e.y);
    e.converged = e.residual <= tolerance;
    e.iterations = r.iterations;
    const Eigen::MatrixXd g = optimality_gaps(p, e.y);
    e.interior = ((e.y.array() > 1e-6) || (g.array() < -1e-6)).all();
    return e;
}

int DelayedDynamics::history_length() const {
    const int f = forward.size() ? forward.maxCoeff() : 0;
    const int b = backward.size() ? backward.maxCoeff() : 0;
    return f + b;
}

void validate(const DelayedDynamics& d, const SoftPenaltyProblem& p) {
    const int I = p.classes();
    const int J = p.servers();
    if (d.alpha.rows() != I || d.alpha.cols() != J || d.forward.rows() != I || d.forward.cols() != J ||
        d.backward.rows() != I || d.backward.cols() != J)
        throw ValidationError("dynamics: step-size and delay matrices must be |I| x |J|");
    if (!(d.alpha.array() > 0.0).all()) throw ValidationError("dynamics: step sizes must be positive");
    if ((d.forward.array() < 0).any() || (d.backward.array() < 0).any())
        throw ValidationError("dynamics: delays must be nonnegative");
}

std::vector<double> Trajectory::distance_to(const EquilibriumPoint& e) const {
    std::vector<double> out;
    out.reserve(row_sums.size());
    for (std::size_t r = 0; r < row_sums.size(); ++r)
        out.push_back((row_sums[r] - e.row_sums).lpNorm<Eigen::Infinity>() +
                      (column_sums[r] - e.column_sums).lpNorm<Eigen::Infinity>());
    return out;
}

Trajectory simulate_dynamics(const SoftPenaltyProblem& p, const DelayedDynamics& d,
                             const std::vector<Eigen::MatrixXd>& initial, int ticks) {
    validate(p);
    validate(d, p);
    if (ticks < 1) throw ValidationError("dynamics: tick count must be positive");
    const int I = p.classes();
    const int J = p.servers();
    const int H = d.history_length();
    if (initial.empty() || (initial.size() != 1 && static_cast<int>(initial.size()) != H + 1))
        throw ValidationError("dynamics: initial trajectory needs 1 or history_length()+1 matrices");
    for (const auto& m : initial)
        if (m.rows() != I || m.cols() != J || (m.array() < 0.0).any())
            throw ValidationError("dynamics: initial allocations must be nonnegative |I| x |J| matrices");

    // hist[r + H] = y(r)
    std::vector<Eigen::MatrixXd> hist;
    hist.reserve(static_cast<std::size_t>(H + ticks + 1));
    for (int k = 0; k <= H; ++k) hist.push_back(initial.size() == 1 ? initial[0] : initial[static_cast<std::size_t>(k)]);
    auto at = [&](int r, int i, int j) { return hist[static_cast<std::size_t>(std::max(r, -H) + H)](i, j); };

    const Eigen::MatrixXi rtt = d.round_trip();
    // Aggregates as seen by the updating node at tick r.
    auto job_row = [&](int r, int i) {
        double s = 0.0;
        for (int j = 0; j < J; ++j)
            s += d.mode == NodeMode::Job ? at(r - rtt(i, j), i, j) : at(r - d.backward(i, j), i, j);
        return s;
    };
    auto server_column = [&](int r, int j) {
        double s = 0.0;
        for (int i = 0; i < I; ++i)
            s += d.mode == NodeMode::Job ? at(r - d.forward(i, j), i, j) : at(r - rtt(i, j), i, j);
        return s;
    };

    Trajectory traj;
    auto record = [&](int r) {
        Eigen::VectorXd Y(I), Z(J);
        for (int i = 0; i < I; ++i) Y[i] = job_row(r, i);
        for (int j = 0; j < J; ++j) Z[j] = server_column(r, j);
        traj.y.push_back(hist.back());
        traj.row_sums.push_back(Y);
        traj.column_sums.push_back(Z);
    };
    record(0);

    for (int r = 0; r < ticks; ++r) {
        Eigen::MatrixXd next(I, J);
        for (int i = 0; i < I; ++i) {
            for (int j = 0; j < J; ++j) {
                double lambda = 0.0;
                double Y = 0.0;
                if (d.mode == NodeMode::Job) {
                    lambda = p.penalties[j].value(server_column(r - d.backward(i, j), j)) + p.prices(i, j);
                    Y = job_row(r, i);
                } else {
                    lambda = p.penalties[j].value(server_column(r, j)) + p.prices(i, j);
                    Y = job_row(r - d.forward(i, j), i);
                }
                // lambda / u'(Y) with u'(Y) = k / Y
                const double drive = 1.0 - lambda * Y / p.utility[i];
                const double current = at(r, i, j);
                if (d.form == UpdateForm::Proportional)
                    next(i, j) = std::max(0.0, current + d.alpha(i, j) * current * drive);
                else
                    next(i, j) = current > 0.0 ? std::max(0.0, current + d.alpha(i, j) * drive)
                                               : d.alpha(i, j) * std::max(drive, 0.0);
                if (!std::isfinite(next(i, j)))
                    throw Error("dynamics: non-finite iterate at tick " + std::to_string(r + 1));
            }
        }
        hist.push_back(std::move(next));
        record(r + 1);
    }
    return traj;
}

StabilityReport stability_check(const SoftPenaltyProblem& p, const DelayedDynamics& d, const EquilibriumPoint& e) {
    validate(p);
    validate(d, p);
    const int I = p.classes();
    const int J = p.servers();
    constexpr double half_pi = std::numbers::pi / 2.0;

    StabilityReport rep;
    rep.applicable = e.interior;
    rep.margins.resize(I, J);
    rep.general_thresholds.resize(I, J);
    rep.zero_price_thresholds.resize(I, J);
    rep.specialized_thresholds.resize(J);
    rep.epsilon.resize(J);
    const Eigen::MatrixXi rtt = d.round_trip();
    for (int j = 0; j < J; ++j) {
        const Penalty& pen = p.penalties[j];
        const double Z = e.column_sums[j];
        const double pz = pen.value(Z);
        const double slope = pen.derivative(Z) * Z;
        rep.epsilon[j] = 1.0 - Z / pen.capacity;
        for (int i = 0; i < I; ++i) {
            const double gain = 1.0 + slope / (pz + p.prices(i, j));
            rep.margins(i, j) = d.alpha(i, j) * rtt(i, j) * gain;
            rep.general_thresholds(i, j) = half_pi / gain;
            rep.zero_price_thresholds(i, j) = pz > 0.0 ? half_pi / (1.0 + slope / pz) : half_pi;
        }
        const double c = p.prices.col(j).minCoeff();
        switch (pen.kind) {
            case PenaltyKind::Power:
                rep.specialized_thresholds[j] = half_pi / (1.0 + pen.beta);
                break;
            case PenaltyKind::Bounded:
                rep.specialized_thresholds[j] =
                    half_pi * (pen.ceiling + c) / (pen.ceiling + pen.ceiling * pen.beta + c);
                break;
            case PenaltyKind::Rational:
                rep.specialized_thresholds[j] = std::numbers::pi / 4.0 * rep.epsilon[j];
                break;
        }
    }
    rep.max_margin = rep.margins.maxCoeff();
    rep.stable = rep.applicable && rep.max_margin < half_pi;
    return rep;
}

}  // namespace bisched
