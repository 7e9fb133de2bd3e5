#include "../support/oracles.hpp"

#include "bisched/error.hpp"
#include "bisched/oracle.hpp"

#include <doctest.h>

#include <random>

using namespace bisched;

namespace {

OracleProblem make(Eigen::VectorXd rho, Eigen::VectorXd n, Eigen::MatrixXd r) {
    return OracleProblem{std::move(rho), std::move(n), std::move(r)};
}

void check_certificate(const OracleProblem& p, const OracleSolution& s) {
    for (int i = 0; i < s.p.rows(); ++i) CHECK(s.p.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK((s.p.array() >= -1e-12).all());
    const Eigen::VectorXd load = s.p.transpose() * p.traffic;
    for (int j = 0; j < load.size(); ++j) CHECK(load[j] <= p.capacities[j] + 1e-9);
    CHECK(s.duality_gap <= 1e-9 * (1.0 + std::abs(s.value)));
    CHECK(s.slackness_residual <= 1e-9);
}

}  // namespace

TEST_CASE("oracle examples") {
    const OracleProblem one = make(Eigen::Vector2d(0.5, 0.5), Eigen::VectorXd::Ones(1), Eigen::Vector2d(0.9, 0.1));
    const OracleSolution s1 = solve_oracle(one);
    CHECK(s1.value == doctest::Approx(0.5));
    CHECK(s1.p.isApprox(Eigen::MatrixXd::Ones(2, 1)));
    check_certificate(one, s1);

    const OracleProblem two = make(Eigen::Vector2d(1, 1), Eigen::Vector2d(1, 1), Eigen::Matrix2d::Identity());
    const OracleSolution s2 = solve_oracle(two);
    CHECK(s2.value == doctest::Approx(2.0));
    CHECK(s2.p.isApprox(Eigen::Matrix2d::Identity()));
    CHECK(oracles::transportation_by_vertices(two.traffic, two.capacities, two.rewards) == doctest::Approx(2.0));
    check_certificate(two, s2);

    const OracleProblem flat = make(Eigen::Vector3d(0.3, 0.2, 0.4), Eigen::Vector2d(0.5, 1.0), Eigen::MatrixXd::Constant(3, 2, 0.7));
    CHECK(solve_oracle(flat).value == doctest::Approx(0.7 * 0.9));
}

TEST_CASE("regret reference") {
    OracleSolution s;
    s.value = 0.5;
    CHECK(regret_reference(s, 100) == doctest::Approx(50.0));
    s.value = 0.0;
    CHECK(regret_reference(s, 12345) == 0.0);
    const OracleSolution two = solve_oracle(make(Eigen::Vector2d(1, 1), Eigen::Vector2d(1, 1), Eigen::Matrix2d::Identity()));
    CHECK(regret_reference(two, 500) == doctest::Approx(1000.0));
    CHECK_THROWS_AS(regret_reference(two, 0), ValidationError);
}

TEST_CASE("oracle agrees with vertex enumeration and is monotone") {
    std::mt19937_64 rng(19);
    std::uniform_int_distribution<int> size(1, 3), tenth(1, 10), reward(-10, 10);
    for (int trial = 0; trial < 60; ++trial) {
        const int I = size(rng), J = size(rng);
        OracleProblem p;
        p.traffic.resize(I);
        p.capacities.resize(J);
        p.rewards.resize(I, J);
        for (int i = 0; i < I; ++i) p.traffic[i] = tenth(rng) / 10.0;
        for (int j = 0; j < J; ++j) p.capacities[j] = tenth(rng) / 10.0;
        for (int i = 0; i < I; ++i)
            for (int j = 0; j < J; ++j) p.rewards(i, j) = reward(rng) / 10.0;
        const double reference = oracles::transportation_by_vertices(p.traffic, p.capacities, p.rewards);
        if (!std::isfinite(reference)) {
            CHECK_THROWS_AS(solve_oracle(p), ValidationError);
            continue;
        }
        const OracleSolution s = solve_oracle(p);
        CHECK(s.value == doctest::Approx(reference).epsilon(1e-6));
        check_certificate(p, s);

        OracleProblem richer = p;
        richer.rewards(0, 0) += 0.3;
        CHECK(solve_oracle(richer).value >= s.value - 1e-9);
        OracleProblem bigger = p;
        bigger.capacities[J - 1] += 0.5;
        CHECK(solve_oracle(bigger).value >= s.value - 1e-9);
    }
}

TEST_CASE("infeasible and malformed oracle problems") {
    CHECK_THROWS_AS(solve_oracle(make(Eigen::Vector2d(1, 1), Eigen::VectorXd::Ones(1), Eigen::Vector2d(1, 1))),
                    ValidationError);
    CHECK_THROWS_AS(solve_oracle(make(Eigen::Vector2d(0, 1), Eigen::VectorXd::Ones(1), Eigen::Vector2d(1, 1))),
                    ValidationError);
    CHECK_THROWS_AS(solve_oracle(make(Eigen::Vector2d(0.1, 0.1), Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Ones(3, 1))),
                    ValidationError);
}

TEST_CASE("generic simplex") {
    // max x1 + 2 x2  s.t. x1 + x2 + s = 4, x2 + t = 3
    Eigen::MatrixXd A(2, 4);
    A << 1, 1, 1, 0, 0, 1, 0, 1;
    const LinearProgramResult r = simplex_maximize(A, Eigen::Vector2d(4, 3), Eigen::Vector4d(1, 2, 0, 0));
    CHECK(r.feasible);
    CHECK(r.bounded);
    CHECK(r.value == doctest::Approx(7.0));
    CHECK(r.x[0] == doctest::Approx(1.0));
    CHECK(r.x[1] == doctest::Approx(3.0));

    Eigen::MatrixXd B(1, 2);
    B << 1, -1;
    CHECK_FALSE(simplex_maximize(B, Eigen::VectorXd::Zero(1), Eigen::Vector2d(1, 1)).bounded);
}
