#include "bisched/error.hpp"
#include "bisched/problem_io.hpp"
#include "bisched/scenario_io.hpp"

#include <doctest.h>

#include <sstream>

using namespace bisched;

TEST_CASE("scenario files round-trip") {
    SyntheticOptions o;
    o.job_classes = 3;
    Scenario s = make_synthetic_scenario(o, 5);
    s.jobs[1].weight = 1.75;
    s.jobs[2].holding_cost = 0.25;
    s.config.V = 12.5;
    s.config.switch_threshold = 1.0;
    s.config.policy = Policy::WeightedSabr;
    s.schedule.rows = {{2, 2}, {3, 2}};
    s.noise = NoiseLaw{NoiseKind::Uniform, 0.2};

    std::stringstream buffer;
    write_scenario(buffer, s);
    const Scenario back = read_scenario(buffer);
    std::stringstream again;
    write_scenario(again, back);
    CHECK(again.str() == buffer.str());
    CHECK(back.theta == s.theta);
    CHECK(back.jobs[1].weight == 1.75);
    CHECK(back.config.V == s.config.V);
    CHECK(back.config.policy == Policy::WeightedSabr);
    CHECK(back.schedule.rows == s.schedule.rows);
    CHECK(back.noise.kind == NoiseKind::Uniform);
    CHECK_NOTHROW(validate(back));
}

TEST_CASE("scenario parse errors") {
    std::istringstream unknown("bogus = 1\n");
    CHECK_THROWS_AS(read_scenario(unknown), ParseError);
    std::istringstream gap("theta = 1\njob.1.feature = 1\n");
    CHECK_THROWS_AS(read_scenario(gap), ParseError);
    std::istringstream number("theta = 1\njob.0.arrival_rate = fast\n");
    CHECK_THROWS_AS(read_scenario(number), ParseError);
}

TEST_CASE("allocation problem tables") {
    std::istringstream in(
        "i,j,rhat,Q,w,n,gamma,V\n"
        "0,0,0.2,10,1,4,1.2,5\n"
        "1,0,0.2,10,1,4,1.2,5\n");
    const AllocationProblem p = read_allocation_problem(in);
    CHECK(p.classes() == 2);
    CHECK(p.servers() == 1);
    CHECK(p.V == 5.0);
    CHECK(p.bound == 1.0);
    const Allocation a = closed_form_single_server(p);
    std::ostringstream out;
    write_allocation(out, a);
    CHECK(out.str().rfind("i,j,y,Y,q,h,objective,kkt_residual\n0,0,2,2,0,", 0) == 0);

    std::istringstream missing("i,j,rhat,Q,w,n,gamma,V\n0,0,0.2,10,1,4,1.2,5\n1,1,0.2,10,1,4,1.2,5\n");
    CHECK_THROWS_AS(read_allocation_problem(missing), ParseError);
    std::istringstream clash("i,j,rhat,Q,w,n,gamma,V\n0,0,0.2,10,1,4,1.2,5\n1,0,0.2,10,1,4,1.2,6\n");
    CHECK_THROWS_AS(read_allocation_problem(clash), ParseError);
    std::istringstream duplicate("i,j,rhat,Q,w,n,gamma,V\n0,0,0.2,10,1,4,1.2,5\n0,0,0.2,10,1,4,1.2,5\n");
    CHECK_THROWS_AS(read_allocation_problem(duplicate), ParseError);
}

TEST_CASE("oracle problem tables and delays") {
    std::istringstream in("i,j,r,rho,n\n0,0,1,1,1\n0,1,0,1,1\n1,0,0,1,1\n1,1,1,1,1\n");
    const OracleProblem p = read_oracle_problem(in);
    const OracleSolution s = solve_oracle(p);
    CHECK(s.value == doctest::Approx(2.0));
    std::ostringstream out;
    write_oracle_solution(out, s);
    CHECK(out.str() == "i,j,p,value\n0,0,1,2\n0,1,0,2\n1,0,0,2\n1,1,1,2\n");

    Eigen::MatrixXi f, b;
    std::istringstream delays("i,j,forward,backward\n1,0,2,3\n");
    read_delays(delays, 2, 2, f, b);
    CHECK(f(1, 0) == 2);
    CHECK(b(1, 0) == 3);
    CHECK(f(0, 0) == 0);
    std::istringstream outside("i,j,forward,backward\n2,0,1,1\n");
    CHECK_THROWS_AS(read_delays(outside, 2, 2, f, b), ParseError);
}
