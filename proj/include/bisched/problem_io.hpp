#pragma once

#include "bisched/allocation.hpp"
#include "bisched/distributed.hpp"
#include "bisched/oracle.hpp"

#include <iosfwd>

namespace bisched {

// Problems are pair tables: one CSV row per (i, j) with the pair's entry
// and the per-class, per-server and global values repeated on every row.
// Class ids run 0..I-1 and 0..J-1; every pair must appear exactly once
// and repeated values must agree.

/// Columns i,j,rhat,Q,w,n,gamma,V and optionally bound (default 1).
AllocationProblem read_allocation_problem(std::istream& in);
/// Columns i,j,y,Y,q,h,objective,kkt_residual.
void write_allocation(std::ostream& out, const Allocation& allocation);

/// Columns i,j,r,rho,n.
OracleProblem read_oracle_problem(std::istream& in);
/// Columns i,j,p,value.
void write_oracle_solution(std::ostream& out, const OracleSolution& solution);

/// Columns i,j,forward,backward for an I x J problem; pairs not listed
/// have zero delay.
void read_delays(std::istream& in, int classes, int servers, Eigen::MatrixXi& forward, Eigen::MatrixXi& backward);

}  // namespace bisched
