#pragma once

#include "cbfguard/qp.hpp"

#include <cstdint>
#include <optional>
#include <random>

namespace cbfguard {

/**
 * Reference solver for small strictly convex QPs: tries every active set of
 * at most n rows, solves the equality-constrained problem through the Schur
 * complement, and keeps the cheapest KKT point. Exponential in the number of
 * constraints; intended for m ≤ ~12. Empty result means infeasible.
 */
std::optional<Vec> enumerate_active_sets(const QPProblem & problem, double tol = 1e-10);

/// Random strictly convex QP with 1..max_vars variables and 0..max_constraints rows.
/// Roughly one in ten problems is made infeasible on purpose.
QPProblem random_qp(std::mt19937_64 & rng, int max_vars = 6, int max_constraints = 8);

struct QPCheckReport
{
  int problems = 0;
  int infeasible = 0;
  int status_mismatches = 0;
  double max_solution_gap = 0.0;
  double max_kkt_residual = 0.0;
  double seconds = 0.0;

  bool passed(double solution_tol = 1e-8, double kkt_tol = 1e-9) const
  {
    return status_mismatches == 0 && max_solution_gap <= solution_tol && max_kkt_residual <= kkt_tol;
  }
};

/// Compares solve() against enumerate_active_sets() on `count` random problems.
QPCheckReport run_qp_self_check(int count, std::uint64_t seed);

}  // namespace cbfguard
