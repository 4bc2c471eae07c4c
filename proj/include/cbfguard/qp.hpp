#pragma once

#include <Eigen/Dense>

#include <stdexcept>

namespace cbfguard {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/**
 * Dense convex quadratic program
 *
 *   min  ½ zᵀQz + qᵀz
 *   s.t. Gz ≤ h
 *
 * G may have zero rows (unconstrained problem).
 */
struct QPProblem
{
  Mat Q;
  Vec q;
  Mat G;
  Vec h;
};

enum class QPStatus { optimal, infeasible };

struct QPSolution
{
  QPStatus status = QPStatus::infeasible;
  /// Optimizer when optimal; the phase-1 point of least violation when infeasible.
  Vec z;
  /// One nonnegative multiplier per row of G (zero when infeasible).
  Vec multipliers;
  double kkt_residual = 0.0;
  /// Optimum of the phase-1 subproblem: min over z of max_i (G_i z - h_i)⁺.
  double min_violation = 0.0;
  /// Diagonal shift added to Q when it was only semidefinite.
  double regularization = 0.0;
  int iterations = 0;
};

struct QPOptions
{
  double tol = 1e-9;
  double infeasibility_tol = 1e-7;
  int max_iterations = 1000;
};

/// Raised for malformed problems (dimension mismatch, asymmetric or indefinite Q).
class InvalidProblem : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

struct KktResiduals
{
  double stationarity = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;

  double max() const;
};

/// Throws InvalidProblem when the dimensions or symmetry invariants fail.
void validate(const QPProblem & problem);

/**
 * Primal active-set solver. A feasible start comes from the phase-1 LP
 * min t s.t. Gz - t ≤ h, t ≥ 0; the problem is declared infeasible when
 * its optimum exceeds options.infeasibility_tol.
 */
QPSolution solve(const QPProblem & problem, const QPOptions & options);
QPSolution solve(const QPProblem & problem, double tol = 1e-9);

KktResiduals kkt_residuals(const QPProblem & problem, const Vec & z, const Vec & multipliers);

/// True iff every constraint is strictly active (μ > tol) or strictly slack (h - Gz > tol), not both.
bool check_strict_complementarity(const QPSolution & solution, const QPProblem & problem, double tol);

/// Phase-1 LP on its own: returns (z, t*) with t* = min max_i (G_i z - h_i)⁺.
std::pair<Vec, double> least_violation_point(const Mat & G, const Vec & h);

}  // namespace cbfguard
