#include "cbfguard/qp.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace cbfguard {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kRegularization = 1e-10;

double inf_norm(const Vec & v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

// Dense tableau simplex with Bland's rule for
//   min t  s.t.  G z⁺ - G z⁻ - t + s = h,  (z⁺, z⁻, t, s) ≥ 0.
// Pivoting t into the row with the most negative h gives a feasible basis.
class PhaseOneTableau
{
public:
  PhaseOneTableau(const Mat & G, const Vec & h) : n_(G.cols()), m_(G.rows())
  {
    const Eigen::Index cols = 2 * n_ + 1 + m_;
    tab_ = Mat::Zero(m_, cols + 1);
    tab_.block(0, 0, m_, n_) = G;
    tab_.block(0, n_, m_, n_) = -G;
    tab_.col(2 * n_).setConstant(-1.0);
    tab_.block(0, 2 * n_ + 1, m_, m_).setIdentity();
    tab_.col(cols) = h;
    basis_.resize(static_cast<std::size_t>(m_));
    for (Eigen::Index i = 0; i < m_; ++i) basis_[static_cast<std::size_t>(i)] = 2 * n_ + 1 + i;

    scale_ = std::max({1.0, G.size() ? G.cwiseAbs().maxCoeff() : 0.0, inf_norm(h)});

    Eigen::Index worst = 0;
    for (Eigen::Index i = 1; i < m_; ++i)
      if (h(i) < h(worst)) worst = i;
    if (m_ > 0 && h(worst) < 0.0) pivot(worst, 2 * n_);
  }

  void run(int max_pivots)
  {
    const Eigen::Index cols = 2 * n_ + 1 + m_;
    const double eps = 1e-12 * scale_;
    for (int it = 0; it < max_pivots; ++it) {
      // Reduced costs of min t: d_j = c_j - c_Bᵀ B⁻¹A_j.
      Eigen::Index t_row = -1;
      for (Eigen::Index i = 0; i < m_; ++i)
        if (basis_[static_cast<std::size_t>(i)] == 2 * n_) t_row = i;

      Eigen::Index entering = -1;
      for (Eigen::Index j = 0; j < cols; ++j) {
        const double cj = (j == 2 * n_) ? 1.0 : 0.0;
        const double d = cj - (t_row >= 0 ? tab_(t_row, j) : 0.0);
        if (d < -eps) {
          entering = j;
          break;
        }
      }
      if (entering < 0) return;

      Eigen::Index leaving = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < m_; ++i) {
        const double a = tab_(i, entering);
        if (a <= eps) continue;
        const double ratio = tab_(i, cols) / a;
        if (leaving < 0) {
          best = ratio;
          leaving = i;
          continue;
        }
        const double tie_tol = 1e-14 * std::max(1.0, std::abs(best));
        if (ratio < best - tie_tol) {
          best = ratio;
          leaving = i;
        } else if (ratio <= best + tie_tol
                   && basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leaving)]) {
          leaving = i;
        }
      }
      // The objective is bounded below by zero, so an unbounded ray can only
      // come from roundoff; stop at the current vertex.
      if (leaving < 0) return;
      pivot(leaving, entering);
    }
  }

  Vec point() const
  {
    const Eigen::Index cols = 2 * n_ + 1 + m_;
    Vec y = Vec::Zero(cols);
    for (Eigen::Index i = 0; i < m_; ++i)
      y(basis_[static_cast<std::size_t>(i)]) = std::max(0.0, tab_(i, cols));
    return y.head(n_) - y.segment(n_, n_);
  }

private:
  void pivot(Eigen::Index row, Eigen::Index col)
  {
    tab_.row(row) /= tab_(row, col);
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (i == row) continue;
      const double f = tab_(i, col);
      if (f != 0.0) tab_.row(i) -= f * tab_.row(row);
    }
    basis_[static_cast<std::size_t>(row)] = col;
  }

  Eigen::Index n_;
  Eigen::Index m_;
  Mat tab_;
  std::vector<Eigen::Index> basis_;
  double scale_ = 1.0;
};

double max_violation(const Mat & G, const Vec & h, const Vec & z)
{
  if (G.rows() == 0) return 0.0;
  return std::max(0.0, (G * z - h).maxCoeff());
}

}  // namespace

double KktResiduals::max() const { return std::max({stationarity, primal, dual, complementarity}); }

void validate(const QPProblem & p)
{
  const Eigen::Index n = p.Q.rows();
  if (n == 0 || p.Q.cols() != n) throw InvalidProblem("Q must be square and nonempty");
  if (p.q.size() != n) throw InvalidProblem("q length does not match Q");
  if (p.G.rows() != p.h.size()) throw InvalidProblem("row count of G does not match length of h");
  if (p.G.rows() > 0 && p.G.cols() != n) throw InvalidProblem("column count of G does not match Q");
  if (!p.Q.allFinite() || !p.q.allFinite() || !p.G.allFinite() || !p.h.allFinite())
    throw InvalidProblem("non-finite problem data");
  const double asym = (p.Q - p.Q.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol * std::max(1.0, p.Q.cwiseAbs().maxCoeff()))
    throw InvalidProblem("Q is not symmetric (max asymmetry " + std::to_string(asym) + ")");
}

std::pair<Vec, double> least_violation_point(const Mat & G, const Vec & h)
{
  if (G.rows() == 0) return {Vec::Zero(G.cols()), 0.0};
  PhaseOneTableau tableau(G, h);
  tableau.run(static_cast<int>(50 * (G.rows() + 2 * G.cols() + 1)));
  Vec z = tableau.point();
  return {z, max_violation(G, h, z)};
}

KktResiduals kkt_residuals(const QPProblem & p, const Vec & z, const Vec & mu)
{
  KktResiduals r;
  Vec stat = p.Q * z + p.q;
  if (p.G.rows() > 0) stat += p.G.transpose() * mu;
  r.stationarity = inf_norm(stat);
  if (p.G.rows() > 0) {
    const Vec slack = p.G * z - p.h;
    r.primal = std::max(0.0, slack.maxCoeff());
    r.dual = std::max(0.0, (-mu).maxCoeff());
    r.complementarity = inf_norm(mu.cwiseProduct(slack));
  }
  return r;
}

QPSolution solve(const QPProblem & problem, double tol)
{
  QPOptions opts;
  opts.tol = tol;
  return solve(problem, opts);
}

QPSolution solve(const QPProblem & problem, const QPOptions & options)
{
  validate(problem);
  const Eigen::Index n = problem.Q.rows();
  const Eigen::Index m = problem.G.rows();

  QPSolution sol;
  QPProblem work = problem;
  if (m == 0) work.G.resize(0, n);

  Eigen::SelfAdjointEigenSolver<Mat> eig(work.Q, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (lo < -kRegularization * std::max(1.0, std::abs(hi))) throw InvalidProblem("Q is indefinite");
  if (lo < kRegularization) {
    sol.regularization = kRegularization;
    work.Q.diagonal().array() += kRegularization;
  }

  if (m == 0) {
    sol.status = QPStatus::optimal;
    sol.z = work.Q.llt().solve(-work.q);
    sol.multipliers = Vec::Zero(0);
    sol.kkt_residual = kkt_residuals(work, sol.z, sol.multipliers).max();
    return sol;
  }

  auto [z, violation] = least_violation_point(work.G, work.h);
  sol.min_violation = violation;
  if (violation > options.infeasibility_tol) {
    sol.status = QPStatus::infeasible;
    sol.z = z;
    sol.multipliers = Vec::Zero(m);
    return sol;
  }

  std::vector<Eigen::Index> working;
  std::vector<bool> in_working(static_cast<std::size_t>(m), false);
  Vec lambda;

  // Null-space solve of the equality subproblem on the working set:
  // G_W = (R 0)ᵀ-factorized as G_Wᵀ = [Y Z][R; 0], step p = Z·s with
  // (ZᵀQZ) s = -Zᵀ∇, multipliers from R λ = -Yᵀ(∇ + Qp). Stays accurate when
  // working rows are nearly parallel, unlike a direct KKT factorization.
  auto solve_eqp = [&](const Vec & point, Vec & step, Vec & mult) {
    const Eigen::Index k = static_cast<Eigen::Index>(working.size());
    const Vec grad = work.Q * point + work.q;
    if (k == 0) {
      step = work.Q.ldlt().solve(-grad);
      mult = Vec::Zero(0);
      return;
    }
    Mat A(n, k);
    for (Eigen::Index j = 0; j < k; ++j) A.col(j) = work.G.row(working[static_cast<std::size_t>(j)]).transpose();
    const Eigen::HouseholderQR<Mat> qr(A);
    const Mat basis = qr.householderQ() * Mat::Identity(n, n);
    const Mat Z = basis.rightCols(n - k);
    if (n > k) {
      const Mat reduced = Z.transpose() * work.Q * Z;
      step = Z * reduced.ldlt().solve(-(Z.transpose() * grad));
    } else {
      step = Vec::Zero(n);
    }
    const Mat R = qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
    const Vec rhs = -(basis.leftCols(k).transpose() * (grad + work.Q * step));
    mult = R.triangularView<Eigen::Upper>().solve(rhs);
  };

  bool converged = false;
  bool at_subproblem_minimum = false;
  for (int it = 0; it < options.max_iterations; ++it) {
    sol.iterations = it + 1;
    Vec p;
    solve_eqp(z, p, lambda);
    const double step_tol = 1e-12 * (1.0 + inf_norm(z));
    if (at_subproblem_minimum || inf_norm(p) <= step_tol) {
      if (!at_subproblem_minimum) z += p;
      at_subproblem_minimum = false;
      Eigen::Index drop = -1;
      double most_negative = -1e-12 * (1.0 + inf_norm(lambda));
      for (std::size_t j = 0; j < working.size(); ++j) {
        const double lj = lambda(static_cast<Eigen::Index>(j));
        if (lj < most_negative || (drop >= 0 && lj == most_negative && working[j] < working[static_cast<std::size_t>(drop)])) {
          most_negative = lj;
          drop = static_cast<Eigen::Index>(j);
        }
      }
      if (drop < 0) {
        converged = true;
        break;
      }
      in_working[static_cast<std::size_t>(working[static_cast<std::size_t>(drop)])] = false;
      working.erase(working.begin() + drop);
      continue;
    }

    double alpha = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (in_working[static_cast<std::size_t>(i)]) continue;
      const double gp = work.G.row(i).dot(p);
      if (gp <= 1e-14 * (1.0 + work.G.row(i).lpNorm<Eigen::Infinity>() * inf_norm(p))) continue;
      const double step = std::max(0.0, (work.h(i) - work.G.row(i).dot(z)) / gp);
      if (step < alpha) {
        alpha = step;
        blocking = i;
      }
    }
    z += alpha * p;
    if (blocking >= 0) {
      working.push_back(blocking);
      in_working[static_cast<std::size_t>(blocking)] = true;
    } else {
      at_subproblem_minimum = true;
    }
  }
  if (!converged) throw std::runtime_error("active-set iteration limit reached");

  Vec mu = Vec::Zero(m);
  for (std::size_t j = 0; j < working.size(); ++j)
    mu(working[j]) = std::max(0.0, lambda(static_cast<Eigen::Index>(j)));

  sol.status = QPStatus::optimal;
  sol.z = z;
  sol.multipliers = mu;
  sol.kkt_residual = kkt_residuals(work, z, mu).max();
  return sol;
}

bool check_strict_complementarity(const QPSolution & solution, const QPProblem & problem, double tol)
{
  if (solution.status != QPStatus::optimal)
    throw InvalidProblem("strict complementarity is only defined for optimal solutions");
  for (Eigen::Index i = 0; i < problem.G.rows(); ++i) {
    const bool active = solution.multipliers(i) > tol;
    const bool slack = problem.h(i) - problem.G.row(i).dot(solution.z) > tol;
    if (active == slack) return false;
  }
  return true;
}

}  // namespace cbfguard
