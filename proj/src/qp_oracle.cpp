#include "cbfguard/qp_oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <chrono>
#include <limits>

namespace cbfguard {

std::optional<Vec> enumerate_active_sets(const QPProblem & p, double tol)
{
  validate(p);
  const Eigen::Index n = p.Q.rows();
  const Eigen::Index m = p.G.rows();
  if (m > 20) throw InvalidProblem("enumerate_active_sets: too many constraints for enumeration");
  const Eigen::LLT<Mat> llt(p.Q);
  if (llt.info() != Eigen::Success) throw InvalidProblem("enumerate_active_sets: Q must be positive definite");

  const Vec z_free = llt.solve(-p.q);
  const Mat QinvGt = m > 0 ? Mat(llt.solve(p.G.transpose())) : Mat(n, 0);

  std::optional<Vec> best;
  double best_cost = std::numeric_limits<double>::infinity();
  const double scale = 1.0 + (m > 0 ? p.h.cwiseAbs().maxCoeff() : 0.0);

  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    std::vector<Eigen::Index> active;
    for (Eigen::Index i = 0; i < m; ++i)
      if (mask & (1u << i)) active.push_back(i);
    if (static_cast<Eigen::Index>(active.size()) > n) continue;
    const Eigen::Index k = static_cast<Eigen::Index>(active.size());

    Vec z = z_free;
    Vec mu_active = Vec::Zero(k);
    if (k > 0) {
      Mat Ga(k, n), QinvGat(n, k);
      Vec ha(k);
      for (Eigen::Index r = 0; r < k; ++r) {
        Ga.row(r) = p.G.row(active[static_cast<std::size_t>(r)]);
        QinvGat.col(r) = QinvGt.col(active[static_cast<std::size_t>(r)]);
        ha(r) = p.h(active[static_cast<std::size_t>(r)]);
      }
      // (G_a Q⁻¹ G_aᵀ) μ = G_a z_free - h_a
      const Mat S = Ga * QinvGat;
      const Eigen::ColPivHouseholderQR<Mat> qr(S);
      if (qr.rank() < k) continue;
      mu_active = qr.solve(Vec(Ga * z_free - ha));
      z = z_free - QinvGat * mu_active;
      if ((Ga * z - ha).cwiseAbs().maxCoeff() > tol * scale) continue;
    }
    if (k > 0 && mu_active.minCoeff() < -tol) continue;
    if (m > 0 && (p.G * z - p.h).maxCoeff() > tol * scale) continue;
    const double cost = 0.5 * z.dot(p.Q * z) + p.q.dot(z);
    if (cost < best_cost) {
      best_cost = cost;
      best = z;
    }
  }
  return best;
}

QPProblem random_qp(std::mt19937_64 & rng, int max_vars, int max_constraints)
{
  std::uniform_int_distribution<int> nvars(1, max_vars);
  std::uniform_int_distribution<int> ncons(0, max_constraints);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = nvars(rng);
  const int m = ncons(rng);

  auto gaussian = [&](Eigen::Index r, Eigen::Index c) {
    Mat A(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) A(i, j) = normal(rng);
    return A;
  };

  QPProblem p;
  const Mat L = gaussian(n, n);
  p.Q = L.transpose() * L + 0.1 * Mat::Identity(n, n);
  p.Q = 0.5 * (p.Q + p.Q.transpose());
  p.q = gaussian(n, 1);
  p.G = gaussian(m, n);
  // Feasible by construction around z0, with some rows tight at z0.
  const Vec z0 = gaussian(n, 1);
  p.h = p.G * z0;
  for (int i = 0; i < m; ++i)
    if (unit(rng) < 0.7) p.h(i) += unit(rng);
  if (m >= 2 && unit(rng) < 0.1) {
    // Contradictory pair: g·z ≤ h and -g·z ≤ -h - 1.
    p.G.row(m - 1) = -p.G.row(0);
    p.h(m - 1) = -p.h(0) - 1.0;
  }
  return p;
}

QPCheckReport run_qp_self_check(int count, std::uint64_t seed)
{
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(seed);
  QPCheckReport r;
  for (int i = 0; i < count; ++i) {
    const QPProblem p = random_qp(rng);
    const QPSolution s = solve(p);
    const std::optional<Vec> ref = enumerate_active_sets(p);
    ++r.problems;
    if (!ref) ++r.infeasible;
    const bool solver_optimal = s.status == QPStatus::optimal;
    if (solver_optimal != ref.has_value()) {
      ++r.status_mismatches;
      continue;
    }
    if (!ref) continue;
    r.max_solution_gap = std::max(r.max_solution_gap, (s.z - *ref).lpNorm<Eigen::Infinity>());
    r.max_kkt_residual = std::max(r.max_kkt_residual, kkt_residuals(p, s.z, s.multipliers).max());
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace cbfguard
