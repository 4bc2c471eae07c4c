#include "cbfguard/barrier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cbfguard {

namespace {

EffectiveBarrier effective_from(const BarrierSpec & spec, const Vec & x, const Vec & f, const Mat & g,
                                const std::function<Mat()> & jacobian)
{
  EffectiveBarrier eb;
  eb.raw = spec.value(x);
  const Vec grad_b = spec.gradient(x);
  eb.raw_lg_norm = (g.transpose() * grad_b).norm();
  if (spec.relative_degree == 1) {
    eb.value = eb.raw;
    eb.gradient = grad_b;
  } else {
    eb.value = grad_b.dot(f) + spec.alpha * eb.raw;
    eb.gradient = spec.hessian(x) * f + jacobian().transpose() * grad_b + spec.alpha * grad_b;
  }
  eb.lf = eb.gradient.dot(f);
  eb.lg = g.transpose() * eb.gradient;
  return eb;
}

}  // namespace

void BarrierSpec::validate() const
{
  if (!value || !gradient) throw std::invalid_argument("barrier " + name + ": value and gradient are required");
  if (relative_degree != 1 && relative_degree != 2)
    throw std::invalid_argument("barrier " + name + ": relative degree must be 1 or 2");
  if (relative_degree == 2 && !hessian) throw std::invalid_argument("barrier " + name + ": degree 2 needs a Hessian");
  if (relative_degree == 2 && !(alpha > 0.0)) throw std::invalid_argument("barrier " + name + ": alpha must be positive");
  if (!(c_M > 0.0)) throw std::invalid_argument("barrier " + name + ": c_M must be positive");
  if (!(c_bar > 0.0 && c_bar < c_M)) throw std::invalid_argument("barrier " + name + ": c_bar must lie in (0, c_M)");
  if (!(eta > 0.0)) throw std::invalid_argument("barrier " + name + ": eta must be positive");
  if (!(lipschitz > 0.0)) throw std::invalid_argument("barrier " + name + ": lipschitz constant must be positive");
}

void BarrierBank::validate() const
{
  if (barriers.empty()) throw std::invalid_argument("barrier bank is empty");
  for (const auto & b : barriers) b.validate();
}

EffectiveBarrier effective_barrier(const BarrierSpec & spec, const AffineModel & model, const Vec & x)
{
  const Vec f = model.drift(x);
  const Mat g = model.input_matrix(x);
  return effective_from(spec, x, f, g, [&] { return model.drift_jacobian(x); });
}

StateEvaluation evaluate_bank(const BarrierBank & bank, const AffineModel & model, const Vec & x)
{
  StateEvaluation ev;
  ev.x = x;
  ev.f = model.drift(x);
  ev.g = model.input_matrix(x);
  Mat J;
  bool have_jacobian = false;
  auto jacobian = [&]() -> Mat {
    if (!have_jacobian) {
      J = model.drift_jacobian(x);
      have_jacobian = true;
    }
    return J;
  };
  ev.barriers.reserve(bank.size());
  for (const auto & spec : bank.barriers) ev.barriers.push_back(effective_from(spec, x, ev.f, ev.g, jacobian));
  return ev;
}

double effective_value(const BarrierSpec & spec, const AffineModel & model, const Vec & x)
{
  if (spec.relative_degree == 1) return spec.value(x);
  return spec.gradient(x).dot(model.drift(x)) + spec.alpha * spec.value(x);
}

double evaluate_H(const EffectiveBarrier & eb, double lipschitz, double delta, const Vec & u)
{
  return eb.lf + eb.lg.dot(u) + lipschitz * delta;
}

double evaluate_H(const BarrierSpec & spec, const AffineModel & model, const Vec & x, const Vec & u)
{
  return evaluate_H(effective_barrier(spec, model, x), spec.lipschitz, model.disturbance_bound, u);
}

double compute_cM(const std::function<double(const Vec &)> & barrier_value, const std::vector<Vec> & grid)
{
  if (grid.empty()) throw std::invalid_argument("compute_cM: empty grid");
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto & x : grid) {
    const double b = barrier_value(x);
    if (b > 0.0) throw std::invalid_argument("compute_cM: grid point outside the safe set");
    lowest = std::min(lowest, b);
  }
  const double c_M = -lowest;
  if (!(c_M > 0.0)) throw InvariantViolation("compute_cM: c_M must be positive (grid touches only the boundary)");
  return c_M;
}

double compute_cM(const BarrierSpec & spec, const std::vector<Vec> & grid) { return compute_cM(spec.value, grid); }

const char * to_string(Region r)
{
  switch (r) {
    case Region::interior: return "interior";
    case Region::band: return "band";
    case Region::outside: return "outside";
  }
  return "?";
}

Region classify(double value, double c_bar)
{
  if (value > 0.0) return Region::outside;
  if (value >= -c_bar) return Region::band;
  return Region::interior;
}

std::vector<Region> region_membership(const BarrierBank & bank, const AffineModel & model, const Vec & x)
{
  std::vector<Region> out;
  out.reserve(bank.size());
  for (const auto & spec : bank.barriers) out.push_back(classify(effective_value(spec, model, x), spec.c_bar));
  return out;
}

std::vector<std::string> relative_degree_warnings(const BarrierSpec & spec, const AffineModel & model,
                                                  const std::vector<Vec> & samples, double tol)
{
  std::vector<std::string> warnings;
  if (spec.relative_degree != 2) return warnings;
  double worst = 0.0;
  for (const auto & x : samples) worst = std::max(worst, (model.input_matrix(x).transpose() * spec.gradient(x)).norm());
  if (worst > tol)
    warnings.push_back("barrier " + spec.name + " is declared relative degree 2 but |L_g B| reaches "
                       + std::to_string(worst));
  return warnings;
}

BarrierSpec quad_altitude_barrier(double floor)
{
  BarrierSpec s;
  s.name = "quad_z";
  s.relative_degree = 2;
  s.value = [floor](const Vec & x) { return -x(kZ) + floor; };
  s.gradient = [](const Vec & x) {
    Vec g = Vec::Zero(x.size());
    g(kZ) = -1.0;
    return g;
  };
  s.hessian = [](const Vec & x) { return Mat::Zero(x.size(), x.size()); };
  return s;
}

namespace {

BarrierSpec angle_barrier(const std::string & name, int index, double max_angle)
{
  BarrierSpec s;
  s.name = name;
  s.relative_degree = 2;
  s.c_M = max_angle * max_angle;
  s.value = [index, max_angle](const Vec & x) { return x(index) * x(index) - max_angle * max_angle; };
  s.gradient = [index](const Vec & x) {
    Vec g = Vec::Zero(x.size());
    g(index) = 2.0 * x(index);
    return g;
  };
  s.hessian = [index](const Vec & x) {
    Mat h = Mat::Zero(x.size(), x.size());
    h(index, index) = 2.0;
    return h;
  };
  return s;
}

}  // namespace

BarrierSpec quad_roll_barrier(double max_angle) { return angle_barrier("quad_phi", kPhi, max_angle); }

BarrierSpec quad_pitch_barrier(double max_angle) { return angle_barrier("quad_theta", kTheta, max_angle); }

BarrierSpec builtin_barrier(const std::string & name)
{
  if (name == "quad_z") return quad_altitude_barrier();
  if (name == "quad_phi") return quad_roll_barrier();
  if (name == "quad_theta") return quad_pitch_barrier();
  throw std::invalid_argument("unknown builtin barrier '" + name + "'");
}

}  // namespace cbfguard
