#pragma once

#include "cbfguard/dynamics.hpp"

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cbfguard {

/**
 * A barrier B with safe set S = {x : B(x) ≤ 0}.
 *
 * Relative-degree-2 barriers (input absent from Ḃ) are handled through the
 * effective barrier B̃ = ∇B·f + αB; every detection and QP quantity is
 * computed on B̃. For relative degree 1, B̃ = B.
 */
struct BarrierSpec
{
  std::string name;
  std::function<double(const Vec &)> value;
  std::function<Vec(const Vec &)> gradient;
  /// Needed only for relative degree 2.
  std::function<Mat(const Vec &)> hessian;

  double eta = 1.0;        // bound on |d²B̃/dt²|
  double lipschitz = 1.0;  // l_B of B̃
  double c_bar = 0.0225;
  double c_M = 1.0;
  int relative_degree = 1;
  double alpha = 1.0;      // 1/s, composition gain for degree 2

  void validate() const;
};

struct BarrierBank
{
  std::vector<BarrierSpec> barriers;

  std::size_t size() const { return barriers.size(); }
  const BarrierSpec & operator[](std::size_t i) const { return barriers[i]; }
  void validate() const;
};

class InvariantViolation : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// B̃ and its Lie derivatives at one state.
struct EffectiveBarrier
{
  double raw = 0.0;      // B(x)
  double value = 0.0;    // B̃(x)
  Vec gradient;          // ∇B̃(x)
  double lf = 0.0;       // L_f B̃
  Vec lg;                // L_g B̃, ordered like the model inputs [secure | vulnerable]
  double raw_lg_norm = 0.0;  // |L_g B|, zero for a correctly classified degree-2 barrier
};

/// Quantities shared by all barriers at one state.
struct StateEvaluation
{
  Vec x;
  Vec f;
  Mat g;
  std::vector<EffectiveBarrier> barriers;
};

EffectiveBarrier effective_barrier(const BarrierSpec & spec, const AffineModel & model, const Vec & x);
StateEvaluation evaluate_bank(const BarrierBank & bank, const AffineModel & model, const Vec & x);

/// B̃(x) only.
double effective_value(const BarrierSpec & spec, const AffineModel & model, const Vec & x);

/// H(x, u) = L_f B̃ + L_g B̃ u + l_B δ.
double evaluate_H(const BarrierSpec & spec, const AffineModel & model, const Vec & x, const Vec & u);
double evaluate_H(const EffectiveBarrier & eb, double lipschitz, double delta, const Vec & u);

/// -min over the grid; a lower bound on the true c_M. Throws on an empty grid,
/// a grid point outside S, or a nonpositive result.
double compute_cM(const std::function<double(const Vec &)> & barrier_value, const std::vector<Vec> & grid);
double compute_cM(const BarrierSpec & spec, const std::vector<Vec> & grid);

enum class Region { interior, band, outside };

const char * to_string(Region r);

/// interior: value ≤ -c̄; band: -c̄ < value ≤ 0; outside: value > 0.
Region classify(double value, double c_bar);
std::vector<Region> region_membership(const BarrierBank & bank, const AffineModel & model, const Vec & x);

/// Warnings for degree-2 specs whose raw L_g B is not identically zero on the samples.
std::vector<std::string> relative_degree_warnings(const BarrierSpec & spec, const AffineModel & model,
                                                  const std::vector<Vec> & samples, double tol = 1e-12);

// Builtin quadrotor barriers (relative degree 2 in the motor inputs).
BarrierSpec quad_altitude_barrier(double floor = 0.02);  // B₁ = -z + floor
BarrierSpec quad_roll_barrier(double max_angle = 0.3);   // B₂ = φ² - φ_M²
BarrierSpec quad_pitch_barrier(double max_angle = 0.3);  // B₃ = θ² - θ_M²

/// quad_z, quad_phi or quad_theta with default geometry; throws on an unknown name.
BarrierSpec builtin_barrier(const std::string & name);

}  // namespace cbfguard
