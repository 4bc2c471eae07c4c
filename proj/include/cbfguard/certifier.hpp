#pragma once

#include "cbfguard/guard.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cbfguard {

enum class Assumption { A2, A3 };

const char * to_string(Assumption a);

/**
 * Sampling evidence, not a proof: passed means the worst sampled margin was
 * nonpositive. Margins are per barrier and exact per sample, since the input
 * sets are boxes and each constraint is linear in the input.
 */
struct Certificate
{
  Assumption assumption = Assumption::A2;
  std::string barrier;
  double c_bar = 0.0;
  double delta_bar = 0.0;  // A2 only
  int samples = 0;
  double worst_margin = 0.0;
  bool passed = false;
  std::vector<Vec> witnesses;  // up to 10 worst samples, worst first
};

struct CertifierSettings
{
  Box envelope;  // sampling box over the full state
  int samples = 10000;
  std::uint64_t seed = 0;
  int attempts_per_sample = 2000;  // rejection budget
  double eta_factor = 1.5;
  double lipschitz_factor = 1.2;
  double rollout_step = 1e-3;  // s, spacing of the second-derivative stencil

  void validate(int state_dim) const;
};

/**
 * Uniform samples of the envelope with -c̄ < B̃_i ≤ 0 and every raw B_j ≤ 0.
 * Throws std::invalid_argument when the rejection budget is exhausted.
 */
std::vector<Vec> sample_band(const BarrierBank & bank, std::size_t index, const AffineModel & model,
                             const CertifierSettings & settings);

/// L_fB̃ + min_{u∈U} L_gB̃ u + δ̄B̃ + l_Bδ. U must carry a box.
double a2_margin(const EffectiveBarrier & eb, const BarrierSpec & spec, const InputBounds & U, double delta_bar,
                 double delta);
/// L_fB̃ + min_{u_s∈U_s} L_{g_s}B̃ u_s + sup_{u_v∈U_v} L_{g_v}B̃ u_v + l_Bδ.
double a3_margin(const EffectiveBarrier & eb, const BarrierSpec & spec, const InputBounds & U_s, const Box & U_v,
                 double delta);

Certificate certify_A2(const ControllerConfig & cfg, const AffineModel & model, std::size_t index, double delta_bar,
                       const std::vector<Vec> & samples);
Certificate certify_A3(const ControllerConfig & cfg, const AffineModel & model, std::size_t index,
                       const std::vector<Vec> & samples);

/// Samples each barrier's band and returns A2 and A3 certificates for every barrier.
std::vector<Certificate> certify_all(const ControllerConfig & cfg, const AffineModel & model, double delta_bar,
                                     const CertifierSettings & settings);

bool all_passed(const std::vector<Certificate> & certificates);

struct ConstantEstimate
{
  std::string barrier;
  double eta = 0.0;
  double lipschitz = 0.0;
  double c_M = 0.0;
  double max_second_derivative = 0.0;
  double max_gradient_norm = 0.0;
  int samples = 0;
};

/**
 * η from the largest |d²B̃/dt²| along the flow with piecewise-constant random
 * inputs (box vertices included) and disturbances, by a fourth-order
 * five-point stencil; l_B from the largest ‖∇B̃‖; c_M = -min B̃ over the
 * samples inside S. Samples are envelope points with every raw B_j ≤ 0.
 */
ConstantEstimate estimate_constants(const BarrierBank & bank, std::size_t index, const AffineModel & model,
                                    const InputBounds & U, const CertifierSettings & settings);

void write_certificates(std::ostream & out, const std::vector<Certificate> & certificates,
                        const std::vector<ConstantEstimate> & estimates);

}  // namespace cbfguard
