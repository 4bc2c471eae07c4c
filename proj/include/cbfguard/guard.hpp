#pragma once

#include "cbfguard/barrier.hpp"
#include "cbfguard/qp.hpp"

#include <functional>
#include <string>

namespace cbfguard {

enum class ControlMode { nominal, recovery };

const char * to_string(ControlMode mode);

/**
 * Inputs to both QPs. The decision variable v is the deviation from a
 * nominal feedback u_nom(x), so an empty nominal law gives the plain
 * min-norm formulation.
 */
struct ControllerConfig
{
  BarrierBank bank;
  InputBounds bounds;         // U, full input in model order [secure | vulnerable]
  InputBounds secure_bounds;  // U_s
  Box vulnerable_box;         // U_v, must be bounded
  double delta = 0.0;
  /// u_nom(x) over all inputs; zero when empty.
  std::function<Vec(const Vec &)> nominal_law;
  /// Secure-only feedback used as the recovery QP's operating point; defaults to the secure part of u_nom.
  std::function<Vec(const Vec &)> secure_law;
  QPOptions qp;

  void validate(const AffineModel & model) const;
  Vec nominal_input(const Vec & x, int input_dim) const;
  Vec secure_input(const Vec & x, int secure_dim) const;
};

/// Σ_j max(lg_j lo_j, lg_j hi_j) = sup over the box of lgᵀ u_v. Throws for unbounded or malformed boxes.
double worst_case_attack_term(const Vec & lgv, const Box & U_v);
double worst_case_attack_term(const BarrierSpec & spec, const AffineModel & model, const Vec & x, const Box & U_v);

/// z = (v, η): min ½|v|² + ½η² s.t. A(u_nom + v) ≤ b and per barrier L_fB̃ + L_gB̃(u_nom + v) ≤ -ηB̃ - l_Bδ.
QPProblem assemble_nominal_qp(const ControllerConfig & cfg, const StateEvaluation & ev, const Vec & u_nom);
QPProblem assemble_nominal_qp(const ControllerConfig & cfg, const AffineModel & model, const Vec & x);

/// z = (v_s, ζ): min ½|v_s|² + ½ζ² s.t. A_s(u_s0 + v_s) ≤ b_s and
/// L_fB̃ + L_{g_s}B̃(u_s0 + v_s) ≤ -ζB̃ - l_Bδ - sup_{U_v} L_{g_v}B̃ u_v.
QPProblem assemble_safe_qp(const ControllerConfig & cfg, const StateEvaluation & ev, int secure_dim, const Vec & u_s0);
QPProblem assemble_safe_qp(const ControllerConfig & cfg, const AffineModel & model, const Vec & x);

struct GuardDecision
{
  /// Full input in model order. In recovery the vulnerable part is λ_v(x); the plant replaces it while an attack is active.
  Vec u;
  ControlMode mode = ControlMode::nominal;
  QPStatus nominal_status = QPStatus::optimal;
  QPStatus safe_status = QPStatus::optimal;
  bool nominal_solved = false;
  bool safe_solved = false;
  /// Nominal QP was infeasible and the safe QP supplied the secure inputs.
  bool escalated = false;
  /// Safe QP was infeasible and the phase-1 point was used.
  bool fallback = false;
  double eta_var = 0.0;
  double zeta = 0.0;
  Vec nominal_multipliers;
  Vec safe_multipliers;

  /// Short status label for traces: "ok", "escalated", "fallback", ...
  std::string status_label() const;
};

/// Switching input: nominal λ(x) outside flag windows, (k_s(x), λ_v(x)) inside.
GuardDecision select_input(const ControllerConfig & cfg, const AffineModel & model, const StateEvaluation & ev,
                           bool in_flag_window);

/// Feasibility residual of barrier row i at input u: L_fB̃ + L_gB̃ u + η B̃ + l_Bδ.
double nominal_constraint_residual(const ControllerConfig & cfg, const StateEvaluation & ev, std::size_t i,
                                   const Vec & u, double eta_var);

struct TrackingGains
{
  double kp_xy = 0.8;
  double kd_xy = 1.6;
  double kp_z = 3.0;
  double kd_z = 3.0;
  double kp_att = 60.0;
  double kd_att = 14.0;
  double kp_yaw = 10.0;
  double kd_yaw = 6.0;
  double max_tilt = 0.2;  // rad, clamp on commanded roll and pitch

  bool operator==(const TrackingGains &) const = default;
};

/**
 * Small-angle PD hover law mapped to motor thrusts through the inverse
 * mixing matrix. The result is ordered like model.input_labels.
 */
std::function<Vec(const Vec &)> quadrotor_tracking_law(const QuadrotorParams & params, const TrackingGains & gains,
                                                       const Vec & reference, const std::vector<int> & input_labels);

/**
 * Secure-motor reallocation of the same PD wrench, assuming the vulnerable
 * motors sit at the midpoint of U_v. Least squares over thrust and roll/pitch
 * torque; yaw is left to the residual.
 */
std::function<Vec(const Vec &)> quadrotor_secure_law(const QuadrotorParams & params, const TrackingGains & gains,
                                                     const Vec & reference, const std::vector<int> & input_labels,
                                                     int secure_inputs, const Box & vulnerable_box);

}  // namespace cbfguard
