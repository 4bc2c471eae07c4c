#include "cbfguard/guard.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cbfguard {

namespace {

double wrap_angle(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

// PD wrench (u_f, τ_p, τ_q, τ_r) toward a hover reference (x, y, z[, ψ]).
Eigen::Vector4d tracking_wrench(const QuadrotorParams & prm, const TrackingGains & k, const Vec & ref, const Vec & s)
{
  const double psi_ref = ref.size() > 3 ? ref(3) : 0.0;
  const double phi = s(kPhi), theta = s(kTheta), psi = s(kPsi);
  const double p = s(kP), q = s(kQ), r = s(kR);

  const double ax = k.kp_xy * (ref(0) - s(kX)) - k.kd_xy * s(kVx);
  const double ay = k.kp_xy * (ref(1) - s(kY)) - k.kd_xy * s(kVy);
  const double az = k.kp_z * (ref(2) - s(kZ)) - k.kd_z * s(kVz);

  const double tilt = std::max(std::cos(phi) * std::cos(theta), 0.5);
  const double uf = (prm.mass * (prm.gravity + az) + prm.k_t * s(kVz)) / tilt;

  const double cpsi = std::cos(psi), spsi = std::sin(psi);
  const double theta_d = std::clamp((ax * cpsi + ay * spsi) / prm.gravity, -k.max_tilt, k.max_tilt);
  const double phi_d = std::clamp((ax * spsi - ay * cpsi) / prm.gravity, -k.max_tilt, k.max_tilt);

  const double ap = k.kp_att * (phi_d - phi) - k.kd_att * p;
  const double aq = k.kp_att * (theta_d - theta) - k.kd_att * q;
  const double ar = k.kp_yaw * wrap_angle(psi_ref - psi) - k.kd_yaw * r;

  Eigen::Vector4d w;
  w(0) = uf;
  w(1) = prm.ixx * ap + prm.k_r * p + q * r * (prm.izz - prm.iyy);
  w(2) = prm.iyy * aq + prm.k_r * q + p * r * (prm.ixx - prm.izz);
  w(3) = prm.izz * ar + prm.k_r * r + p * q * (prm.iyy - prm.izz);
  return w;
}

void check_reference(const Vec & reference)
{
  if (reference.size() != 3 && reference.size() != 4)
    throw std::invalid_argument("tracking reference must be (x, y, z) or (x, y, z, yaw)");
}

}  // namespace

const char * to_string(ControlMode mode) { return mode == ControlMode::nominal ? "nominal" : "recovery"; }

void ControllerConfig::validate(const AffineModel & model) const
{
  bank.validate();
  const int m = model.input_dim();
  const int ms = model.secure_inputs;
  const int mv = model.vulnerable_inputs;
  if (bounds.A.cols() != m && bounds.A.rows() > 0) throw std::invalid_argument("controller: U has the wrong input dimension");
  if (secure_bounds.A.cols() != ms && secure_bounds.A.rows() > 0)
    throw std::invalid_argument("controller: U_s has the wrong input dimension");
  if (vulnerable_box.size() != mv) throw std::invalid_argument("controller: U_v has the wrong dimension");
  if (!vulnerable_box.lo.allFinite() || !vulnerable_box.hi.allFinite())
    throw std::invalid_argument("controller: U_v must be bounded");
  bounds.validate();
  secure_bounds.validate();
  if (delta < 0.0) throw std::invalid_argument("controller: disturbance bound must be nonnegative");
}

Vec ControllerConfig::nominal_input(const Vec & x, int input_dim) const
{
  if (!nominal_law) return Vec::Zero(input_dim);
  Vec u = nominal_law(x);
  if (u.size() != input_dim) throw std::invalid_argument("controller: nominal law returned the wrong dimension");
  return u;
}

Vec ControllerConfig::secure_input(const Vec & x, int secure_dim) const
{
  if (secure_law) {
    Vec u = secure_law(x);
    if (u.size() != secure_dim) throw std::invalid_argument("controller: secure law returned the wrong dimension");
    return u;
  }
  if (!nominal_law) return Vec::Zero(secure_dim);
  return nominal_law(x).head(secure_dim);
}

double worst_case_attack_term(const Vec & lgv, const Box & U_v)
{
  if (lgv.size() != U_v.size()) throw std::invalid_argument("worst_case_attack_term: dimension mismatch");
  if (!U_v.lo.allFinite() || !U_v.hi.allFinite()) throw std::invalid_argument("worst_case_attack_term: U_v is unbounded");
  if ((U_v.lo.array() > U_v.hi.array()).any()) throw std::invalid_argument("worst_case_attack_term: U_v has lo > hi");
  double total = 0.0;
  for (Eigen::Index j = 0; j < lgv.size(); ++j) total += std::max(lgv(j) * U_v.lo(j), lgv(j) * U_v.hi(j));
  return total;
}

double worst_case_attack_term(const BarrierSpec & spec, const AffineModel & model, const Vec & x, const Box & U_v)
{
  const EffectiveBarrier eb = effective_barrier(spec, model, x);
  return worst_case_attack_term(eb.lg.tail(model.vulnerable_inputs), U_v);
}

QPProblem assemble_nominal_qp(const ControllerConfig & cfg, const StateEvaluation & ev, const Vec & u_nom)
{
  const Eigen::Index m = u_nom.size();
  const Eigen::Index n = m + 1;
  const Eigen::Index nb = cfg.bounds.A.rows();
  const Eigen::Index nc = static_cast<Eigen::Index>(cfg.bank.size());

  QPProblem qp;
  qp.Q = Mat::Identity(n, n);
  qp.q = Vec::Zero(n);
  qp.G = Mat::Zero(nb + nc, n);
  qp.h = Vec::Zero(nb + nc);
  if (nb > 0) {
    qp.G.topLeftCorner(nb, m) = cfg.bounds.A;
    qp.h.head(nb) = cfg.bounds.b - cfg.bounds.A * u_nom;
  }
  for (Eigen::Index i = 0; i < nc; ++i) {
    const auto & eb = ev.barriers[static_cast<std::size_t>(i)];
    const double lip = cfg.bank[static_cast<std::size_t>(i)].lipschitz;
    qp.G.block(nb + i, 0, 1, m) = eb.lg.transpose();
    qp.G(nb + i, m) = eb.value;
    qp.h(nb + i) = -eb.lf - eb.lg.dot(u_nom) - lip * cfg.delta;
  }
  return qp;
}

QPProblem assemble_nominal_qp(const ControllerConfig & cfg, const AffineModel & model, const Vec & x)
{
  return assemble_nominal_qp(cfg, evaluate_bank(cfg.bank, model, x), cfg.nominal_input(x, model.input_dim()));
}

QPProblem assemble_safe_qp(const ControllerConfig & cfg, const StateEvaluation & ev, int secure_dim, const Vec & u_s0)
{
  const Eigen::Index ms = secure_dim;
  const Eigen::Index n = ms + 1;
  const Eigen::Index nb = cfg.secure_bounds.A.rows();
  const Eigen::Index nc = static_cast<Eigen::Index>(cfg.bank.size());

  QPProblem qp;
  qp.Q = Mat::Identity(n, n);
  qp.q = Vec::Zero(n);
  qp.G = Mat::Zero(nb + nc, n);
  qp.h = Vec::Zero(nb + nc);
  if (nb > 0) {
    qp.G.topLeftCorner(nb, ms) = cfg.secure_bounds.A;
    qp.h.head(nb) = cfg.secure_bounds.b - cfg.secure_bounds.A * u_s0;
  }
  for (Eigen::Index i = 0; i < nc; ++i) {
    const auto & eb = ev.barriers[static_cast<std::size_t>(i)];
    const double lip = cfg.bank[static_cast<std::size_t>(i)].lipschitz;
    const Vec lgs = eb.lg.head(ms);
    const Vec lgv = eb.lg.tail(eb.lg.size() - ms);
    qp.G.block(nb + i, 0, 1, ms) = lgs.transpose();
    qp.G(nb + i, ms) = eb.value;
    qp.h(nb + i) = -eb.lf - lgs.dot(u_s0) - lip * cfg.delta - worst_case_attack_term(lgv, cfg.vulnerable_box);
  }
  return qp;
}

QPProblem assemble_safe_qp(const ControllerConfig & cfg, const AffineModel & model, const Vec & x)
{
  return assemble_safe_qp(cfg, evaluate_bank(cfg.bank, model, x), model.secure_inputs,
                          cfg.secure_input(x, model.secure_inputs));
}

double nominal_constraint_residual(const ControllerConfig & cfg, const StateEvaluation & ev, std::size_t i,
                                   const Vec & u, double eta_var)
{
  const auto & eb = ev.barriers.at(i);
  return eb.lf + eb.lg.dot(u) + eta_var * eb.value + cfg.bank[i].lipschitz * cfg.delta;
}

std::string GuardDecision::status_label() const
{
  if (fallback) return escalated ? "escalated_fallback" : "fallback";
  if (escalated) return "escalated";
  return "ok";
}

GuardDecision select_input(const ControllerConfig & cfg, const AffineModel & model, const StateEvaluation & ev,
                           bool in_flag_window)
{
  const int m = model.input_dim();
  const int ms = model.secure_inputs;
  const int mv = model.vulnerable_inputs;

  GuardDecision out;
  out.mode = in_flag_window ? ControlMode::recovery : ControlMode::nominal;

  const Vec u_nom = cfg.nominal_input(ev.x, m);
  const QPSolution nominal = solve(assemble_nominal_qp(cfg, ev, u_nom), cfg.qp);
  out.nominal_status = nominal.status;
  out.nominal_solved = true;
  Vec lambda;
  if (nominal.status == QPStatus::optimal) {
    lambda = u_nom + nominal.z.head(m);
    if (cfg.bounds.box) lambda = cfg.bounds.box->clamp(lambda);
    out.eta_var = nominal.z(m);
    out.nominal_multipliers = nominal.multipliers;
  } else {
    lambda = cfg.bounds.box ? cfg.bounds.box->clamp(u_nom) : u_nom;
  }

  if (!in_flag_window && nominal.status == QPStatus::optimal) {
    out.u = lambda;
    return out;
  }
  out.escalated = !in_flag_window;

  const Vec u_s0 = cfg.secure_input(ev.x, ms);
  const QPSolution safe = solve(assemble_safe_qp(cfg, ev, ms, u_s0), cfg.qp);
  out.safe_status = safe.status;
  out.safe_solved = true;
  Vec u_s = u_s0 + safe.z.head(ms);
  if (safe.status == QPStatus::optimal) {
    out.zeta = safe.z(ms);
    out.safe_multipliers = safe.multipliers;
  } else {
    out.fallback = true;
  }
  if (cfg.secure_bounds.box) u_s = cfg.secure_bounds.box->clamp(u_s);

  out.u.resize(m);
  out.u.head(ms) = u_s;
  out.u.tail(mv) = lambda.tail(mv);
  return out;
}

std::function<Vec(const Vec &)> quadrotor_tracking_law(const QuadrotorParams & params, const TrackingGains & gains,
                                                       const Vec & reference, const std::vector<int> & input_labels)
{
  check_reference(reference);
  if (static_cast<int>(input_labels.size()) != kMotorCount)
    throw std::invalid_argument("tracking law needs one label per motor");
  const Eigen::Matrix4d Minv = mixing_matrix(params).inverse();
  return [=](const Vec & x) {
    const Eigen::Vector4d f = Minv * tracking_wrench(params, gains, reference, x);
    Vec u(kMotorCount);
    for (int j = 0; j < kMotorCount; ++j) u(j) = f(input_labels[static_cast<std::size_t>(j)] - 1);
    return u;
  };
}

std::function<Vec(const Vec &)> quadrotor_secure_law(const QuadrotorParams & params, const TrackingGains & gains,
                                                     const Vec & reference, const std::vector<int> & input_labels,
                                                     int secure_inputs, const Box & vulnerable_box)
{
  check_reference(reference);
  if (static_cast<int>(input_labels.size()) != kMotorCount)
    throw std::invalid_argument("secure law needs one label per motor");
  const int mv = kMotorCount - secure_inputs;
  if (vulnerable_box.size() != mv) throw std::invalid_argument("secure law: U_v has the wrong dimension");
  const Mat M3 = mixing_matrix(params).topRows(3);
  Mat Ms(3, secure_inputs);
  Mat Mv(3, mv);
  for (int j = 0; j < kMotorCount; ++j) {
    const auto col = M3.col(input_labels[static_cast<std::size_t>(j)] - 1);
    if (j < secure_inputs) Ms.col(j) = col;
    else Mv.col(j - secure_inputs) = col;
  }
  const Vec mid = vulnerable_box.midpoint();
  return [=](const Vec & x) {
    const Eigen::Vector4d w = tracking_wrench(params, gains, reference, x);
    const Vec rhs = w.head(3) - Mv * mid;
    return Vec(Ms.colPivHouseholderQr().solve(rhs));
  };
}

}  // namespace cbfguard
