#include "cbfguard/dynamics.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace cbfguard {

namespace {

Vec draw_ball(std::mt19937_64 & rng, int dim, double delta)
{
  if (delta < 0.0) throw std::invalid_argument("disturbance bound must be nonnegative");
  Vec v = Vec::Zero(dim);
  if (delta == 0.0 || dim == 0) return v;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < dim; ++i) v(i) = normal(rng);
  const double norm = v.norm();
  if (norm == 0.0) return v;
  const double radius = delta * std::pow(unit(rng), 1.0 / dim);
  v *= radius / norm;
  // Guard the bound against rounding in the rescale.
  const double len = v.norm();
  if (len > delta) v *= delta / len;
  return v;
}

}  // namespace

void QuadrotorParams::validate() const
{
  const std::pair<const char *, double> fields[] = {
    {"mass", mass}, {"ixx", ixx}, {"iyy", iyy}, {"izz", izz}, {"k_t", k_t}, {"k_r", k_r},
    {"arm_length", arm_length}, {"yaw_coefficient", yaw_coefficient}, {"gravity", gravity}, {"f_max", f_max}};
  for (const auto & [name, value] : fields)
    if (!(value > 0.0)) throw std::invalid_argument(std::string("quadrotor parameter ") + name + " must be positive");
  if (!(f_min < f_max)) throw std::invalid_argument("quadrotor parameter f_min must be below f_max");
  if (f_min < -f_max) throw std::invalid_argument("quadrotor parameter f_min must satisfy |f_min| <= f_max");
}

bool Box::contains(const Vec & v, double tol) const
{
  return v.size() == lo.size() && ((v - lo).array() >= -tol).all() && ((hi - v).array() >= -tol).all();
}

Vec Box::clamp(const Vec & v) const { return v.cwiseMax(lo).cwiseMin(hi); }

InputBounds InputBounds::from_box(const Box & box)
{
  const Eigen::Index k = box.size();
  InputBounds u;
  u.A = Mat::Zero(2 * k, k);
  u.b = Vec::Zero(2 * k);
  for (Eigen::Index i = 0; i < k; ++i) {
    u.A(2 * i, i) = 1.0;
    u.b(2 * i) = box.hi(i);
    u.A(2 * i + 1, i) = -1.0;
    u.b(2 * i + 1) = -box.lo(i);
  }
  u.box = box;
  return u;
}

bool InputBounds::contains(const Vec & u, double tol) const
{
  if (A.rows() == 0) return true;
  return ((A * u - b).array() <= tol).all();
}

void InputBounds::validate() const
{
  if (A.rows() != b.size()) throw std::invalid_argument("input bounds: rows of A must match length of b");
  if (A.rows() == 0) return;
  const auto [point, violation] = least_violation_point(A, b);
  if (violation > 1e-9) throw std::invalid_argument("input bounds: the set {u : Au <= b} is empty");
  if (box) {
    if ((box->lo.array() > box->hi.array()).any()) throw std::invalid_argument("input bounds: box has lo > hi");
    if (!contains(box->lo, 1e-12) || !contains(box->hi, 1e-12) || !contains(box->midpoint(), 1e-12))
      throw std::invalid_argument("input bounds: box tag is inconsistent with (A, b)");
  }
}

Vec AffineModel::evaluate(const Vec & x, const Vec & u, const Vec & d) const
{
  return drift(x) + input_matrix(x) * u + d;
}

Vec AffineModel::evaluate(const Vec & x, const Vec & u) const { return drift(x) + input_matrix(x) * u; }

Mat AffineModel::drift_jacobian(const Vec & x) const
{
  if (drift_jacobian_fn) return drift_jacobian_fn(x);
  const Eigen::Index n = x.size();
  Mat J(n, n);
  Vec xp = x;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(x(j)));
    xp(j) = x(j) + h;
    const Vec fp = drift(xp);
    xp(j) = x(j) - h;
    const Vec fm = drift(xp);
    xp(j) = x(j);
    J.col(j) = (fp - fm) / (2.0 * h);
  }
  return J;
}

Vec quadrotor_derivative(const Vec & s, const Eigen::Vector4d & w, const QuadrotorParams & prm)
{
  if (s.size() != kQuadStateDim) throw std::invalid_argument("quadrotor state must have 12 components");
  const double phi = s(kPhi), theta = s(kTheta), psi = s(kPsi);
  const double p = s(kP), q = s(kQ), r = s(kR);
  const double cphi = std::cos(phi), sphi = std::sin(phi);
  const double cth = std::cos(theta), sth = std::sin(theta);
  const double cpsi = std::cos(psi), spsi = std::sin(psi);
  if (std::abs(cth) < 1e-9) throw SingularityError("quadrotor attitude singular: cos(theta) = 0");
  const double tth = sth / cth;
  const double uf = w(0);
  const double m = prm.mass;

  Vec dx(kQuadStateDim);
  dx(kX) = s(kVx);
  dx(kY) = s(kVy);
  dx(kZ) = s(kVz);
  dx(kVx) = ((cphi * cpsi * sth + sphi * spsi) * uf - prm.k_t * s(kVx)) / m;
  dx(kVy) = ((cphi * spsi * sth - sphi * cpsi) * uf - prm.k_t * s(kVy)) / m;
  dx(kVz) = (cth * cphi * uf - m * prm.gravity - prm.k_t * s(kVz)) / m;
  dx(kPhi) = p + q * sphi * tth + r * cphi * tth;
  dx(kTheta) = q * cphi - r * sphi;
  dx(kPsi) = (q * sphi + r * cphi) / cth;
  dx(kP) = (-prm.k_r * p - q * r * (prm.izz - prm.iyy) + w(1)) / prm.ixx;
  dx(kQ) = (-prm.k_r * q - p * r * (prm.ixx - prm.izz) + w(2)) / prm.iyy;
  dx(kR) = (-prm.k_r * r - p * q * (prm.iyy - prm.izz) + w(3)) / prm.izz;
  return dx;
}

Eigen::Matrix4d mixing_matrix(const QuadrotorParams & prm)
{
  const double l = prm.arm_length, d = prm.yaw_coefficient;
  Eigen::Matrix4d M;
  M << 1.0, 1.0, 1.0, 1.0,
       0.0, -l, 0.0, l,
       -l, 0.0, l, 0.0,
       d, -d, d, -d;
  return M;
}

Eigen::Vector4d mix_motors(const Eigen::Vector4d & f, const QuadrotorParams & prm) { return mixing_matrix(prm) * f; }

AffineModel as_affine_in_motors(const QuadrotorParams & prm, const std::set<int> & vulnerable, double disturbance_bound)
{
  for (int motor : vulnerable)
    if (motor < 1 || motor > kMotorCount) throw std::invalid_argument("vulnerable motor index out of range 1..4");
  if (static_cast<int>(vulnerable.size()) == kMotorCount)
    throw std::invalid_argument("at least one motor must be secure (no recovery authority otherwise)");
  if (disturbance_bound < 0.0) throw std::invalid_argument("disturbance bound must be nonnegative");

  std::vector<int> labels;
  for (int motor = 1; motor <= kMotorCount; ++motor)
    if (!vulnerable.count(motor)) labels.push_back(motor);
  for (int motor : vulnerable) labels.push_back(motor);

  const Eigen::Matrix4d M = mixing_matrix(prm);
  AffineModel model;
  model.state_dim = kQuadStateDim;
  model.vulnerable_inputs = static_cast<int>(vulnerable.size());
  model.secure_inputs = kMotorCount - model.vulnerable_inputs;
  model.disturbance_bound = disturbance_bound;
  model.input_labels = labels;
  model.drift = [prm](const Vec & x) { return quadrotor_derivative(x, Eigen::Vector4d::Zero(), prm); };
  model.input_matrix = [prm, M, labels](const Vec & x) {
    const Vec f0 = quadrotor_derivative(x, Eigen::Vector4d::Zero(), prm);
    Mat g(kQuadStateDim, kMotorCount);
    for (int j = 0; j < kMotorCount; ++j) {
      const Eigen::Vector4d column = M.col(labels[static_cast<std::size_t>(j)] - 1);
      g.col(j) = quadrotor_derivative(x, column, prm) - f0;
    }
    return g;
  };
  return model;
}

Box motor_box(const QuadrotorParams & prm, int motors)
{
  return Box{Vec::Constant(motors, prm.f_min), Vec::Constant(motors, prm.f_max)};
}

Vec sample_disturbance(int dim, double delta, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  return draw_ball(rng, dim, delta);
}

DisturbanceSource::DisturbanceSource(DisturbanceKind kind, int dim, double delta, std::uint64_t seed)
  : kind_(kind), dim_(dim), delta_(delta), rng_(seed), phases_(Vec::Zero(dim))
{
  if (delta < 0.0) throw std::invalid_argument("disturbance bound must be nonnegative");
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  for (int i = 0; i < dim; ++i) phases_(i) = angle(rng_);
}

Vec DisturbanceSource::next(double t)
{
  if (kind_ == DisturbanceKind::uniform_ball) return draw_ball(rng_, dim_, delta_);
  // Each component oscillates at its own frequency; the 1/sqrt(dim) scaling keeps |d| ≤ δ.
  Vec d(dim_);
  for (int i = 0; i < dim_; ++i) d(i) = std::sin(2.0 * std::numbers::pi * (0.5 + 0.1 * i) * t + phases_(i));
  return d * (delta_ / std::sqrt(static_cast<double>(std::max(dim_, 1))));
}

}  // namespace cbfguard
