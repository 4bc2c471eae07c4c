#pragma once

#include "cbfguard/qp.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace cbfguard {

/// Quadrotor state layout: position, velocity, ZYX Euler angles, body rates.
enum QuadState : int {
  kX = 0, kY, kZ,
  kVx, kVy, kVz,
  kPhi, kTheta, kPsi,
  kP, kQ, kR,
  kQuadStateDim
};

inline constexpr int kMotorCount = 4;

class SingularityError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct QuadrotorParams
{
  double mass = 4.493;            // kg
  double ixx = 0.177;             // kg m²
  double iyy = 0.177;
  double izz = 0.344;
  double k_t = 1.0;               // translational drag
  double k_r = 1.5;               // rotational drag
  double arm_length = 0.1;        // m
  double yaw_coefficient = 0.0024;  // m
  double gravity = 9.8;           // m/s²
  double f_min = 0.0;             // N, per motor
  double f_max = 27.7;            // N, per motor

  bool operator==(const QuadrotorParams &) const = default;

  /// Throws std::invalid_argument naming the first nonpositive field.
  void validate() const;
};

struct Box
{
  Vec lo;
  Vec hi;

  bool operator==(const Box &) const = default;
  Eigen::Index size() const { return lo.size(); }
  bool contains(const Vec & v, double tol = 0.0) const;
  Vec clamp(const Vec & v) const;
  Vec midpoint() const { return 0.5 * (lo + hi); }
};

/// Polytope U = {u : Au ≤ b}, optionally tagged with its box representation.
struct InputBounds
{
  Mat A;
  Vec b;
  std::optional<Box> box;

  static InputBounds from_box(const Box & box);
  bool contains(const Vec & u, double tol = 0.0) const;
  /// Throws std::invalid_argument when U is empty or the box tag disagrees with (A, b).
  void validate() const;
};

/**
 * ẋ = f(x) + g(x)u + d(t,x) with g = [g_s g_v]: the first secure_inputs
 * columns are secure, the trailing ones vulnerable.
 */
struct AffineModel
{
  int state_dim = 0;
  int secure_inputs = 0;
  int vulnerable_inputs = 0;
  std::function<Vec(const Vec &)> drift;
  std::function<Mat(const Vec &)> input_matrix;
  /// Optional analytic drift Jacobian; central differences are used otherwise.
  std::function<Mat(const Vec &)> drift_jacobian_fn;
  double disturbance_bound = 0.0;
  /// Physical actuator label (1-based motor index for the quadrotor) per input column.
  std::vector<int> input_labels;

  int input_dim() const { return secure_inputs + vulnerable_inputs; }
  Vec evaluate(const Vec & x, const Vec & u, const Vec & d) const;
  Vec evaluate(const Vec & x, const Vec & u) const;
  Mat drift_jacobian(const Vec & x) const;
};

/// The nine printed equations plus position kinematics. wrench = (u_f, τ_p, τ_q, τ_r).
Vec quadrotor_derivative(const Vec & state, const Eigen::Vector4d & wrench, const QuadrotorParams & params);

/// Rows [1 1 1 1], [0 -l 0 l], [-l 0 l 0], [d -d d -d].
Eigen::Matrix4d mixing_matrix(const QuadrotorParams & params);
Eigen::Vector4d mix_motors(const Eigen::Vector4d & thrusts, const QuadrotorParams & params);

/**
 * Quadrotor as an affine model in the four motor thrusts. Motors listed in
 * `vulnerable` (1-based) are moved to the trailing g_v columns. The
 * dynamics are affine in the wrench, so g(x) is exact.
 */
AffineModel as_affine_in_motors(const QuadrotorParams & params, const std::set<int> & vulnerable, double disturbance_bound);

/// Motor-space box [f_min, f_max]^k for k motors.
Box motor_box(const QuadrotorParams & params, int motors);

/// Uniform draw from the closed ball of radius delta in R^dim, reproducible from seed.
Vec sample_disturbance(int dim, double delta, std::uint64_t seed);

enum class DisturbanceKind { uniform_ball, sinusoid };

/// Per-step disturbance stream.
class DisturbanceSource
{
public:
  DisturbanceSource(DisturbanceKind kind, int dim, double delta, std::uint64_t seed);
  Vec next(double t);

private:
  DisturbanceKind kind_;
  int dim_;
  double delta_;
  std::mt19937_64 rng_;
  Vec phases_;
};

}  // namespace cbfguard
