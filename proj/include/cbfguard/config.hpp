#pragma once

#include "cbfguard/certifier.hpp"
#include "cbfguard/sim.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cbfguard {

struct ModelSettings
{
  std::string kind = "quadrotor";
  QuadrotorParams params;
  std::vector<int> vulnerable_motors{4};
  double disturbance_bound = 0.01;
  std::vector<double> initial_state{0, 0, 0.2, 0, 0, 0, 0, 0, 0, 0, 0, 0};

  bool operator==(const ModelSettings &) const = default;
};

/// Per-barrier overrides; unset fields take the builtin or detector-wide value.
struct BarrierSettings
{
  std::string name;
  std::optional<double> floor;      // quad_z only
  std::optional<double> max_angle;  // quad_phi / quad_theta only
  std::optional<double> alpha;
  std::optional<double> c_bar;
  std::optional<double> eta;
  std::optional<double> lipschitz;

  bool operator==(const BarrierSettings &) const = default;
};

inline std::vector<BarrierSettings> default_barriers()
{
  std::vector<BarrierSettings> out(3);
  out[0].name = "quad_z";
  out[1].name = "quad_phi";
  out[2].name = "quad_theta";
  return out;
}

struct DetectorSettings
{
  double tau = 1e-3;
  double T_bar = 0.934;
  double delta_bar = 0.1;
  double c_bar = 0.0225;
  double boundary_tol = 1e-6;
  DetectionRule rule = DetectionRule::adaptive;
  std::string fusion = "any";

  bool operator==(const DetectorSettings &) const = default;
};

struct ControllerSettings
{
  std::vector<double> reference{0, 0, 5};
  TrackingGains gains;
  std::string fallback = "phase1";

  bool operator==(const ControllerSettings &) const = default;
};

struct AttackSettings
{
  std::string mode = "generated";  // generated | explicit
  double T_na = 2.238;
  std::vector<AttackInterval> intervals;  // explicit mode
  // Attacker's range U_v per vulnerable motor; empty means the motor bounds.
  std::vector<double> range_lo;
  std::vector<double> range_hi;
  AttackKind signal = AttackKind::greedy_adversarial;
  std::vector<double> constant_value;
  double amplitude = 0.0;
  double frequency = 1.0;

  bool operator==(const AttackSettings &) const = default;
};

struct SimSettings
{
  double dt = 1e-3;
  double horizon = 30.0;
  std::uint64_t disturbance_seed = 1;
  std::uint64_t attack_seed = 2;
  bool detection_enabled = true;
  bool attack_enabled = true;
  bool recovery_enabled = true;
  DisturbanceKind disturbance = DisturbanceKind::uniform_ball;
  double sanity_limit = 1e6;

  bool operator==(const SimSettings &) const = default;
};

struct CertifierConfig
{
  std::vector<double> envelope_lo{-5, -5, 0.02, -3, -3, -3, -0.3, -0.3, -3.14159, -0.5, -0.5, -1};
  std::vector<double> envelope_hi{5, 5, 10, 3, 3, 3, 0.3, 0.3, 3.14159, 0.5, 0.5, 1};
  int samples = 10000;
  std::uint64_t seed = 0;
  int attempts_per_sample = 2000;
  double eta_factor = 1.5;
  double lipschitz_factor = 1.2;
  double rollout_step = 1e-3;

  bool operator==(const CertifierConfig &) const = default;
};

struct ScenarioConfig
{
  ModelSettings model;
  std::vector<BarrierSettings> barriers = default_barriers();
  DetectorSettings detector;
  ControllerSettings controller;
  AttackSettings attack;
  SimSettings sim;
  CertifierConfig certifier;
  std::string output_directory = "runs";

  bool operator==(const ScenarioConfig &) const = default;
};

/// Every problem found while loading, not just the first.
class ConfigError : public std::runtime_error
{
public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string> & errors() const { return errors_; }

private:
  std::vector<std::string> errors_;
};

/// Parse INI text. Throws ConfigError listing unknown keys, malformed values, missing required keys and failed cross-field checks.
ScenarioConfig parse_config(const std::string & text);
ScenarioConfig load_and_validate(const std::string & path);

/// Structural and cross-field checks on an in-memory config; empty when valid.
std::vector<std::string> validation_errors(const ScenarioConfig & config);

/// INI text that parse_config maps back to an equal config.
std::string serialize(const ScenarioConfig & config);

/// Documented keys with defaults, one "[section] key = default  description" line each.
std::vector<std::string> documented_keys();

BarrierBank build_barrier_bank(const ScenarioConfig & config);
AffineModel build_model(const ScenarioConfig & config);
ControllerConfig build_controller(const ScenarioConfig & config, const AffineModel & model);
CertifierSettings build_certifier_settings(const ScenarioConfig & config);

/// Full scenario; seed_offset shifts both seeds so batch members differ.
Scenario build_scenario(const ScenarioConfig & config, std::uint64_t seed_offset = 0);

}  // namespace cbfguard
