#pragma once

#include "cbfguard/barrier.hpp"

#include <deque>
#include <optional>
#include <utility>
#include <vector>

namespace cbfguard {

/// γ(t) = δ̄ c̄ exp(-δ̄ (t - t̄)).
struct GammaSchedule
{
  double delta_bar = 0.1;
  double c_bar = 0.0225;
};

/// Throws std::invalid_argument for t < t_bar.
double gamma(const GammaSchedule & schedule, double t, double t_bar);

enum class DetectionRule { adaptive, boundary };

struct DetectorConfig
{
  double tau = 1e-3;          // finite-difference lag, s
  double window = 0.934;      // T̄, flag window length, s
  double delta_bar = 0.1;
  DetectionRule rule = DetectionRule::adaptive;
  double boundary_tol = 1e-6;
};

/// Per-barrier detection constants.
struct DetectorChannel
{
  double eta = 1.0;
  double c_bar = 0.0225;
};

/// Boundary rule: |B̃| ≤ tol and the difference quotient exceeds -ητ/2.
bool boundary_condition(double value, double fd, double eta, double tau, double boundary_tol);

/// Adaptive rule: outside int(S_c̄) and the difference quotient exceeds γ - ητ/2.
bool adaptive_condition(Region region, double fd, double gamma, double eta, double tau);

/**
 * Finite-difference attack detector over a bank of effective barriers.
 *
 * Each channel keeps a short history of B̃ samples and the time t̄ of its
 * most recent entry into S \ int(S_c̄). A flag from any channel opens the
 * global window [t̂, t̂ + T̄); no new flags are raised while it is open.
 */
class Detector
{
public:
  struct Update
  {
    bool flagged = false;
    int barrier = -1;
  };

  Detector(DetectorConfig config, std::vector<DetectorChannel> channels);

  /// Record one B̃ sample per channel at time t (strictly increasing) and apply the rule.
  Update update(double t, const std::vector<double> & values);

  /// History only; no anchors or rules. Used to probe the estimator directly.
  void push_sample(std::size_t channel, double t, double value);

  /// (B̃(t) - B̃(t - τ)) / τ with linear interpolation; empty when history is too short.
  std::optional<double> fd_estimate(std::size_t channel, double t) const;
  std::optional<double> gamma_at(std::size_t channel, double t) const;
  std::optional<double> anchor(std::size_t channel) const { return channels_[channel].anchor; }
  Region region(std::size_t channel) const { return channels_[channel].region; }

  bool in_flag_window(double t) const;
  /// Raised flag times t̂¹, t̂², ... (the -T̄ sentinel is implicit).
  const std::vector<double> & flags() const { return flags_; }

  bool boundary_rule_fires(std::size_t channel, double t) const;
  bool adaptive_rule_fires(std::size_t channel, double t) const;

  const DetectorConfig & config() const { return config_; }
  std::size_t channel_count() const { return channels_.size(); }

private:
  struct Channel
  {
    DetectorChannel params;
    std::deque<std::pair<double, double>> history;
    std::optional<double> anchor;
    Region region = Region::interior;
    bool seen = false;
  };

  std::optional<double> interpolate(const Channel & ch, double t) const;

  DetectorConfig config_;
  std::vector<Channel> channels_;
  std::vector<double> flags_;
};

}  // namespace cbfguard
