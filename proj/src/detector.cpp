#include "cbfguard/detector.hpp"

#include <cmath>
#include <stdexcept>

namespace cbfguard {

namespace {

double time_tol(double t) { return 1e-9 * std::max(1.0, std::abs(t)); }

}  // namespace

double gamma(const GammaSchedule & s, double t, double t_bar)
{
  if (t < t_bar) throw std::invalid_argument("gamma: t precedes the anchor time");
  return s.delta_bar * s.c_bar * std::exp(-s.delta_bar * (t - t_bar));
}

bool boundary_condition(double value, double fd, double eta, double tau, double boundary_tol)
{
  return std::abs(value) <= boundary_tol && fd > -eta * tau / 2.0;
}

bool adaptive_condition(Region region, double fd, double gamma_value, double eta, double tau)
{
  return region != Region::interior && fd > gamma_value - eta * tau / 2.0;
}

Detector::Detector(DetectorConfig config, std::vector<DetectorChannel> channels) : config_(config)
{
  if (!(config_.tau > 0.0)) throw std::invalid_argument("detector: tau must be positive");
  if (!(config_.window > 0.0)) throw std::invalid_argument("detector: window length must be positive");
  if (!(config_.delta_bar > 0.0)) throw std::invalid_argument("detector: delta_bar must be positive");
  channels_.reserve(channels.size());
  for (const auto & c : channels) {
    if (!(c.eta > 0.0) || !(c.c_bar > 0.0)) throw std::invalid_argument("detector: eta and c_bar must be positive");
    channels_.push_back(Channel{c, {}, std::nullopt, Region::interior, false});
  }
}

void Detector::push_sample(std::size_t channel, double t, double value)
{
  auto & h = channels_.at(channel).history;
  if (!h.empty() && !(t > h.back().first)) throw std::invalid_argument("detector: sample times must increase");
  h.emplace_back(t, value);
  // Keep exactly one sample at or before t - τ.
  const double horizon = t - config_.tau - time_tol(t);
  while (h.size() > 2 && h[1].first <= horizon) h.pop_front();
}

std::optional<double> Detector::interpolate(const Channel & ch, double t) const
{
  const auto & h = ch.history;
  if (h.empty()) return std::nullopt;
  const double tol = time_tol(t);
  if (t < h.front().first - tol || t > h.back().first + tol) return std::nullopt;
  if (std::abs(t - h.back().first) <= tol) return h.back().second;
  for (std::size_t k = 1; k < h.size(); ++k) {
    const auto & [t0, v0] = h[k - 1];
    const auto & [t1, v1] = h[k];
    if (t <= t1 + tol) {
      if (std::abs(t - t0) <= tol) return v0;
      if (std::abs(t - t1) <= tol) return v1;
      const double w = (t - t0) / (t1 - t0);
      return v0 + w * (v1 - v0);
    }
  }
  return std::nullopt;
}

std::optional<double> Detector::fd_estimate(std::size_t channel, double t) const
{
  const auto & ch = channels_.at(channel);
  const auto now = interpolate(ch, t);
  const auto before = interpolate(ch, t - config_.tau);
  if (!now || !before) return std::nullopt;
  return (*now - *before) / config_.tau;
}

std::optional<double> Detector::gamma_at(std::size_t channel, double t) const
{
  const auto & ch = channels_.at(channel);
  if (!ch.anchor || t < *ch.anchor) return std::nullopt;
  return gamma(GammaSchedule{config_.delta_bar, ch.params.c_bar}, t, *ch.anchor);
}

bool Detector::in_flag_window(double t) const
{
  if (t >= -config_.window && t < 0.0) return true;  // sentinel t̂⁰ = -T̄
  for (double f : flags_)
    if (t >= f && t < f + config_.window) return true;
  return false;
}

bool Detector::boundary_rule_fires(std::size_t channel, double t) const
{
  const auto & ch = channels_.at(channel);
  const auto fd = fd_estimate(channel, t);
  const auto value = interpolate(ch, t);
  if (!fd || !value) return false;
  return boundary_condition(*value, *fd, ch.params.eta, config_.tau, config_.boundary_tol);
}

bool Detector::adaptive_rule_fires(std::size_t channel, double t) const
{
  const auto & ch = channels_.at(channel);
  const auto fd = fd_estimate(channel, t);
  const auto g = gamma_at(channel, t);
  if (!fd || !g) return false;
  return adaptive_condition(ch.region, *fd, *g, ch.params.eta, config_.tau);
}

Detector::Update Detector::update(double t, const std::vector<double> & values)
{
  if (values.size() != channels_.size()) throw std::invalid_argument("detector: one value per channel required");
  if (!flags_.empty() && t <= flags_.back()) throw std::invalid_argument("detector: time must increase");

  for (std::size_t i = 0; i < channels_.size(); ++i) {
    auto & ch = channels_[i];
    push_sample(i, t, values[i]);
    const Region r = classify(values[i], ch.params.c_bar);
    // Re-anchor t̄ on every entry from the interior.
    if (r != Region::interior && (!ch.seen || ch.region == Region::interior)) ch.anchor = t;
    ch.region = r;
    ch.seen = true;
  }

  Update out;
  if (in_flag_window(t)) return out;
  for (std::size_t i = 0; i < channels_.size(); ++i) {
    const bool fires = config_.rule == DetectionRule::adaptive ? adaptive_rule_fires(i, t) : boundary_rule_fires(i, t);
    if (fires) {
      flags_.push_back(t);
      out.flagged = true;
      out.barrier = static_cast<int>(i);
      break;
    }
  }
  return out;
}

}  // namespace cbfguard
