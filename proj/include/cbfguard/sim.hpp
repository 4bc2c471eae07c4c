#pragma once

#include "cbfguard/attack.hpp"
#include "cbfguard/detector.hpp"
#include "cbfguard/guard.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cbfguard {

struct SimConfig
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
  bool record_trace = true;

  /// dt ≤ tau is checked against the detector lag by Scenario::validate.
  void validate() const;
};

struct Scenario
{
  std::string name;
  AffineModel model;
  Vec x0;
  ControllerConfig controller;
  DetectorConfig detector;
  AttackSchedule schedule;
  AttackSignal signal;
  SimConfig sim;
  /// Certifier outcome when known; soundness is only asserted for certified scenarios.
  std::optional<bool> certified;

  void validate() const;
};

struct BarrierSample
{
  double raw = 0.0;
  double value = 0.0;
  double fd = 0.0;     // NaN until the detector has τ of history
  double gamma = 0.0;  // NaN until anchored
  Region region = Region::interior;
};

struct TraceRecord
{
  double t = 0.0;
  Vec x;
  /// Applied inputs in physical label order (f1..f4 for the quadrotor).
  Vec inputs;
  std::vector<BarrierSample> barriers;
  ControlMode mode = ControlMode::nominal;
  bool attack_active = false;
  bool flag_active = false;
  std::string qp_status;
};

struct Detection
{
  double flag_time = 0.0;
  std::optional<std::size_t> attack;  // matched interval index
};

struct Metrics
{
  bool safety_violated = false;
  std::optional<double> first_violation_time;
  std::vector<Detection> detections;
  /// Per attack interval: delay from onset to detection, empty when undetected.
  std::vector<std::optional<double>> attack_delays;
  int false_positive_count = 0;
  int undetected_attack_count = 0;
  int zero_delay_count = 0;     // flagged at the first sample that can observe the attack
  int nonzero_delay_count = 0;
  std::vector<std::string> barrier_names;
  std::vector<double> min_barrier;  // min over time of raw B
  std::vector<double> max_barrier;  // max over time of raw B
  double min_z = 0.0;               // quadrotor only
  double max_abs_phi = 0.0;
  double max_abs_theta = 0.0;
  Vec final_state;
  int sandwich_violations = 0;
  double worst_sandwich_excess = 0.0;  // largest |fd - Ḃ̃| - (ητ/2 + 1e-6); ≤ 0 when sound
  int false_negatives = 0;
  int input_bound_violations = 0;
  int escalations = 0;
  int fallbacks = 0;
  int steps = 0;
  double dt = 0.0;
  bool divergent = false;
  std::string abort_reason;
  double wall_clock = 0.0;
  std::optional<bool> certified;
  AttackSchedule schedule;
  std::vector<std::string> warnings;
};

struct RunResult
{
  std::vector<TraceRecord> trace;
  Metrics metrics;
};

/// Classical RK4 with u and d held over the step. Throws std::runtime_error on a non-finite derivative.
Vec rk4_step(const AffineModel & model, const Vec & x, const Vec & u, const Vec & d, double dt);

/**
 * One closed-loop run. Per step: select the input at t_k, let the attacker
 * overwrite the vulnerable inputs, log, integrate to t_{k+1}, then feed the
 * new B̃ sample to the detector and check the sandwich, soundness and safety
 * properties at t_{k+1}.
 */
RunResult run_scenario(const Scenario & scenario);

struct BatchEntry
{
  std::string name;
  std::optional<Metrics> metrics;
  std::string error;
};

struct BatchReport
{
  std::vector<BatchEntry> entries;
  int runs = 0;
  int aborted = 0;
  int divergent = 0;
  int safety_violations = 0;
  /// Violations in runs with detection and recovery on and a passed certificate.
  int certified_safety_violations = 0;
  int false_negatives = 0;
  int sandwich_violations = 0;
  int total_attacks = 0;
  int undetected_attacks = 0;
  int total_flags = 0;
  int false_positives = 0;
  int zero_delays = 0;
  int nonzero_delays = 0;
  std::vector<double> delays;
  std::vector<std::string> counterexample_traces;

  double false_positive_rate() const { return total_flags == 0 ? 0.0 : double(false_positives) / total_flags; }
};

/**
 * Runs scenarios on `parallelism` threads; results are indexed by input
 * position so the report does not depend on scheduling. A throwing scenario
 * is recorded in its entry. When counterexample_dir is non-empty, every
 * certified run with a safety violation or false negative is replayed with
 * tracing and written there.
 */
BatchReport run_batch(const std::vector<Scenario> & scenarios, int parallelism,
                      const std::string & counterexample_dir = "");

/**
 * Fills detections, attack_delays and the delay counters of m. A flag
 * matches the latest attack i with t1 <= flag <= t2 + T̄; a window already
 * open at onset gives delay 0; unmatched flags are false positives.
 */
void match_detections(Metrics & m, const AttackSchedule & schedule, const std::vector<double> & flags, double window,
                      double dt);

/// Fixed trace header: t, state, f1..fm, per-barrier B_k, Btilde_k, fd_k, gamma_k, region_k, then mode flags.
std::vector<std::string> trace_header(const AffineModel & model, std::size_t barrier_count);
void write_trace_csv(std::ostream & out, const AffineModel & model, std::size_t barrier_count,
                     const std::vector<TraceRecord> & trace);
void write_metrics(std::ostream & out, const Metrics & metrics);
void write_batch_report(std::ostream & out, const BatchReport & report);

}  // namespace cbfguard
