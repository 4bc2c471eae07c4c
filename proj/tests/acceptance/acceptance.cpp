// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Usage: acceptance [criterion ...]   (default: all of 1-8)

#include "cbfguard/certifier.hpp"
#include "cbfguard/config.hpp"
#include "cbfguard/qp_oracle.hpp"
#include "cbfguard/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace cbfguard;

namespace {

const std::string kPaperConfig = CBFGUARD_SOURCE_DIR "/configs/quadrotor_paper.cfg";
const std::string kGreedyConfig = CBFGUARD_SOURCE_DIR "/configs/quadrotor_greedy.cfg";

struct Outcome
{
  bool passed = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string num(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// 1. Solver against active-set enumeration.
Outcome qp_oracle()
{
  const QPCheckReport r = run_qp_self_check(500, 2024);
  const bool ok = r.passed(1e-8, 1e-9) && r.problems == 500 && r.seconds < 10.0;
  return {ok, "problems=" + std::to_string(r.problems) + " infeasible=" + std::to_string(r.infeasible) +
                  " mismatches=" + std::to_string(r.status_mismatches) + " gap=" + num(r.max_solution_gap) +
                  " kkt=" + num(r.max_kkt_residual) + " time=" + num(r.seconds) + "s"};
}

// Trace input columns are in physical order; the model stores secure inputs first.
Vec model_order(const AffineModel & model, const Vec & physical)
{
  Vec u(model.input_dim());
  for (int i = 0; i < model.input_dim(); ++i) u(i) = physical(model.input_labels[static_cast<std::size_t>(i)] - 1);
  return u;
}

// 2. Sandwich bound, checked by the simulator and recomputed from the traces.
Outcome taylor_sandwich()
{
  const ScenarioConfig cfg = load_and_validate(kGreedyConfig);
  int runs = 0, sim_violations = 0, trace_violations = 0;
  long checked = 0;
  double worst = -INFINITY;
  for (std::uint64_t seed = 1000; seed < 1020; ++seed) {
    const Scenario sc = build_scenario(cfg, seed);
    const RunResult rr = run_scenario(sc);
    ++runs;
    sim_violations += rr.metrics.sandwich_violations;
    if (rr.metrics.divergent) ++sim_violations;

    // Independent route: difference quotient of B̃ along the trace against ∇B̃·(f + g u + d).
    const double tau = sc.detector.tau;
    const long lag = std::lround(tau / sc.sim.dt);
    DisturbanceSource disturbance(sc.sim.disturbance, sc.model.state_dim, sc.controller.delta, sc.sim.disturbance_seed);
    std::vector<Vec> d;
    for (std::size_t k = 0; k + 1 < rr.trace.size(); ++k) d.push_back(disturbance.next(rr.trace[k].t));
    for (std::size_t k = static_cast<std::size_t>(lag); k < rr.trace.size(); ++k) {
      const Vec & x = rr.trace[k].x;
      const Vec u = model_order(sc.model, rr.trace[k - 1].inputs);
      const Vec field = sc.model.evaluate(x, u, d[k - 1]);
      for (std::size_t i = 0; i < sc.controller.bank.size(); ++i) {
        const BarrierSpec & spec = sc.controller.bank[i];
        const EffectiveBarrier eb = effective_barrier(spec, sc.model, x);
        const double fd = (eb.value - effective_value(spec, sc.model, rr.trace[k - lag].x)) / tau;
        const double excess = std::abs(fd - eb.gradient.dot(field)) - (spec.eta * tau / 2.0 + 1e-6);
        worst = std::max(worst, excess);
        if (excess > 0.0) ++trace_violations;
        ++checked;
      }
    }
  }
  const bool ok = runs == 20 && sim_violations == 0 && trace_violations == 0 && checked > 0;
  return {ok, "runs=" + std::to_string(runs) + " samples=" + std::to_string(checked) +
                  " sim_violations=" + std::to_string(sim_violations) +
                  " trace_violations=" + std::to_string(trace_violations) + " worst_excess=" + num(worst)};
}

// 3 and 5 share one certified batch.
struct GreedyBatch
{
  bool certified = false;
  double certify_seconds = 0.0;
  double batch_seconds = 0.0;
  BatchReport report;
  int runs_with_raw_violation = 0;
  int undetected_in_safe_runs = 0;
};

const GreedyBatch & greedy_batch()
{
  static const GreedyBatch batch = [] {
    GreedyBatch b;
    const ScenarioConfig cfg = load_and_validate(kGreedyConfig);
    auto start = std::chrono::steady_clock::now();
    const AffineModel model = build_model(cfg);
    const ControllerConfig controller = build_controller(cfg, model);
    b.certified = all_passed(certify_all(controller, model, cfg.detector.delta_bar, build_certifier_settings(cfg)));
    b.certify_seconds = seconds_since(start);

    start = std::chrono::steady_clock::now();
    std::vector<Scenario> scenarios;
    for (std::uint64_t i = 0; i < 100; ++i) {
      Scenario sc = build_scenario(cfg, i);
      sc.certified = b.certified;
      sc.sim.record_trace = false;
      scenarios.push_back(std::move(sc));
    }
    b.report = run_batch(scenarios, 1);
    b.batch_seconds = seconds_since(start);
    for (const auto & e : b.report.entries) {
      if (!e.metrics) continue;
      const Metrics & m = *e.metrics;
      if (std::any_of(m.max_barrier.begin(), m.max_barrier.end(), [](double v) { return v > 0.0; }))
        ++b.runs_with_raw_violation;
      if (!m.safety_violated) b.undetected_in_safe_runs += m.undetected_attack_count;
    }
    return b;
  }();
  return batch;
}

Outcome soundness()
{
  const GreedyBatch & b = greedy_batch();
  const BatchReport & r = b.report;
  const double total = b.certify_seconds + b.batch_seconds;
  const bool ok = b.certified && r.runs == 100 && r.aborted == 0 && r.divergent == 0 && r.safety_violations == 0 &&
                  r.certified_safety_violations == 0 && b.runs_with_raw_violation == 0 && r.false_negatives == 0 &&
                  total < 300.0;
  return {ok, std::string("certified=") + (b.certified ? "yes" : "no") + " runs=" + std::to_string(r.runs) +
                  " attacks=" + std::to_string(r.total_attacks) + " safety_violations=" +
                  std::to_string(r.safety_violations) + " false_negatives=" + std::to_string(r.false_negatives) +
                  " aborted=" + std::to_string(r.aborted) + " time=" + num(total) + "s"};
}

Outcome delay_behavior()
{
  const GreedyBatch & b = greedy_batch();
  const BatchReport & r = b.report;
  const bool ok = r.zero_delays > 0 && r.nonzero_delays > 0 && b.undetected_in_safe_runs > 0;
  double max_delay = 0.0;
  for (double d : r.delays) max_delay = std::max(max_delay, d);
  return {ok, "zero_delays=" + std::to_string(r.zero_delays) + " nonzero_delays=" + std::to_string(r.nonzero_delays) +
                  " max_delay=" + num(max_delay) + "s undetected_without_violation=" +
                  std::to_string(b.undetected_in_safe_runs) + " false_positives=" + std::to_string(r.false_positives)};
}

// 4. Case study with the shipped file.
Outcome case_study()
{
  const ScenarioConfig cfg = load_and_validate(kPaperConfig);
  const bool published = cfg.detector.T_bar == 0.934 && cfg.attack.T_na == 2.238 && cfg.detector.tau == 1e-3 &&
                         cfg.detector.delta_bar == 0.1 && cfg.detector.c_bar == 0.0225 &&
                         cfg.model.params.f_min == -27.7 && cfg.model.params.f_max == 27.7 &&
                         cfg.model.initial_state == std::vector<double>{0, 0, 0.2, 0, 0, 0, 0, 0, 0, 0, 0, 0} &&
                         cfg.controller.reference == std::vector<double>{0, 0, 5} && cfg.sim.horizon == 30.0;

  ScenarioConfig off = cfg;
  off.sim.detection_enabled = false;
  Scenario undefended = build_scenario(off);
  undefended.sim.record_trace = false;
  const Metrics a = run_scenario(undefended).metrics;

  Scenario defended = build_scenario(cfg);
  defended.sim.record_trace = false;
  const Metrics b = run_scenario(defended).metrics;

  const bool crash = a.min_z <= 0.02;
  const bool held = !b.divergent && b.min_z >= 0.02 - 1e-3 && b.max_abs_phi <= 0.3 + 1e-3 &&
                    b.max_abs_theta <= 0.3 + 1e-3 && std::abs(b.final_state(kZ) - 5.0) <= 0.5;
  const bool bounds = a.input_bound_violations == 0 && b.input_bound_violations == 0;
  const bool fast = a.wall_clock < 60.0 && b.wall_clock < 60.0;
  return {published && crash && held && bounds && fast,
          "(a) min_z=" + num(a.min_z) + " (b) min_z=" + num(b.min_z) + " max|phi|=" + num(b.max_abs_phi) +
              " max|theta|=" + num(b.max_abs_theta) + " z(30)=" + num(b.final_state(kZ)) +
              " detections=" + std::to_string(b.detections.size()) + " (c) bound_violations=" +
              std::to_string(a.input_bound_violations + b.input_bound_violations) + " wall=" + num(a.wall_clock) +
              "s/" + num(b.wall_clock) + "s"};
}

// 6. Closed form against every box vertex.
Outcome worst_case_term()
{
  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal(0.0, 2.0);
  std::uniform_int_distribution<int> dim(1, 6);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = dim(rng);
    Vec lg(n), lo(n), hi(n);
    for (int j = 0; j < n; ++j) {
      lg(j) = trial % 10 == 0 && j == 0 ? 0.0 : normal(rng);
      const double p = normal(rng), q = normal(rng);
      lo(j) = std::min(p, q);
      hi(j) = std::max(p, q);
    }
    double brute = -INFINITY;
    for (int mask = 0; mask < (1 << n); ++mask) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += lg(j) * ((mask >> j) & 1 ? hi(j) : lo(j));
      brute = std::max(brute, s);
    }
    worst = std::max(worst, std::abs(worst_case_attack_term(lg, Box{lo, hi}) - brute));
  }
  return {worst <= 1e-12, "pairs=1000 max_error=" + num(worst)};
}

// 7. γ against its closed form, including across detector re-anchoring.
Outcome gamma_schedule()
{
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> span(0.0, 60.0);
  const double delta_bar = 0.1, c_bar = 0.0225;
  double worst = 0.0;
  std::vector<double> times;
  for (int i = 0; i < 1000; ++i) times.push_back(span(rng));
  std::sort(times.begin(), times.end());
  const double anchor = 0.0;
  bool monotone = true;
  double last = INFINITY;
  for (double t : times) {
    const long double ref = static_cast<long double>(delta_bar) * c_bar *
                            std::exp(-static_cast<long double>(delta_bar) * (t - anchor));
    const double g = gamma(GammaSchedule{delta_bar, c_bar}, t, anchor);
    worst = std::max(worst, static_cast<double>(std::abs(static_cast<long double>(g) - ref)));
    if (!(g < last) && t > anchor) monotone = false;
    last = g;
  }

  // Detector side: γ is decreasing while the anchor holds and jumps back up on re-entry.
  Detector det(DetectorConfig{1e-3, 0.5, delta_bar, DetectionRule::adaptive, 1e-6}, {DetectorChannel{10.0, c_bar}});
  std::optional<double> prev_anchor;
  double prev_gamma = INFINITY;
  int reanchors = 0;
  for (int k = 0; k < 6000; ++k) {
    const double t = k * 1e-3;
    const double value = (k / 1000) % 2 == 0 ? -0.01 : -0.05;  // band for 1 s, interior for 1 s
    det.update(t, {value});
    const auto g = det.gamma_at(0, t);
    const auto a = det.anchor(0);
    if (!g) continue;
    const double ref = delta_bar * c_bar * std::exp(-delta_bar * (t - *a));
    worst = std::max(worst, std::abs(*g - ref));
    if (a != prev_anchor) {
      ++reanchors;
      prev_anchor = a;
    } else if (!(*g < prev_gamma)) {
      monotone = false;
    }
    prev_gamma = *g;
  }
  return {worst <= 1e-12 && monotone && reanchors == 3,
          "times=1000 max_error=" + num(worst) + " monotone=" + (monotone ? "yes" : "no") +
              " anchors=" + std::to_string(reanchors)};
}

// 8. A3 ⇒ A2(δ̄ = 0) on random quadrotor configurations.
Outcome certifier_cross_check()
{
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int configs = 0, a3_passes = 0, a2_passes = 0, implication_failures = 0, sample_failures = 0;
  for (int trial = 0; trial < 20; ++trial) {
    ScenarioConfig cfg = load_and_validate(kPaperConfig);
    cfg.model.vulnerable_motors = {1 + static_cast<int>(unit(rng) * 4.0) % 4};
    const double lo = -27.7 + 27.7 * unit(rng);
    cfg.attack.range_lo = {lo};
    cfg.attack.range_hi = {lo + (27.7 - lo) * unit(rng)};
    cfg.attack.signal = AttackKind::greedy_adversarial;
    cfg.attack.constant_value.clear();
    cfg.detector.c_bar = 0.005 + 0.04 * unit(rng);
    cfg.barriers[0].alpha = 0.005 + 2.0 * unit(rng);
    for (std::size_t i = 1; i < 3; ++i) {
      cfg.barriers[i].alpha = 0.5 + 3.0 * unit(rng);
      cfg.barriers[i].max_angle = 0.2 + 0.2 * unit(rng);
    }
    cfg.certifier.samples = 300;
    cfg.certifier.attempts_per_sample = 20000;
    cfg.certifier.seed = static_cast<std::uint64_t>(trial);
    const AffineModel model = build_model(cfg);
    const ControllerConfig c = build_controller(cfg, model);
    const CertifierSettings s = build_certifier_settings(cfg);
    ++configs;
    for (std::size_t i = 0; i < c.bank.size(); ++i) {
      const auto samples = sample_band(c.bank, i, model, s);
      const Certificate a3 = certify_A3(c, model, i, samples);
      const Certificate a2 = certify_A2(c, model, i, 0.0, samples);
      a3_passes += a3.passed;
      a2_passes += a2.passed;
      if (a3.passed && !a2.passed) ++implication_failures;
      for (const auto & x : samples) {
        const EffectiveBarrier eb = effective_barrier(c.bank[i], model, x);
        if (a2_margin(eb, c.bank[i], c.bounds, 0.0, c.delta) >
            a3_margin(eb, c.bank[i], c.secure_bounds, c.vulnerable_box, c.delta) + 1e-12)
          ++sample_failures;
      }
    }
  }
  const bool ok = configs == 20 && implication_failures == 0 && sample_failures == 0 && a3_passes > 0;
  return {ok, "configs=" + std::to_string(configs) + " certificates=" + std::to_string(3 * configs) +
                  " A3_passed=" + std::to_string(a3_passes) + " A2_passed=" + std::to_string(a2_passes) +
                  " implication_failures=" + std::to_string(implication_failures) +
                  " sample_failures=" + std::to_string(sample_failures)};
}

}  // namespace

int main(int argc, char ** argv)
{
  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria{
      {1, {"QP oracle equivalence", qp_oracle}},
      {2, {"Taylor sandwich", taylor_sandwich}},
      {3, {"Soundness", soundness}},
      {4, {"Case-study reproduction", case_study}},
      {5, {"Detection-delay behavior", delay_behavior}},
      {6, {"Worst-case term", worst_case_term}},
      {7, {"Gamma schedule", gamma_schedule}},
      {8, {"Certifier cross-check", certifier_cross_check}},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));
  if (selected.empty())
    for (const auto & [id, _] : criteria) selected.insert(id);

  int failures = 0;
  for (int id : selected) {
    const auto it = criteria.find(id);
    if (it == criteria.end()) {
      std::cerr << "unknown criterion " << id << '\n';
      return 2;
    }
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      o = it->second.second();
    } catch (const std::exception & e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.passed) ++failures;
    std::cout << "criterion " << id << " " << (o.passed ? "PASS" : "FAIL") << "  " << it->second.first << ": "
              << o.detail << " [" << num(seconds_since(start)) << "s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
