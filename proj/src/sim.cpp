#include "cbfguard/sim.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace cbfguard {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kSandwichSlack = 1e-6;

const char * const kQuadStateNames[kQuadStateDim] = {"x", "y", "z", "vx", "vy", "vz", "phi", "theta", "psi", "p", "q", "r"};

// Permutation from model input order to ascending physical label.
std::vector<int> physical_order(const AffineModel & model)
{
  std::vector<int> order(static_cast<std::size_t>(model.input_dim()));
  std::iota(order.begin(), order.end(), 0);
  if (model.input_labels.size() == order.size())
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return model.input_labels[static_cast<std::size_t>(a)] < model.input_labels[static_cast<std::size_t>(b)];
    });
  return order;
}

std::string fmt(double v)
{
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string join(const std::vector<std::string> & parts, const char * sep = ",")
{
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

void match_detections(Metrics & m, const AttackSchedule & schedule, const std::vector<double> & flags, double window,
                      double dt)
{
  const auto & iv = schedule.intervals;
  m.attack_delays.assign(iv.size(), std::nullopt);
  for (double f : flags) {
    Detection det{f, std::nullopt};
    for (std::size_t i = iv.size(); i-- > 0;) {
      if (f >= iv[i].start && f <= iv[i].end + window) {
        det.attack = i;
        break;
      }
    }
    if (!det.attack) ++m.false_positive_count;
    m.detections.push_back(det);
  }
  for (std::size_t i = 0; i < iv.size(); ++i) {
    // A window already open at onset covers the attack with zero delay.
    bool covered = false;
    for (double f : flags)
      if (f < iv[i].start && iv[i].start < f + window) covered = true;
    if (covered) {
      m.attack_delays[i] = 0.0;
      continue;
    }
    for (const auto & det : m.detections)
      if (det.attack == i) {
        m.attack_delays[i] = det.flag_time - iv[i].start;
        break;
      }
  }
  // Zero delay: flagged at the first sample that can reflect the attack, one step after the first attacked step.
  for (std::size_t i = 0; i < iv.size(); ++i) {
    const auto & d = m.attack_delays[i];
    if (!d) {
      ++m.undetected_attack_count;
      continue;
    }
    const double first_attacked = std::ceil(iv[i].start / dt - 1e-9) * dt;
    if (iv[i].start + *d <= first_attacked + dt * (1.0 + 1e-9)) ++m.zero_delay_count;
    else ++m.nonzero_delay_count;
  }
}

void SimConfig::validate() const
{
  if (!(dt > 0.0)) throw std::invalid_argument("sim: dt must be positive");
  if (!(horizon > 0.0)) throw std::invalid_argument("sim: horizon must be positive");
  if (!(sanity_limit > 0.0)) throw std::invalid_argument("sim: sanity limit must be positive");
}

void Scenario::validate() const
{
  sim.validate();
  if (sim.dt > detector.tau * (1.0 + 1e-12)) throw std::invalid_argument("sim: dt <= tau required");
  if (x0.size() != model.state_dim) throw std::invalid_argument("sim: initial state has the wrong dimension");
  if (!model.drift || !model.input_matrix) throw std::invalid_argument("sim: model is incomplete");
  controller.validate(model);
  if (sim.attack_enabled) {
    signal.validate();
    if (signal.U_v.size() != model.vulnerable_inputs) throw std::invalid_argument("sim: U_v has the wrong dimension");
    const auto violations = schedule_violations(schedule);
    if (!violations.empty()) throw std::invalid_argument("sim: attack schedule invalid: " + violations.front());
  }
}

Vec rk4_step(const AffineModel & model, const Vec & x, const Vec & u, const Vec & d, double dt)
{
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  auto field = [&](const Vec & s) {
    Vec v = model.evaluate(s, u, d);
    if (!v.allFinite()) throw std::runtime_error("rk4_step: non-finite derivative");
    return v;
  };
  const Vec k1 = field(x);
  const Vec k2 = field(x + 0.5 * dt * k1);
  const Vec k3 = field(x + 0.5 * dt * k2);
  const Vec k4 = field(x + dt * k3);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

RunResult run_scenario(const Scenario & sc)
{
  sc.validate();
  const auto clock_start = std::chrono::steady_clock::now();

  const AffineModel & model = sc.model;
  const BarrierBank & bank = sc.controller.bank;
  const std::size_t nb = bank.size();
  const int ms = model.secure_inputs;
  const int mv = model.vulnerable_inputs;
  const double dt = sc.sim.dt;
  const double delta = sc.controller.delta;
  const long steps = std::lround(sc.sim.horizon / dt);
  const bool quad = model.state_dim == kQuadStateDim;
  const std::vector<int> order = physical_order(model);

  std::vector<DetectorChannel> channels;
  for (const auto & spec : bank.barriers) channels.push_back({spec.eta, spec.c_bar});
  Detector detector(sc.detector, channels);
  DisturbanceSource disturbance(sc.sim.disturbance, model.state_dim, delta, sc.sim.disturbance_seed);
  const AttackSignal & signal = sc.signal;

  RunResult result;
  Metrics & m = result.metrics;
  m.dt = dt;
  m.schedule = sc.sim.attack_enabled ? sc.schedule : AttackSchedule{{}, sc.schedule.T_bar, sc.schedule.T_na};
  m.certified = sc.certified;
  m.min_barrier.assign(nb, std::numeric_limits<double>::infinity());
  m.max_barrier.assign(nb, -std::numeric_limits<double>::infinity());
  for (const auto & spec : bank.barriers) m.barrier_names.push_back(spec.name);
  m.min_z = std::numeric_limits<double>::infinity();
  m.worst_sandwich_excess = -std::numeric_limits<double>::infinity();
  if (sc.certified == std::optional<bool>(false))
    m.warnings.push_back("certificates failed; soundness is not asserted for this run");
  if (sc.sim.record_trace) result.trace.reserve(static_cast<std::size_t>(steps + 1));

  auto note_state = [&](double t, const StateEvaluation & ev) {
    for (std::size_t i = 0; i < nb; ++i) {
      const double b = ev.barriers[i].raw;
      m.min_barrier[i] = std::min(m.min_barrier[i], b);
      m.max_barrier[i] = std::max(m.max_barrier[i], b);
      if (b > 0.0 && !m.safety_violated) {
        m.safety_violated = true;
        m.first_violation_time = t;
      }
    }
    if (quad) {
      m.min_z = std::min(m.min_z, ev.x(kZ));
      m.max_abs_phi = std::max(m.max_abs_phi, std::abs(ev.x(kPhi)));
      m.max_abs_theta = std::max(m.max_abs_theta, std::abs(ev.x(kTheta)));
    }
  };
  auto values_of = [&](const StateEvaluation & ev) {
    std::vector<double> v(nb);
    for (std::size_t i = 0; i < nb; ++i) v[i] = ev.barriers[i].value;
    return v;
  };

  Vec x = sc.x0;
  StateEvaluation ev = evaluate_bank(bank, model, x);
  detector.update(0.0, values_of(ev));
  note_state(0.0, ev);

  try {
    for (long k = 0;; ++k) {
      const double t = k * dt;
      const bool window = sc.sim.detection_enabled && detector.in_flag_window(t);
      const GuardDecision decision = select_input(sc.controller, model, ev, window && sc.sim.recovery_enabled);
      Vec u = decision.u;
      const bool attacked = sc.sim.attack_enabled && mv > 0 && sc.schedule.active(t);
      if (attacked) u.tail(mv) = attack_value(signal, sc.schedule, ev, ms, t);
      if (decision.escalated) ++m.escalations;
      if (decision.fallback) ++m.fallbacks;
      if (sc.controller.bounds.A.rows() > 0 && !sc.controller.bounds.contains(u, 1e-8)) ++m.input_bound_violations;

      if (sc.sim.record_trace) {
        TraceRecord rec;
        rec.t = t;
        rec.x = x;
        rec.inputs.resize(u.size());
        for (std::size_t j = 0; j < order.size(); ++j) rec.inputs(static_cast<Eigen::Index>(j)) = u(order[j]);
        rec.barriers.resize(nb);
        for (std::size_t i = 0; i < nb; ++i) {
          auto & bs = rec.barriers[i];
          bs.raw = ev.barriers[i].raw;
          bs.value = ev.barriers[i].value;
          bs.fd = detector.fd_estimate(i, t).value_or(kNaN);
          bs.gamma = detector.gamma_at(i, t).value_or(kNaN);
          bs.region = detector.region(i);
        }
        rec.mode = window && sc.sim.recovery_enabled ? ControlMode::recovery : ControlMode::nominal;
        rec.attack_active = attacked;
        rec.flag_active = window;
        rec.qp_status = decision.status_label();
        result.trace.push_back(std::move(rec));
      }
      m.steps = static_cast<int>(k);
      if (k == steps) break;

      const Vec d = disturbance.next(t);
      Vec x_next;
      try {
        x_next = rk4_step(model, x, u, d, dt);
      } catch (const SingularityError & e) {
        throw std::runtime_error(e.what());
      }
      if (!x_next.allFinite() || x_next.cwiseAbs().maxCoeff() > sc.sim.sanity_limit)
        throw std::runtime_error("state left the numerical sanity envelope");

      const double t_next = (k + 1) * dt;
      StateEvaluation ev_next = evaluate_bank(bank, model, x_next);
      detector.update(t_next, values_of(ev_next));
      const bool window_next = detector.in_flag_window(t_next);

      for (std::size_t i = 0; i < nb; ++i) {
        const auto & eb = ev_next.barriers[i];
        const auto & spec = bank[i];
        // Ḃ̃ along the field that was actually applied over [t_k, t_{k+1}].
        const double rate = eb.lf + eb.lg.dot(u) + eb.gradient.dot(d);
        if (const auto fd = detector.fd_estimate(i, t_next)) {
          const double bound = spec.eta * sc.detector.tau / 2.0 + kSandwichSlack;
          const double excess = std::abs(*fd - rate) - bound;
          m.worst_sandwich_excess = std::max(m.worst_sandwich_excess, excess);
          if (excess > 0.0) ++m.sandwich_violations;
        }
        const double H = eb.lf + eb.lg.dot(u) + spec.lipschitz * delta;
        if (sc.sim.detection_enabled && eb.value >= 0.0 && H > 0.0 && !window_next) ++m.false_negatives;
      }

      x = std::move(x_next);
      ev = std::move(ev_next);
      note_state(t_next, ev);
    }
  } catch (const std::runtime_error & e) {
    m.divergent = true;
    m.abort_reason = e.what();
  }

  m.final_state = x;
  if (!quad) m.min_z = m.max_abs_phi = m.max_abs_theta = kNaN;
  if (sc.sim.detection_enabled)
    match_detections(m, m.schedule, detector.flags(), sc.detector.window, dt);
  else
    match_detections(m, m.schedule, {}, sc.detector.window, dt);
  m.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
  return result;
}

BatchReport run_batch(const std::vector<Scenario> & scenarios, int parallelism, const std::string & counterexample_dir)
{
  BatchReport report;
  report.entries.resize(scenarios.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < scenarios.size(); i = next++) {
      auto & entry = report.entries[i];
      entry.name = scenarios[i].name;
      try {
        Scenario sc = scenarios[i];
        sc.sim.record_trace = false;
        entry.metrics = run_scenario(sc).metrics;
      } catch (const std::exception & e) {
        entry.error = e.what();
      }
    }
  };
  const int workers = std::max(1, std::min<int>(parallelism, static_cast<int>(scenarios.size())));
  if (workers == 1 || scenarios.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto & th : pool) th.join();
  }

  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const auto & entry = report.entries[i];
    ++report.runs;
    if (!entry.metrics) {
      ++report.aborted;
      continue;
    }
    const Metrics & m = *entry.metrics;
    const Scenario & sc = scenarios[i];
    if (m.divergent) ++report.divergent;
    if (m.safety_violated) ++report.safety_violations;
    const bool guarded = sc.sim.detection_enabled && sc.sim.recovery_enabled && sc.certified.value_or(false);
    if (guarded && m.safety_violated) ++report.certified_safety_violations;
    report.false_negatives += m.false_negatives;
    report.sandwich_violations += m.sandwich_violations;
    report.total_attacks += static_cast<int>(m.attack_delays.size());
    report.undetected_attacks += m.undetected_attack_count;
    report.total_flags += static_cast<int>(m.detections.size());
    report.false_positives += m.false_positive_count;
    report.zero_delays += m.zero_delay_count;
    report.nonzero_delays += m.nonzero_delay_count;
    for (const auto & d : m.attack_delays)
      if (d) report.delays.push_back(*d);

    if (!counterexample_dir.empty() && guarded && (m.safety_violated || m.false_negatives > 0)) {
      std::filesystem::create_directories(counterexample_dir);
      const std::string stem = sc.name.empty() ? "scenario_" + std::to_string(i) : sc.name;
      const std::string path = (std::filesystem::path(counterexample_dir) / (stem + "_trace.csv")).string();
      Scenario replay = sc;
      replay.sim.record_trace = true;
      const RunResult rr = run_scenario(replay);
      std::ofstream out(path);
      write_trace_csv(out, replay.model, replay.controller.bank.size(), rr.trace);
      report.counterexample_traces.push_back(path);
    }
  }
  return report;
}

std::vector<std::string> trace_header(const AffineModel & model, std::size_t barrier_count)
{
  std::vector<std::string> h{"t"};
  for (int i = 0; i < model.state_dim; ++i)
    h.push_back(model.state_dim == kQuadStateDim ? kQuadStateNames[i] : "s" + std::to_string(i + 1));
  const std::vector<int> order = physical_order(model);
  for (std::size_t j = 0; j < order.size(); ++j) {
    const int label = model.input_labels.size() == order.size() ? model.input_labels[static_cast<std::size_t>(order[j])]
                                                                  : static_cast<int>(j) + 1;
    h.push_back("f" + std::to_string(label));
  }
  for (std::size_t k = 1; k <= barrier_count; ++k)
    for (const char * col : {"B_", "Btilde_", "fd_", "gamma_", "region_"}) h.push_back(col + std::to_string(k));
  for (const char * col : {"mode", "attack_active", "flag_active", "qp_status"}) h.push_back(col);
  return h;
}

void write_trace_csv(std::ostream & out, const AffineModel & model, std::size_t barrier_count,
                     const std::vector<TraceRecord> & trace)
{
  out << join(trace_header(model, barrier_count)) << '\n';
  std::vector<std::string> row;
  for (const auto & rec : trace) {
    row.clear();
    row.push_back(fmt(rec.t));
    for (Eigen::Index i = 0; i < rec.x.size(); ++i) row.push_back(fmt(rec.x(i)));
    for (Eigen::Index j = 0; j < rec.inputs.size(); ++j) row.push_back(fmt(rec.inputs(j)));
    for (const auto & b : rec.barriers) {
      row.push_back(fmt(b.raw));
      row.push_back(fmt(b.value));
      row.push_back(fmt(b.fd));
      row.push_back(fmt(b.gamma));
      row.push_back(to_string(b.region));
    }
    row.push_back(to_string(rec.mode));
    row.push_back(rec.attack_active ? "1" : "0");
    row.push_back(rec.flag_active ? "1" : "0");
    row.push_back(rec.qp_status);
    out << join(row) << '\n';
  }
}

void write_metrics(std::ostream & out, const Metrics & m)
{
  auto kv = [&](const std::string & key, const std::string & value) { out << key << " = " << value << '\n'; };
  auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  kv("safety_violated", flag(m.safety_violated));
  kv("first_violation_time", m.first_violation_time ? fmt(*m.first_violation_time) : "none");
  kv("divergent", flag(m.divergent));
  if (m.divergent) kv("abort_reason", m.abort_reason);
  kv("certified", m.certified ? flag(*m.certified) : "unknown");
  kv("steps", std::to_string(m.steps));
  kv("dt", fmt(m.dt));
  kv("wall_clock", fmt(m.wall_clock));

  std::vector<std::string> intervals;
  for (const auto & iv : m.schedule.intervals) intervals.push_back(fmt(iv.start) + ":" + fmt(iv.end));
  kv("attack_intervals", join(intervals, ";"));
  std::vector<std::string> flags, matches, delays;
  for (const auto & d : m.detections) {
    flags.push_back(fmt(d.flag_time));
    matches.push_back(d.attack ? std::to_string(*d.attack) : "none");
  }
  for (const auto & d : m.attack_delays) delays.push_back(d ? fmt(*d) : "undetected");
  kv("flag_times", join(flags, ";"));
  kv("flag_matches", join(matches, ";"));
  kv("attack_delays", join(delays, ";"));
  kv("detections", std::to_string(m.detections.size()));
  kv("false_positive_count", std::to_string(m.false_positive_count));
  kv("undetected_attack_count", std::to_string(m.undetected_attack_count));
  kv("zero_delay_count", std::to_string(m.zero_delay_count));
  kv("nonzero_delay_count", std::to_string(m.nonzero_delay_count));
  for (std::size_t i = 0; i < m.barrier_names.size(); ++i) {
    kv("min_B." + m.barrier_names[i], fmt(m.min_barrier[i]));
    kv("max_B." + m.barrier_names[i], fmt(m.max_barrier[i]));
  }
  kv("min_z", fmt(m.min_z));
  kv("max_abs_phi", fmt(m.max_abs_phi));
  kv("max_abs_theta", fmt(m.max_abs_theta));
  std::vector<std::string> fs;
  for (Eigen::Index i = 0; i < m.final_state.size(); ++i) fs.push_back(fmt(m.final_state(i)));
  kv("final_state", join(fs, ";"));
  kv("sandwich_violations", std::to_string(m.sandwich_violations));
  kv("worst_sandwich_excess", fmt(m.worst_sandwich_excess));
  kv("false_negatives", std::to_string(m.false_negatives));
  kv("input_bound_violations", std::to_string(m.input_bound_violations));
  kv("escalations", std::to_string(m.escalations));
  kv("fallbacks", std::to_string(m.fallbacks));
  for (const auto & w : m.warnings) kv("warning", w);
}

void write_batch_report(std::ostream & out, const BatchReport & r)
{
  auto kv = [&](const std::string & key, const std::string & value) { out << key << " = " << value << '\n'; };
  kv("runs", std::to_string(r.runs));
  kv("aborted", std::to_string(r.aborted));
  kv("divergent", std::to_string(r.divergent));
  kv("safety_violations", std::to_string(r.safety_violations));
  kv("certified_safety_violations", std::to_string(r.certified_safety_violations));
  kv("false_negatives", std::to_string(r.false_negatives));
  kv("sandwich_violations", std::to_string(r.sandwich_violations));
  kv("total_attacks", std::to_string(r.total_attacks));
  kv("undetected_attacks", std::to_string(r.undetected_attacks));
  kv("total_flags", std::to_string(r.total_flags));
  kv("false_positives", std::to_string(r.false_positives));
  kv("false_positive_rate", fmt(r.false_positive_rate()));
  kv("zero_delays", std::to_string(r.zero_delays));
  kv("nonzero_delays", std::to_string(r.nonzero_delays));
  if (!r.delays.empty()) {
    const auto [lo, hi] = std::minmax_element(r.delays.begin(), r.delays.end());
    kv("delay_min", fmt(*lo));
    kv("delay_max", fmt(*hi));
    kv("delay_mean", fmt(std::accumulate(r.delays.begin(), r.delays.end(), 0.0) / r.delays.size()));
  }
  for (const auto & p : r.counterexample_traces) kv("counterexample_trace", p);
  for (const auto & e : r.entries)
    if (!e.error.empty()) kv("error." + e.name, e.error);
}

}  // namespace cbfguard
