#include "cbfguard/config.hpp"
#include "cbfguard/sim.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace cbfguard;
using namespace cbfguard::testing;

namespace {

const std::string kPaperConfig = CBFGUARD_SOURCE_DIR "/configs/quadrotor_paper.cfg";
const std::string kGreedyConfig = CBFGUARD_SOURCE_DIR "/configs/quadrotor_greedy.cfg";

AffineModel linear_growth()
{
  AffineModel m = scalar_model(0.0, {1.0}, 1);
  m.drift = [](const Vec & x) { return x; };
  return m;
}

Metrics matched(const std::vector<AttackInterval> & intervals, const std::vector<double> & flags, double dt = 1e-3)
{
  AttackSchedule s;
  s.intervals = intervals;
  Metrics m;
  match_detections(m, s, flags, 0.934, dt);
  return m;
}

}  // namespace

TEST_CASE("RK4 on closed-form fields")
{
  const Vec x0 = Vec::Constant(1, 1.0);
  const Vec u0 = Vec::Zero(1);
  const Vec d0 = Vec::Zero(1);
  const double e = rk4_step(linear_growth(), x0, u0, d0, 0.1)(0);
  CHECK(std::abs(e - std::exp(0.1)) < 1e-7);
  CHECK(e == doctest::Approx(1.0 + 0.1 + 0.005 + 0.1 * 0.1 * 0.1 / 6.0 + 0.1 * 0.1 * 0.1 * 0.1 / 24.0).epsilon(1e-15));

  const AffineModel constant = scalar_model(1.0, {1.0}, 1);
  CHECK(rk4_step(constant, x0, u0, d0, 0.25)(0) == 1.25);
  const AffineModel zero = scalar_model(0.0, {1.0}, 1);
  CHECK(rk4_step(zero, x0, u0, d0, 0.25)(0) == 1.0);
  CHECK(rk4_step(zero, x0, Vec::Constant(1, 2.0), d0, 0.5)(0) == 2.0);
  CHECK_THROWS_AS(rk4_step(zero, x0, u0, d0, 0.0), std::invalid_argument);
}

TEST_CASE("RK4 rejects a non-finite field")
{
  AffineModel m = scalar_model(0.0, {1.0}, 1);
  m.drift = [](const Vec & x) { return Vec::Constant(1, 1.0 / (x(0) - 1.0)); };
  CHECK_THROWS_AS(rk4_step(m, Vec::Constant(1, 1.0), Vec::Zero(1), Vec::Zero(1), 0.1), std::runtime_error);
}

TEST_CASE("trace header schema")
{
  const ScenarioConfig cfg = load_and_validate(kPaperConfig);
  const AffineModel model = build_model(cfg);
  const std::vector<std::string> expected{
      "t",       "x",       "y",       "z",         "vx",      "vy",      "vz",      "phi",     "theta",
      "psi",     "p",       "q",       "r",         "f1",      "f2",      "f3",      "f4",      "B_1",
      "Btilde_1", "fd_1",   "gamma_1", "region_1",  "B_2",     "Btilde_2", "fd_2",   "gamma_2", "region_2",
      "B_3",     "Btilde_3", "fd_3",   "gamma_3",   "region_3", "mode",   "attack_active", "flag_active",
      "qp_status"};
  CHECK(trace_header(model, 3) == expected);
}

TEST_CASE("trace rows match the header and list motors in physical order")
{
  ScenarioConfig cfg = load_and_validate(kPaperConfig);
  cfg.sim.horizon = 0.05;
  const Scenario sc = build_scenario(cfg);
  const RunResult rr = run_scenario(sc);
  REQUIRE(rr.trace.size() == 51);
  std::ostringstream out;
  write_trace_csv(out, sc.model, 3, rr.trace);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  const auto columns = std::count(line.begin(), line.end(), ',') + 1;
  CHECK(columns == 36);
  int rows = 0;
  while (std::getline(in, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') + 1 == columns);
    ++rows;
  }
  CHECK(rows == 51);
  // Motor 4 is the vulnerable input, stored last in model order and printed as f4.
  const auto & rec = rr.trace[10];
  const Vec u_model = Vec(rec.inputs);
  CHECK(u_model.size() == 4);
  CHECK(std::isnan(rr.trace.front().barriers[0].fd));
}

TEST_CASE("attack-free hover reaches the reference")
{
  ScenarioConfig cfg = load_and_validate(kPaperConfig);
  cfg.sim.attack_enabled = false;
  cfg.sim.horizon = 20.0;
  const RunResult rr = run_scenario(build_scenario(cfg));
  const Metrics & m = rr.metrics;
  CHECK_FALSE(m.safety_violated);
  CHECK_FALSE(m.divergent);
  CHECK(std::abs(m.final_state(kZ) - 5.0) < 0.5);
  CHECK(m.sandwich_violations == 0);
  CHECK(m.input_bound_violations == 0);
  CHECK(m.schedule.intervals.empty());
}

TEST_CASE("short greedy run keeps the detector sound")
{
  ScenarioConfig cfg = load_and_validate(kGreedyConfig);
  cfg.sim.horizon = 8.0;
  const RunResult rr = run_scenario(build_scenario(cfg));
  CHECK_FALSE(rr.metrics.safety_violated);
  CHECK(rr.metrics.sandwich_violations == 0);
  CHECK(rr.metrics.false_negatives == 0);
  CHECK(rr.metrics.worst_sandwich_excess <= 0.0);
  for (const auto & rec : rr.trace) CHECK((rec.mode == ControlMode::recovery) == rec.flag_active);
}

TEST_CASE("halving the step barely moves the terminal state")
{
  ScenarioConfig cfg = load_and_validate(kPaperConfig);
  cfg.sim.attack_enabled = false;
  cfg.model.disturbance_bound = 0.0;
  cfg.sim.detection_enabled = false;
  Scenario coarse = build_scenario(cfg);
  coarse.sim.record_trace = false;
  Scenario fine = coarse;
  fine.sim.dt = coarse.sim.dt / 2.0;
  const Vec a = run_scenario(coarse).metrics.final_state;
  const Vec b = run_scenario(fine).metrics.final_state;
  MESSAGE("terminal difference ", (a - b).norm());
  CHECK((a - b).norm() < 1e-4);
}

TEST_CASE("batch results do not depend on parallelism")
{
  ScenarioConfig cfg = load_and_validate(kGreedyConfig);
  cfg.sim.horizon = 4.0;
  std::vector<Scenario> scenarios;
  for (std::uint64_t i = 0; i < 4; ++i) {
    Scenario sc = build_scenario(cfg, i);
    sc.sim.record_trace = false;
    scenarios.push_back(sc);
  }
  const BatchReport serial = run_batch(scenarios, 1);
  const BatchReport parallel = run_batch(scenarios, 4);
  REQUIRE(serial.entries.size() == 4);
  REQUIRE(parallel.entries.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    REQUIRE(serial.entries[i].metrics);
    REQUIRE(parallel.entries[i].metrics);
    const Metrics & a = *serial.entries[i].metrics;
    const Metrics & b = *parallel.entries[i].metrics;
    CHECK(a.final_state == b.final_state);
    CHECK(a.attack_delays == b.attack_delays);
    CHECK(a.schedule == b.schedule);
  }
  CHECK(serial.total_attacks == parallel.total_attacks);
  CHECK(serial.delays == parallel.delays);
  CHECK_FALSE(serial.entries[0].metrics->final_state == serial.entries[1].metrics->final_state);
}

TEST_CASE("empty batch gives an empty report")
{
  const BatchReport r = run_batch({}, 3);
  CHECK(r.runs == 0);
  CHECK(r.entries.empty());
  CHECK(r.false_positive_rate() == 0.0);
}

TEST_CASE("an invalid scenario is isolated in the batch")
{
  ScenarioConfig cfg = load_and_validate(kPaperConfig);
  cfg.sim.horizon = 0.01;
  Scenario good = build_scenario(cfg);
  Scenario bad = good;
  bad.x0 = Vec::Zero(3);
  const BatchReport r = run_batch({good, bad}, 2);
  CHECK(r.runs == 2);
  CHECK(r.aborted == 1);
  CHECK(r.entries[0].metrics.has_value());
  CHECK_FALSE(r.entries[1].error.empty());
}

TEST_CASE("scenario validation requires dt <= tau")
{
  ScenarioConfig cfg = load_and_validate(kPaperConfig);
  Scenario sc = build_scenario(cfg);
  sc.sim.dt = 2.0 * sc.detector.tau;
  CHECK_THROWS_AS(run_scenario(sc), std::invalid_argument);
}

TEST_CASE("detections match attacks within the window after the attack")
{
  const Metrics m = matched({{1.0, 1.5}, {5.0, 5.4}}, {1.2, 3.0, 5.9});
  REQUIRE(m.detections.size() == 3);
  CHECK(m.detections[0].attack == std::optional<std::size_t>{0});
  CHECK_FALSE(m.detections[1].attack.has_value());
  CHECK(m.detections[2].attack == std::optional<std::size_t>{1});
  CHECK(m.false_positive_count == 1);
  CHECK(*m.attack_delays[0] == doctest::Approx(0.2));
  CHECK(*m.attack_delays[1] == doctest::Approx(0.9));
  CHECK(m.nonzero_delay_count == 2);
}

TEST_CASE("zero delay means flagged at the first sample that can observe the attack")
{
  // Onset on the grid: the attacked step starts at 1.000, its effect is sampled at 1.001.
  CHECK(matched({{1.0, 1.5}}, {1.001}).zero_delay_count == 1);
  CHECK(matched({{1.0, 1.5}}, {1.002}).nonzero_delay_count == 1);
  // Onset between samples: first attacked step starts at 1.0010.
  CHECK(matched({{1.0004, 1.5}}, {1.002}).zero_delay_count == 1);
  CHECK(matched({{1.0004, 1.5}}, {1.003}).nonzero_delay_count == 1);
  // A window open at onset covers the attack.
  const Metrics covered = matched({{1.0, 1.5}}, {0.5});
  CHECK(covered.zero_delay_count == 1);
  CHECK(*covered.attack_delays[0] == 0.0);
  CHECK(covered.false_positive_count == 1);
  const Metrics missed = matched({{1.0, 1.5}}, {});
  CHECK(missed.undetected_attack_count == 1);
  CHECK_FALSE(missed.attack_delays[0].has_value());
}

TEST_CASE("metrics report is key-value")
{
  const Metrics m = matched({{1.0, 1.5}}, {1.2});
  std::ostringstream out;
  write_metrics(out, m);
  std::istringstream in(out.str());
  std::string line;
  int keys = 0;
  while (std::getline(in, line)) {
    CHECK(line.find(" = ") != std::string::npos);
    ++keys;
  }
  CHECK(keys > 10);
  CHECK(out.str().find("attack_delays = ") != std::string::npos);
}
