#include "cbfguard/config.hpp"

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

using namespace cbfguard;

namespace {

const std::string kPaperConfig = CBFGUARD_SOURCE_DIR "/configs/quadrotor_paper.cfg";
const std::string kGreedyConfig = CBFGUARD_SOURCE_DIR "/configs/quadrotor_greedy.cfg";

const std::string kMinimal = R"(
[model]
kind = quadrotor
[barriers]
names = quad_z quad_phi quad_theta
[detector]
tau = 0.001
T_bar = 0.934
delta_bar = 0.1
c_bar = 0.0225
[attack]
T_na = 2.238
[sim]
dt = 0.001
horizon = 30
)";

// kMinimal with key = value lines set in one section; existing keys are replaced.
std::string patched(const std::string & section, const std::string & lines)
{
  std::vector<std::string> out;
  std::istringstream base(kMinimal);
  for (std::string l; std::getline(base, l);) out.push_back(l);
  std::istringstream extra(lines);
  for (std::string l; std::getline(extra, l);) {
    const std::string key = l.substr(0, l.find(' '));
    auto header = std::find(out.begin(), out.end(), "[" + section + "]");
    if (header == out.end()) {
      out.push_back("[" + section + "]");
      header = out.end() - 1;
    }
    auto it = header + 1;
    for (; it != out.end() && !it->empty() && it->front() != '['; ++it)
      if (it->rfind(key + " ", 0) == 0) break;
    if (it != out.end() && it->rfind(key + " ", 0) == 0) *it = l;
    else out.insert(it, l);
  }
  std::string text;
  for (const auto & l : out) text += l + "\n";
  return text;
}

std::vector<std::string> errors_of(const std::string & text)
{
  try {
    parse_config(text);
  } catch (const ConfigError & e) {
    return e.errors();
  }
  return {};
}

bool mentions(const std::vector<std::string> & errors, const std::string & needle)
{
  return std::any_of(errors.begin(), errors.end(),
                     [&](const std::string & e) { return e.find(needle) != std::string::npos; });
}

std::string slurp(const std::string & path)
{
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("shipped configs carry the published plant and timing")
{
  for (const auto & path : {kPaperConfig, kGreedyConfig}) {
    const ScenarioConfig c = load_and_validate(path);
    const QuadrotorParams & p = c.model.params;
    CHECK(p.mass == 4.493);
    CHECK(p.ixx == 0.177);
    CHECK(p.iyy == 0.177);
    CHECK(p.izz == 0.344);
    CHECK(p.k_t == 1.0);
    CHECK(p.k_r == 1.5);
    CHECK(p.arm_length == 0.1);
    CHECK(p.yaw_coefficient == 0.0024);
    CHECK(p.gravity == 9.8);
    CHECK(p.f_min == -27.7);
    CHECK(p.f_max == 27.7);
    CHECK(c.model.vulnerable_motors == std::vector<int>{4});
    CHECK(c.detector.T_bar == 0.934);
    CHECK(c.attack.T_na == 2.238);
    CHECK(c.detector.c_bar == 0.0225);
    CHECK(c.detector.tau == 0.001);
    CHECK(c.controller.reference == std::vector<double>{0, 0, 5});
    CHECK(validation_errors(c).empty());
  }
}

TEST_CASE("minimal file loads with documented defaults")
{
  const ScenarioConfig c = parse_config(kMinimal);
  CHECK(c.model.params == QuadrotorParams{});
  CHECK(c.barriers == default_barriers());
  CHECK(c.attack.signal == AttackKind::greedy_adversarial);
  CHECK(c.sim.detection_enabled);
}

TEST_CASE("serialize round-trips")
{
  for (const auto & text : {slurp(kPaperConfig), slurp(kGreedyConfig), kMinimal}) {
    const ScenarioConfig c = parse_config(text);
    CHECK(parse_config(serialize(c)) == c);
  }
  ScenarioConfig c = parse_config(kMinimal);
  c.attack.mode = "explicit";
  c.attack.intervals = {{1.0, 1.5}, {5.0, 5.25}};
  c.attack.signal = AttackKind::sinusoid;
  c.attack.amplitude = 3.0;
  c.barriers[0].alpha = 0.125;
  c.sim.disturbance = DisturbanceKind::sinusoid;
  CHECK(parse_config(serialize(c)) == c);
}

TEST_CASE("empty file lists every required key")
{
  const auto errors = errors_of("");
  for (const char * key : {"'kind'", "'names'", "'tau'", "'T_bar'", "'delta_bar'", "'c_bar'", "'T_na'", "'dt'", "'horizon'"})
    CHECK(mentions(errors, key));
  CHECK(mentions(errors, "documented default"));
}

TEST_CASE("cross-field and lexical errors are all reported")
{
  CHECK(mentions(errors_of(patched("sim", "dt = 0.002")), "dt <= tau required"));
  CHECK(mentions(errors_of(patched("sim", "step = 0.002")), "unknown key"));
  CHECK(mentions(errors_of(patched("plots", "x = 1")), "unknown section"));
  CHECK(mentions(errors_of(patched("sim", "horizon = soon")), "horizon"));
  const auto both = errors_of(patched("sim", "dt = 0.002\nstep = 1"));
  CHECK(both.size() >= 2);
}

TEST_CASE("attack range validation")
{
  CHECK(mentions(errors_of(patched("attack", "range_lo = -5")), "range_lo and range_hi go together"));
  CHECK(mentions(errors_of(patched("attack", "range_lo = -5 -5\nrange_hi = 20 20")),
                 "one entry per vulnerable motor"));
  CHECK(mentions(errors_of(patched("attack", "range_lo = 5\nrange_hi = 1")), "lo > hi"));
  CHECK(mentions(errors_of(patched("attack", "range_lo = -5\nrange_hi = 30")), "outside the motor bounds"));
  CHECK(mentions(errors_of(patched("attack", "range_lo = -5\nrange_hi = 20\nsignal = constant\nconstant_value = 25")),
                 "outside the attack range"));
  CHECK(mentions(errors_of(patched("attack", "mode = explicit\nintervals = 1:3")), "explicit attack schedule"));
}

TEST_CASE("built scenario reflects the file")
{
  const ScenarioConfig cfg = load_and_validate(kPaperConfig);
  const Scenario sc = build_scenario(cfg);
  CHECK(sc.model.secure_inputs == 3);
  CHECK(sc.model.vulnerable_inputs == 1);
  CHECK(sc.model.input_labels == std::vector<int>{1, 2, 3, 4});
  CHECK(sc.controller.vulnerable_box.lo(0) == -5.0);
  CHECK(sc.controller.vulnerable_box.hi(0) == 20.0);
  CHECK(sc.controller.bank.size() == 3);
  CHECK(sc.controller.bank[0].name == "quad_z");
  CHECK(sc.controller.bank[0].alpha == 0.5);
  CHECK(sc.controller.bank[1].eta == 450.0);
  CHECK(sc.controller.delta == 0.01);
  CHECK(sc.detector.window == 0.934);
  CHECK(sc.x0(kZ) == 0.2);
  CHECK(schedule_violations(sc.schedule).empty());
  CHECK(sc.schedule == build_scenario(cfg).schedule);
  CHECK_FALSE(sc.schedule == build_scenario(cfg, 1).schedule);
  CHECK_NOTHROW(sc.validate());
}

TEST_CASE("documented keys cover the required ones")
{
  const auto keys = documented_keys();
  CHECK(keys.size() > 30);
  for (const char * k : {"[detector] tau", "[attack] T_na", "[sim] dt", "[model] kind"})
    CHECK(mentions(keys, k));
  CHECK(mentions(keys, "(required)"));
}
