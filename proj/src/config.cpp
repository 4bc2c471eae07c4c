#include "cbfguard/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace cbfguard {

namespace {

namespace pt = boost::property_tree;

const std::set<std::string> kBuiltinBarriers = {"quad_z", "quad_phi", "quad_theta"};
const std::string kBarrierPrefix = "barrier.";

// ---- value codecs ---------------------------------------------------------

std::string trim(const std::string & s)
{
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string & s)
{
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

double parse_double(const std::string & s)
{
  const std::string t = trim(s);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception &) {
    throw std::invalid_argument("expected a number, got '" + t + "'");
  }
  if (used != t.size()) throw std::invalid_argument("expected a number, got '" + t + "'");
  return v;
}

std::uint64_t parse_u64(const std::string & s)
{
  const std::string t = trim(s);
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (!t.empty() && t[0] == '-') throw std::invalid_argument("negative");
    v = std::stoull(t, &used);
  } catch (const std::exception &) {
    throw std::invalid_argument("expected a nonnegative integer, got '" + t + "'");
  }
  if (used != t.size()) throw std::invalid_argument("expected a nonnegative integer, got '" + t + "'");
  return v;
}

int parse_int(const std::string & s)
{
  const double v = parse_double(s);
  if (v != static_cast<double>(static_cast<int>(v))) throw std::invalid_argument("expected an integer, got '" + trim(s) + "'");
  return static_cast<int>(v);
}

bool parse_bool(const std::string & s)
{
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw std::invalid_argument("expected true or false, got '" + t + "'");
}

std::vector<double> parse_doubles(const std::string & s)
{
  std::vector<double> out;
  for (const auto & tok : split_ws(s)) out.push_back(parse_double(tok));
  return out;
}

std::vector<int> parse_ints(const std::string & s)
{
  std::vector<int> out;
  for (const auto & tok : split_ws(s)) out.push_back(parse_int(tok));
  return out;
}

std::vector<AttackInterval> parse_intervals(const std::string & s)
{
  std::vector<AttackInterval> out;
  for (const auto & tok : split_ws(s)) {
    const auto colon = tok.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("interval '" + tok + "' must be start:end");
    out.push_back({parse_double(tok.substr(0, colon)), parse_double(tok.substr(colon + 1))});
  }
  return out;
}

// Shortest %g form that parses back to the same double.
std::string fmt(double v)
{
  char buf[40];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

template <class T, class F>
std::string fmt_list(const std::vector<T> & values, F f)
{
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? " " : "") + f(values[i]);
  return out;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

DetectionRule parse_rule(const std::string & s)
{
  const std::string t = trim(s);
  if (t == "adaptive") return DetectionRule::adaptive;
  if (t == "boundary") return DetectionRule::boundary;
  throw std::invalid_argument("rule must be adaptive or boundary, got '" + t + "'");
}

std::string fmt_rule(DetectionRule r) { return r == DetectionRule::adaptive ? "adaptive" : "boundary"; }

DisturbanceKind parse_disturbance(const std::string & s)
{
  const std::string t = trim(s);
  if (t == "uniform_ball") return DisturbanceKind::uniform_ball;
  if (t == "sinusoid") return DisturbanceKind::sinusoid;
  throw std::invalid_argument("disturbance must be uniform_ball or sinusoid, got '" + t + "'");
}

std::string fmt_disturbance(DisturbanceKind k) { return k == DisturbanceKind::uniform_ball ? "uniform_ball" : "sinusoid"; }

// ---- key registry ---------------------------------------------------------

struct KeySpec
{
  std::string section;
  std::string key;
  bool required;
  std::string description;
  std::function<void(ScenarioConfig &, const std::string &)> set;
  std::function<std::string(const ScenarioConfig &)> get;
};

#define CBFG_DOUBLE(SEC, KEY, REQ, FIELD, DESC) \
  KeySpec{SEC, KEY, REQ, DESC, [](ScenarioConfig & c, const std::string & v) { c.FIELD = parse_double(v); }, \
          [](const ScenarioConfig & c) { return fmt(c.FIELD); }}
#define CBFG_U64(SEC, KEY, REQ, FIELD, DESC) \
  KeySpec{SEC, KEY, REQ, DESC, [](ScenarioConfig & c, const std::string & v) { c.FIELD = parse_u64(v); }, \
          [](const ScenarioConfig & c) { return std::to_string(c.FIELD); }}
#define CBFG_INT(SEC, KEY, REQ, FIELD, DESC) \
  KeySpec{SEC, KEY, REQ, DESC, [](ScenarioConfig & c, const std::string & v) { c.FIELD = parse_int(v); }, \
          [](const ScenarioConfig & c) { return std::to_string(c.FIELD); }}
#define CBFG_BOOL(SEC, KEY, REQ, FIELD, DESC) \
  KeySpec{SEC, KEY, REQ, DESC, [](ScenarioConfig & c, const std::string & v) { c.FIELD = parse_bool(v); }, \
          [](const ScenarioConfig & c) { return fmt_bool(c.FIELD); }}
#define CBFG_STRING(SEC, KEY, REQ, FIELD, DESC) \
  KeySpec{SEC, KEY, REQ, DESC, [](ScenarioConfig & c, const std::string & v) { c.FIELD = trim(v); }, \
          [](const ScenarioConfig & c) { return c.FIELD; }}
#define CBFG_DOUBLES(SEC, KEY, REQ, FIELD, DESC) \
  KeySpec{SEC, KEY, REQ, DESC, [](ScenarioConfig & c, const std::string & v) { c.FIELD = parse_doubles(v); }, \
          [](const ScenarioConfig & c) { return fmt_list(c.FIELD, [](double d) { return fmt(d); }); }}

const std::vector<KeySpec> & registry()
{
  static const std::vector<KeySpec> keys = {
    CBFG_STRING("model", "kind", true, model.kind, "plant model; only quadrotor is built in"),
    CBFG_DOUBLE("model", "mass", false, model.params.mass, "kg"),
    CBFG_DOUBLE("model", "ixx", false, model.params.ixx, "kg m^2"),
    CBFG_DOUBLE("model", "iyy", false, model.params.iyy, "kg m^2"),
    CBFG_DOUBLE("model", "izz", false, model.params.izz, "kg m^2"),
    CBFG_DOUBLE("model", "k_t", false, model.params.k_t, "translational drag"),
    CBFG_DOUBLE("model", "k_r", false, model.params.k_r, "rotational drag"),
    CBFG_DOUBLE("model", "arm_length", false, model.params.arm_length, "m"),
    CBFG_DOUBLE("model", "yaw_coefficient", false, model.params.yaw_coefficient, "m, torque per unit thrust"),
    CBFG_DOUBLE("model", "gravity", false, model.params.gravity, "m/s^2"),
    CBFG_DOUBLE("model", "f_min", false, model.params.f_min, "N, lowest motor thrust"),
    CBFG_DOUBLE("model", "f_max", false, model.params.f_max, "N, highest motor thrust"),
    KeySpec{"model", "vulnerable_motors", false, "1-based motor indices the attacker can overwrite",
            [](ScenarioConfig & c, const std::string & v) { c.model.vulnerable_motors = parse_ints(v); },
            [](const ScenarioConfig & c) {
              return fmt_list(c.model.vulnerable_motors, [](int i) { return std::to_string(i); });
            }},
    CBFG_DOUBLE("model", "disturbance_bound", false, model.disturbance_bound, "delta, bound on |d|"),
    CBFG_DOUBLES("model", "initial_state", false, model.initial_state, "12 state components"),

    KeySpec{"barriers", "names", true, "space-separated builtin barriers: quad_z quad_phi quad_theta",
            [](ScenarioConfig & c, const std::string & v) {
              std::vector<BarrierSettings> kept;
              for (const auto & name : split_ws(v)) {
                BarrierSettings b;
                b.name = name;
                for (const auto & old : c.barriers)
                  if (old.name == name) b = old;
                kept.push_back(b);
              }
              c.barriers = kept;
            },
            [](const ScenarioConfig & c) {
              return fmt_list(c.barriers, [](const BarrierSettings & b) { return b.name; });
            }},

    CBFG_DOUBLE("detector", "tau", true, detector.tau, "s, finite-difference lag"),
    CBFG_DOUBLE("detector", "T_bar", true, detector.T_bar, "s, longest attack and flag window length"),
    CBFG_DOUBLE("detector", "delta_bar", true, detector.delta_bar, "1/s, decay rate of the adaptive threshold"),
    CBFG_DOUBLE("detector", "c_bar", true, detector.c_bar, "band depth, overridable per barrier"),
    CBFG_DOUBLE("detector", "boundary_tol", false, detector.boundary_tol, "boundary rule tolerance on Btilde"),
    KeySpec{"detector", "rule", false, "adaptive or boundary",
            [](ScenarioConfig & c, const std::string & v) { c.detector.rule = parse_rule(v); },
            [](const ScenarioConfig & c) { return fmt_rule(c.detector.rule); }},
    CBFG_STRING("detector", "fusion", false, detector.fusion, "multi-barrier policy; only any"),

    CBFG_DOUBLES("controller", "reference", false, controller.reference, "hover point x y z [yaw]"),
    CBFG_DOUBLE("controller", "kp_xy", false, controller.gains.kp_xy, "horizontal position gain"),
    CBFG_DOUBLE("controller", "kd_xy", false, controller.gains.kd_xy, "horizontal velocity gain"),
    CBFG_DOUBLE("controller", "kp_z", false, controller.gains.kp_z, "altitude gain"),
    CBFG_DOUBLE("controller", "kd_z", false, controller.gains.kd_z, "climb-rate gain"),
    CBFG_DOUBLE("controller", "kp_att", false, controller.gains.kp_att, "roll/pitch gain"),
    CBFG_DOUBLE("controller", "kd_att", false, controller.gains.kd_att, "roll/pitch rate gain"),
    CBFG_DOUBLE("controller", "kp_yaw", false, controller.gains.kp_yaw, "yaw gain"),
    CBFG_DOUBLE("controller", "kd_yaw", false, controller.gains.kd_yaw, "yaw rate gain"),
    CBFG_DOUBLE("controller", "max_tilt", false, controller.gains.max_tilt, "rad, commanded tilt clamp"),
    CBFG_STRING("controller", "fallback", false, controller.fallback, "infeasible-QP policy; only phase1"),

    CBFG_STRING("attack", "mode", false, attack.mode, "generated or explicit"),
    CBFG_DOUBLE("attack", "T_na", true, attack.T_na, "s, shortest attack-free gap"),
    KeySpec{"attack", "intervals", false, "explicit mode: start:end pairs in seconds",
            [](ScenarioConfig & c, const std::string & v) { c.attack.intervals = parse_intervals(v); },
            [](const ScenarioConfig & c) {
              return fmt_list(c.attack.intervals,
                              [](const AttackInterval & iv) { return fmt(iv.start) + ":" + fmt(iv.end); });
            }},
    KeySpec{"attack", "signal", false, "constant, uniform_random, sinusoid or greedy_adversarial",
            [](ScenarioConfig & c, const std::string & v) { c.attack.signal = attack_kind_from_string(trim(v)); },
            [](const ScenarioConfig & c) { return std::string(to_string(c.attack.signal)); }},
    CBFG_DOUBLES("attack", "range_lo", false, attack.range_lo, "N per vulnerable motor, attacker range; default f_min"),
    CBFG_DOUBLES("attack", "range_hi", false, attack.range_hi, "N per vulnerable motor, attacker range; default f_max"),
    CBFG_DOUBLES("attack", "constant_value", false, attack.constant_value, "N per vulnerable motor, constant kind"),
    CBFG_DOUBLE("attack", "amplitude", false, attack.amplitude, "N about the midpoint, sinusoid kind"),
    CBFG_DOUBLE("attack", "frequency", false, attack.frequency, "Hz, sinusoid kind"),

    CBFG_DOUBLE("sim", "dt", true, sim.dt, "s, integration step"),
    CBFG_DOUBLE("sim", "horizon", true, sim.horizon, "s"),
    CBFG_U64("sim", "disturbance_seed", false, sim.disturbance_seed, "disturbance stream seed"),
    CBFG_U64("sim", "attack_seed", false, sim.attack_seed, "attack schedule and signal seed"),
    CBFG_BOOL("sim", "detection_enabled", false, sim.detection_enabled, "run the detector"),
    CBFG_BOOL("sim", "attack_enabled", false, sim.attack_enabled, "inject attacks"),
    CBFG_BOOL("sim", "recovery_enabled", false, sim.recovery_enabled, "switch to the safe QP inside flag windows"),
    KeySpec{"sim", "disturbance", false, "uniform_ball or sinusoid",
            [](ScenarioConfig & c, const std::string & v) { c.sim.disturbance = parse_disturbance(v); },
            [](const ScenarioConfig & c) { return fmt_disturbance(c.sim.disturbance); }},
    CBFG_DOUBLE("sim", "sanity_limit", false, sim.sanity_limit, "abort when any state component exceeds this"),

    CBFG_DOUBLES("certifier", "envelope_lo", false, certifier.envelope_lo, "12 lower bounds of the sampling box"),
    CBFG_DOUBLES("certifier", "envelope_hi", false, certifier.envelope_hi, "12 upper bounds of the sampling box"),
    CBFG_INT("certifier", "samples", false, certifier.samples, "band samples per barrier"),
    CBFG_U64("certifier", "seed", false, certifier.seed, "sampler seed"),
    CBFG_INT("certifier", "attempts_per_sample", false, certifier.attempts_per_sample, "rejection budget"),
    CBFG_DOUBLE("certifier", "eta_factor", false, certifier.eta_factor, "safety factor on the sampled eta"),
    CBFG_DOUBLE("certifier", "lipschitz_factor", false, certifier.lipschitz_factor, "safety factor on sampled l_B"),
    CBFG_DOUBLE("certifier", "rollout_step", false, certifier.rollout_step, "s, second-derivative stencil step"),

    CBFG_STRING("output", "directory", false, output_directory, "default output directory"),
  };
  return keys;
}

#undef CBFG_DOUBLE
#undef CBFG_U64
#undef CBFG_INT
#undef CBFG_BOOL
#undef CBFG_STRING
#undef CBFG_DOUBLES

using BarrierField = std::optional<double> BarrierSettings::*;
const std::vector<std::pair<std::string, BarrierField>> kBarrierKeys = {
  {"floor", &BarrierSettings::floor}, {"max_angle", &BarrierSettings::max_angle},
  {"alpha", &BarrierSettings::alpha}, {"c_bar", &BarrierSettings::c_bar},
  {"eta", &BarrierSettings::eta},     {"lipschitz", &BarrierSettings::lipschitz},
};

const KeySpec * find_key(const std::string & section, const std::string & key)
{
  for (const auto & k : registry())
    if (k.section == section && k.key == key) return &k;
  return nullptr;
}

BarrierSpec barrier_from_settings(const BarrierSettings & b, const DetectorSettings & det)
{
  BarrierSpec spec;
  if (b.name == "quad_z") spec = quad_altitude_barrier(b.floor.value_or(0.02));
  else if (b.name == "quad_phi") spec = quad_roll_barrier(b.max_angle.value_or(0.3));
  else if (b.name == "quad_theta") spec = quad_pitch_barrier(b.max_angle.value_or(0.3));
  else throw std::invalid_argument("unknown builtin barrier '" + b.name + "'");
  if (b.alpha) spec.alpha = *b.alpha;
  spec.c_bar = b.c_bar.value_or(det.c_bar);
  if (b.eta) spec.eta = *b.eta;
  if (b.lipschitz) spec.lipschitz = *b.lipschitz;
  return spec;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
  : std::runtime_error([&] {
      std::string msg = "invalid scenario configuration:";
      for (const auto & e : errors) msg += "\n  " + e;
      return msg;
    }()),
    errors_(std::move(errors))
{
}

std::vector<std::string> documented_keys()
{
  std::vector<std::string> out;
  const ScenarioConfig defaults;
  for (const auto & k : registry()) {
    std::string line = "[" + k.section + "] " + k.key + " = " + k.get(defaults) + "  " + k.description;
    if (k.required) line += " (required)";
    out.push_back(line);
  }
  out.push_back("[barrier.NAME] floor | max_angle | alpha | c_bar | eta | lipschitz  per-barrier overrides");
  return out;
}

ScenarioConfig parse_config(const std::string & text)
{
  std::vector<std::string> errors;
  // Cross-field checks need every value parsed; unknown keys do not block them.
  bool values_complete = true;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error & e) {
    throw ConfigError({std::string("parse error: ") + e.what()});
  }

  ScenarioConfig cfg;
  cfg.barriers.clear();
  std::set<std::pair<std::string, std::string>> seen;
  std::map<std::string, const pt::ptree *> barrier_sections;

  for (const auto & [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      errors.push_back("key '" + section + "' appears outside any section");
      continue;
    }
    if (section.rfind(kBarrierPrefix, 0) == 0) {
      barrier_sections[section.substr(kBarrierPrefix.size())] = &body;
      continue;
    }
    bool known_section = false;
    for (const auto & k : registry()) known_section = known_section || k.section == section;
    if (!known_section) {
      errors.push_back("unknown section [" + section + "]");
      continue;
    }
    for (const auto & [key, value] : body) {
      const KeySpec * spec = find_key(section, key);
      if (!spec) {
        errors.push_back("unknown key '" + key + "' in [" + section + "]");
        continue;
      }
      seen.insert({section, key});
      try {
        spec->set(cfg, value.data());
      } catch (const std::exception & e) {
        errors.push_back("[" + section + "] " + key + ": " + e.what());
        values_complete = false;
      }
    }
  }

  const ScenarioConfig defaults;
  for (const auto & k : registry())
    if (k.required && !seen.count({k.section, k.key})) {
      values_complete = false;
      errors.push_back("missing required key '" + k.key + "' in [" + k.section + "] (documented default: "
                       + k.get(defaults) + ")");
    }

  for (const auto & [name, body] : barrier_sections) {
    auto it = std::find_if(cfg.barriers.begin(), cfg.barriers.end(), [&](const auto & b) { return b.name == name; });
    if (it == cfg.barriers.end()) {
      errors.push_back("section [barrier." + name + "] names a barrier missing from [barriers] names");
      continue;
    }
    for (const auto & [key, value] : *body) {
      auto field = std::find_if(kBarrierKeys.begin(), kBarrierKeys.end(), [&](const auto & p) { return p.first == key; });
      if (field == kBarrierKeys.end()) {
        errors.push_back("unknown key '" + key + "' in [barrier." + name + "]");
        continue;
      }
      try {
        (*it).*(field->second) = parse_double(value.data());
      } catch (const std::exception & e) {
        errors.push_back("[barrier." + name + "] " + key + ": " + e.what());
        values_complete = false;
      }
    }
  }

  if (values_complete) {
    auto more = validation_errors(cfg);
    errors.insert(errors.end(), more.begin(), more.end());
  }
  if (!errors.empty()) throw ConfigError(errors);
  return cfg;
}

ScenarioConfig load_and_validate(const std::string & path)
{
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open configuration file '" + path + "'"});
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::vector<std::string> validation_errors(const ScenarioConfig & c)
{
  std::vector<std::string> errors;
  auto check = [&](bool ok, const std::string & msg) {
    if (!ok) errors.push_back(msg);
  };

  check(c.model.kind == "quadrotor", "model kind '" + c.model.kind + "' is not supported (only quadrotor)");
  try {
    c.model.params.validate();
  } catch (const std::exception & e) {
    errors.push_back(e.what());
  }
  std::set<int> vulnerable(c.model.vulnerable_motors.begin(), c.model.vulnerable_motors.end());
  check(vulnerable.size() == c.model.vulnerable_motors.size(), "vulnerable_motors contains duplicates");
  for (int mtr : vulnerable) check(mtr >= 1 && mtr <= kMotorCount, "vulnerable motor index out of range 1..4");
  check(static_cast<int>(vulnerable.size()) < kMotorCount, "at least one motor must be secure");
  check(c.model.disturbance_bound >= 0.0, "disturbance_bound must be nonnegative");
  check(c.model.initial_state.size() == kQuadStateDim, "initial_state needs 12 components");

  check(!c.barriers.empty(), "no barriers configured");
  std::set<std::string> names;
  for (const auto & b : c.barriers) {
    check(kBuiltinBarriers.count(b.name) > 0, "unknown builtin barrier '" + b.name + "'");
    check(names.insert(b.name).second, "barrier '" + b.name + "' listed twice");
    check(!b.floor || b.name == "quad_z", "floor applies only to quad_z");
    check(!b.max_angle || b.name != "quad_z", "max_angle applies only to quad_phi and quad_theta");
  }

  const auto & d = c.detector;
  check(d.tau > 0.0, "tau must be positive");
  check(d.T_bar > 0.0, "T_bar must be positive");
  check(d.delta_bar > 0.0, "delta_bar must be positive");
  check(d.c_bar > 0.0, "c_bar must be positive");
  check(d.boundary_tol > 0.0, "boundary_tol must be positive");
  check(d.fusion == "any", "fusion '" + d.fusion + "' is not supported (only any)");

  check(c.sim.dt > 0.0, "dt must be positive");
  check(c.sim.horizon > 0.0, "horizon must be positive");
  check(c.sim.sanity_limit > 0.0, "sanity_limit must be positive");
  check(c.sim.dt <= d.tau, "dt <= tau required");

  const auto & g = c.controller.gains;
  for (double k : {g.kp_xy, g.kd_xy, g.kp_z, g.kd_z, g.kp_att, g.kd_att, g.kp_yaw, g.kd_yaw})
    check(k >= 0.0, "controller gains must be nonnegative");
  check(g.max_tilt > 0.0 && g.max_tilt < 1.5, "max_tilt must lie in (0, 1.5)");
  check(c.controller.reference.size() == 3 || c.controller.reference.size() == 4, "reference needs x y z [yaw]");
  check(c.controller.fallback == "phase1", "fallback '" + c.controller.fallback + "' is not supported (only phase1)");

  const auto & a = c.attack;
  check(a.mode == "generated" || a.mode == "explicit", "attack mode must be generated or explicit");
  check(a.T_na >= 0.0, "T_na must be nonnegative");
  check(a.mode == "explicit" || a.intervals.empty(), "attack intervals are only allowed in explicit mode");
  if (a.mode == "explicit") {
    for (const auto & v : schedule_violations(AttackSchedule{a.intervals, d.T_bar, a.T_na}))
      errors.push_back("explicit attack schedule: " + v);
  }
  const std::size_t mv = vulnerable.size();
  check(a.range_lo.empty() == a.range_hi.empty(), "range_lo and range_hi go together");
  std::vector<double> lo(mv, c.model.params.f_min), hi(mv, c.model.params.f_max);
  if (!a.range_lo.empty()) {
    const bool sized = a.range_lo.size() == mv && a.range_hi.size() == mv;
    check(sized, "attack range needs one entry per vulnerable motor");
    if (sized) {
      for (std::size_t i = 0; i < mv; ++i) {
        check(a.range_lo[i] <= a.range_hi[i], "attack range has lo > hi");
        check(a.range_lo[i] >= c.model.params.f_min && a.range_hi[i] <= c.model.params.f_max,
              "attack range lies outside the motor bounds");
      }
      lo = a.range_lo;
      hi = a.range_hi;
    }
  }
  if (a.signal == AttackKind::constant) {
    check(a.constant_value.size() == mv, "constant_value needs one entry per vulnerable motor");
    if (a.constant_value.size() == mv)
      for (std::size_t i = 0; i < mv; ++i)
        check(a.constant_value[i] >= lo[i] && a.constant_value[i] <= hi[i], "constant_value lies outside the attack range");
  }
  check(a.amplitude >= 0.0, "amplitude must be nonnegative");
  check(a.frequency > 0.0, "frequency must be positive");

  const auto & cc = c.certifier;
  check(cc.envelope_lo.empty() == cc.envelope_hi.empty(), "envelope_lo and envelope_hi go together");
  if (!cc.envelope_lo.empty()) {
    check(cc.envelope_lo.size() == kQuadStateDim && cc.envelope_hi.size() == kQuadStateDim,
          "certifier envelope needs 12 components per bound");
    if (cc.envelope_lo.size() == cc.envelope_hi.size())
      for (std::size_t i = 0; i < cc.envelope_lo.size(); ++i)
        check(cc.envelope_lo[i] <= cc.envelope_hi[i], "certifier envelope has lo > hi");
  }
  check(cc.samples > 0, "certifier samples must be positive");
  check(cc.attempts_per_sample > 0, "attempts_per_sample must be positive");
  check(cc.eta_factor >= 1.0 && cc.lipschitz_factor >= 1.0, "certifier safety factors must be at least 1");
  check(cc.rollout_step > 0.0, "rollout_step must be positive");

  if (!errors.empty()) return errors;

  // Cross-field checks that need the built objects.
  const BarrierBank bank = build_barrier_bank(c);
  for (const auto & spec : bank.barriers) {
    check(spec.c_bar < spec.c_M, "c_bar of " + spec.name + " must be below its c_M = " + fmt(spec.c_M));
    try {
      spec.validate();
    } catch (const std::exception & e) {
      errors.push_back(e.what());
    }
  }
  Vec x0 = Eigen::Map<const Vec>(c.model.initial_state.data(), kQuadStateDim);
  Vec hover = Vec::Zero(kQuadStateDim);
  hover.head(3) = Eigen::Map<const Vec>(c.controller.reference.data(), 3);
  if (c.controller.reference.size() == 4) hover(kPsi) = c.controller.reference[3];
  for (const auto & spec : bank.barriers) {
    check(spec.value(x0) <= 0.0, "initial state violates barrier " + spec.name);
    check(spec.value(hover) <= 0.0, "reference lies outside the safe set of barrier " + spec.name);
  }
  return errors;
}

std::string serialize(const ScenarioConfig & c)
{
  std::ostringstream out;
  std::string section;
  for (const auto & k : registry()) {
    if (k.section != section) {
      out << (section.empty() ? "" : "\n") << "[" << k.section << "]\n";
      section = k.section;
    }
    out << k.key << " = " << k.get(c) << "\n";
  }
  for (const auto & b : c.barriers) {
    std::ostringstream body;
    for (const auto & [key, field] : kBarrierKeys)
      if (b.*field) body << key << " = " << fmt(*(b.*field)) << "\n";
    if (!body.str().empty()) out << "\n[" << kBarrierPrefix << b.name << "]\n" << body.str();
  }
  return out.str();
}

BarrierBank build_barrier_bank(const ScenarioConfig & c)
{
  BarrierBank bank;
  for (const auto & b : c.barriers) bank.barriers.push_back(barrier_from_settings(b, c.detector));
  return bank;
}

AffineModel build_model(const ScenarioConfig & c)
{
  const std::set<int> vulnerable(c.model.vulnerable_motors.begin(), c.model.vulnerable_motors.end());
  return as_affine_in_motors(c.model.params, vulnerable, c.model.disturbance_bound);
}

ControllerConfig build_controller(const ScenarioConfig & c, const AffineModel & model)
{
  ControllerConfig cfg;
  cfg.bank = build_barrier_bank(c);
  cfg.bounds = InputBounds::from_box(motor_box(c.model.params, model.input_dim()));
  cfg.secure_bounds = InputBounds::from_box(motor_box(c.model.params, model.secure_inputs));
  cfg.vulnerable_box = motor_box(c.model.params, model.vulnerable_inputs);
  if (!c.attack.range_lo.empty()) {
    cfg.vulnerable_box.lo = Eigen::Map<const Vec>(c.attack.range_lo.data(), model.vulnerable_inputs);
    cfg.vulnerable_box.hi = Eigen::Map<const Vec>(c.attack.range_hi.data(), model.vulnerable_inputs);
  }
  cfg.delta = c.model.disturbance_bound;
  const Vec ref = Eigen::Map<const Vec>(c.controller.reference.data(),
                                        static_cast<Eigen::Index>(c.controller.reference.size()));
  cfg.nominal_law = quadrotor_tracking_law(c.model.params, c.controller.gains, ref, model.input_labels);
  cfg.secure_law = quadrotor_secure_law(c.model.params, c.controller.gains, ref, model.input_labels,
                                        model.secure_inputs, cfg.vulnerable_box);
  return cfg;
}

CertifierSettings build_certifier_settings(const ScenarioConfig & c)
{
  CertifierSettings s;
  if (c.certifier.envelope_lo.empty()) throw std::invalid_argument("certifier envelope is not configured");
  s.envelope.lo = Eigen::Map<const Vec>(c.certifier.envelope_lo.data(), kQuadStateDim);
  s.envelope.hi = Eigen::Map<const Vec>(c.certifier.envelope_hi.data(), kQuadStateDim);
  s.samples = c.certifier.samples;
  s.seed = c.certifier.seed;
  s.attempts_per_sample = c.certifier.attempts_per_sample;
  s.eta_factor = c.certifier.eta_factor;
  s.lipschitz_factor = c.certifier.lipschitz_factor;
  s.rollout_step = c.certifier.rollout_step;
  return s;
}

Scenario build_scenario(const ScenarioConfig & c, std::uint64_t seed_offset)
{
  const auto errors = validation_errors(c);
  if (!errors.empty()) throw ConfigError(errors);

  Scenario sc;
  sc.model = build_model(c);
  sc.x0 = Eigen::Map<const Vec>(c.model.initial_state.data(), kQuadStateDim);
  sc.controller = build_controller(c, sc.model);

  sc.detector.tau = c.detector.tau;
  sc.detector.window = c.detector.T_bar;
  sc.detector.delta_bar = c.detector.delta_bar;
  sc.detector.rule = c.detector.rule;
  sc.detector.boundary_tol = c.detector.boundary_tol;

  sc.sim.dt = c.sim.dt;
  sc.sim.horizon = c.sim.horizon;
  sc.sim.disturbance_seed = c.sim.disturbance_seed + seed_offset;
  sc.sim.attack_seed = c.sim.attack_seed + seed_offset;
  sc.sim.detection_enabled = c.sim.detection_enabled;
  sc.sim.attack_enabled = c.sim.attack_enabled;
  sc.sim.recovery_enabled = c.sim.recovery_enabled;
  sc.sim.disturbance = c.sim.disturbance;
  sc.sim.sanity_limit = c.sim.sanity_limit;

  if (c.attack.mode == "explicit")
    sc.schedule = AttackSchedule{c.attack.intervals, c.detector.T_bar, c.attack.T_na};
  else
    sc.schedule = generate_schedule(c.detector.T_bar, c.attack.T_na, c.sim.horizon, sc.sim.attack_seed);

  sc.signal.kind = c.attack.signal;
  sc.signal.U_v = sc.controller.vulnerable_box;
  if (!c.attack.constant_value.empty())
    sc.signal.constant_value = Eigen::Map<const Vec>(c.attack.constant_value.data(),
                                                     static_cast<Eigen::Index>(c.attack.constant_value.size()));
  sc.signal.amplitude = c.attack.amplitude;
  sc.signal.frequency = c.attack.frequency;
  sc.signal.seed = sc.sim.attack_seed;
  sc.name = "seed_" + std::to_string(sc.sim.attack_seed);
  return sc;
}

}  // namespace cbfguard
