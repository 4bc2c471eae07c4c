#include "cbfguard/certifier.hpp"
#include "cbfguard/config.hpp"
#include "cbfguard/qp.hpp"
#include "cbfguard/sim.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace cbfguard;

namespace {

const char * status_name(QPStatus s) { return s == QPStatus::optimal ? "optimal" : "infeasible"; }

py::dict metrics_dict(const Metrics & m)
{
  py::dict d;
  d["safety_violated"] = m.safety_violated;
  d["first_violation_time"] = m.first_violation_time;
  d["divergent"] = m.divergent;
  d["min_z"] = m.min_z;
  d["max_abs_phi"] = m.max_abs_phi;
  d["max_abs_theta"] = m.max_abs_theta;
  d["final_state"] = m.final_state;
  std::vector<double> flags;
  for (const auto & det : m.detections) flags.push_back(det.flag_time);
  d["flag_times"] = flags;
  d["attack_delays"] = m.attack_delays;
  std::vector<std::pair<double, double>> intervals;
  for (const auto & iv : m.schedule.intervals) intervals.emplace_back(iv.start, iv.end);
  d["attack_intervals"] = intervals;
  d["false_positive_count"] = m.false_positive_count;
  d["undetected_attack_count"] = m.undetected_attack_count;
  d["zero_delay_count"] = m.zero_delay_count;
  d["nonzero_delay_count"] = m.nonzero_delay_count;
  d["sandwich_violations"] = m.sandwich_violations;
  d["false_negatives"] = m.false_negatives;
  d["input_bound_violations"] = m.input_bound_violations;
  d["wall_clock"] = m.wall_clock;
  return d;
}

ScenarioConfig configure(const std::string & path, py::object detection, py::object attack, py::object horizon)
{
  ScenarioConfig cfg = load_and_validate(path);
  if (!detection.is_none()) cfg.sim.detection_enabled = detection.cast<bool>();
  if (!attack.is_none()) cfg.sim.attack_enabled = attack.cast<bool>();
  if (!horizon.is_none()) cfg.sim.horizon = horizon.cast<double>();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
  m.doc() = "Barrier-function attack detection and recovery for affine control systems";

  py::class_<QPSolution>(m, "QPSolution")
    .def_property_readonly("status", [](const QPSolution & s) { return status_name(s.status); })
    .def_readonly("z", &QPSolution::z)
    .def_readonly("multipliers", &QPSolution::multipliers)
    .def_readonly("iterations", &QPSolution::iterations)
    .def_readonly("min_violation", &QPSolution::min_violation)
    .def_readonly("kkt_residual", &QPSolution::kkt_residual);

  m.def(
    "solve_qp",
    [](const Mat & Q, const Vec & q, const Mat & G, const Vec & h) { return solve(QPProblem{Q, q, G, h}); },
    py::arg("Q"), py::arg("q"), py::arg("G"), py::arg("h"), "min ½zᵀQz + qᵀz subject to Gz ≤ h");

  m.def(
    "quadrotor_derivative",
    [](const Vec & state, const Eigen::Vector4d & wrench) { return quadrotor_derivative(state, wrench, QuadrotorParams{}); },
    py::arg("state"), py::arg("wrench"), "12-state derivative for a (thrust, roll, pitch, yaw) wrench");
  m.def(
    "mix_motors", [](const Eigen::Vector4d & thrusts) { return Eigen::Vector4d(mixing_matrix(QuadrotorParams{}) * thrusts); },
    py::arg("thrusts"), "wrench produced by motor thrusts f1..f4");

  m.def(
    "gamma", [](double t, double anchor, double delta_bar, double c_bar) {
      return gamma(GammaSchedule{delta_bar, c_bar}, t, anchor);
    },
    py::arg("t"), py::arg("anchor"), py::arg("delta_bar") = 0.1, py::arg("c_bar") = 0.0225);

  m.def(
    "worst_case_attack_term", [](const Vec & lgv, const Vec & lo, const Vec & hi) {
      return worst_case_attack_term(lgv, Box{lo, hi});
    },
    py::arg("lgv"), py::arg("lo"), py::arg("hi"));

  m.def(
    "load_config", [](const std::string & path) { return serialize(load_and_validate(path)); }, py::arg("path"),
    "validated configuration, normalized to INI text");

  m.def("trace_header", [](const std::string & path) {
    const ScenarioConfig cfg = load_and_validate(path);
    return trace_header(build_model(cfg), cfg.barriers.size());
  });

  m.def(
    "run_scenario",
    [](const std::string & path, std::uint64_t seed_offset, py::object detection, py::object attack,
       py::object horizon, bool trace) {
      const ScenarioConfig cfg = configure(path, detection, attack, horizon);
      Scenario sc = build_scenario(cfg, seed_offset);
      sc.sim.record_trace = trace;
      RunResult rr;
      {
        py::gil_scoped_release release;
        rr = run_scenario(sc);
      }
      py::dict out = metrics_dict(rr.metrics);
      if (trace) {
        std::ostringstream csv;
        write_trace_csv(csv, sc.model, sc.controller.bank.size(), rr.trace);
        out["trace_csv"] = csv.str();
      }
      return out;
    },
    py::arg("path"), py::arg("seed_offset") = 0, py::arg("detection") = py::none(), py::arg("attack") = py::none(),
    py::arg("horizon") = py::none(), py::arg("trace") = false);

  m.def(
    "certify",
    [](const std::string & path, int samples) {
      ScenarioConfig cfg = load_and_validate(path);
      if (samples > 0) cfg.certifier.samples = samples;
      const AffineModel model = build_model(cfg);
      const ControllerConfig controller = build_controller(cfg, model);
      std::vector<Certificate> certs;
      {
        py::gil_scoped_release release;
        certs = certify_all(controller, model, cfg.detector.delta_bar, build_certifier_settings(cfg));
      }
      py::list out;
      for (const auto & c : certs) {
        py::dict d;
        d["assumption"] = to_string(c.assumption);
        d["barrier"] = c.barrier;
        d["samples"] = c.samples;
        d["worst_margin"] = c.worst_margin;
        d["passed"] = c.passed;
        out.append(d);
      }
      return out;
    },
    py::arg("path"), py::arg("samples") = 0);
}
