// Command-line front end: simulate, batch, certify, qp-check.
//
// Exit codes: 0 success, 1 configuration or usage error, 2 runtime abort,
// 3 a soundness property failed in batch mode.

#include "cbfguard/config.hpp"
#include "cbfguard/qp_oracle.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace cbfguard;

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kRuntimeAbort = 2, kPropertyViolation = 3 };

// CBFGUARD_OUTPUT_ROOT, when set, anchors relative output directories.
fs::path resolve_output(const std::string & requested, const ScenarioConfig & cfg)
{
  fs::path out = requested.empty() ? fs::path(cfg.output_directory) : fs::path(requested);
  if (const char * root = std::getenv("CBFGUARD_OUTPUT_ROOT"); root && *root && out.is_relative()) out = fs::path(root) / out;
  fs::create_directories(out);
  return out;
}

std::vector<Certificate> run_certifier(const ScenarioConfig & cfg, std::vector<ConstantEstimate> * estimates)
{
  const AffineModel model = build_model(cfg);
  const ControllerConfig controller = build_controller(cfg, model);
  const CertifierSettings settings = build_certifier_settings(cfg);
  if (estimates)
    for (std::size_t i = 0; i < controller.bank.size(); ++i)
      estimates->push_back(estimate_constants(controller.bank, i, model, controller.bounds, settings));
  return certify_all(controller, model, cfg.detector.delta_bar, settings);
}

int cmd_simulate(const std::string & path, const std::string & out_dir, std::uint64_t seed_offset)
{
  const ScenarioConfig cfg = load_and_validate(path);
  const fs::path out = resolve_output(out_dir, cfg);
  const Scenario sc = build_scenario(cfg, seed_offset);
  const RunResult rr = run_scenario(sc);
  {
    std::ofstream trace(out / "trace.csv");
    write_trace_csv(trace, sc.model, sc.controller.bank.size(), rr.trace);
  }
  {
    std::ofstream metrics(out / "metrics.txt");
    write_metrics(metrics, rr.metrics);
  }
  std::cout << "wrote " << (out / "trace.csv").string() << " and " << (out / "metrics.txt").string() << '\n';
  if (rr.metrics.divergent) {
    std::cerr << "simulation aborted: " << rr.metrics.abort_reason << '\n';
    return kRuntimeAbort;
  }
  return kOk;
}

int cmd_batch(const std::string & path, const std::string & out_dir, int runs, std::uint64_t seed_base, int jobs,
              bool certify)
{
  const ScenarioConfig cfg = load_and_validate(path);
  const fs::path out = resolve_output(out_dir, cfg);
  std::optional<bool> certified;
  if (certify) {
    certified = all_passed(run_certifier(cfg, nullptr));
    if (!*certified) std::cerr << "warning: certificates failed; soundness is not asserted for this batch\n";
  }
  std::vector<Scenario> scenarios;
  for (int i = 0; i < runs; ++i) {
    Scenario sc = build_scenario(cfg, seed_base + static_cast<std::uint64_t>(i));
    sc.certified = certified;
    scenarios.push_back(std::move(sc));
  }
  const BatchReport report = run_batch(scenarios, jobs, (out / "counterexamples").string());
  {
    std::ofstream agg(out / "aggregate.txt");
    write_batch_report(agg, report);
  }
  write_batch_report(std::cout, report);
  if (report.aborted > 0 || report.divergent > 0) return kRuntimeAbort;
  if (report.false_negatives > 0 || report.certified_safety_violations > 0 || report.sandwich_violations > 0)
    return kPropertyViolation;
  return kOk;
}

int cmd_certify(const std::string & path, const std::string & out_dir, int samples)
{
  ScenarioConfig cfg = load_and_validate(path);
  if (samples > 0) cfg.certifier.samples = samples;
  const fs::path out = resolve_output(out_dir, cfg);
  std::vector<ConstantEstimate> estimates;
  const auto certificates = run_certifier(cfg, &estimates);
  {
    std::ofstream file(out / "certificates.txt");
    write_certificates(file, certificates, estimates);
  }
  write_certificates(std::cout, certificates, estimates);
  return kOk;
}

int cmd_qp_check(int count, std::uint64_t seed)
{
  const QPCheckReport r = run_qp_self_check(count, seed);
  std::cout << "problems = " << r.problems << '\n'
            << "infeasible = " << r.infeasible << '\n'
            << "status_mismatches = " << r.status_mismatches << '\n'
            << "max_solution_gap = " << r.max_solution_gap << '\n'
            << "max_kkt_residual = " << r.max_kkt_residual << '\n'
            << "seconds = " << r.seconds << '\n'
            << "passed = " << (r.passed() ? "true" : "false") << '\n';
  return r.passed() ? kOk : kPropertyViolation;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"CBF attack detection and recovery: simulation, certification and solver checks"};
  app.require_subcommand(1);
  std::string footer = "Scenario file keys (INI sections):\n";
  for (const auto & line : documented_keys()) footer += "  " + line + "\n";
  footer += "Environment: CBFGUARD_OUTPUT_ROOT anchors relative output directories.";
  app.footer(footer);

  std::string config_path, out_dir;
  std::uint64_t seed_offset = 0, seed_base = 0, qp_seed = 1;
  int runs = 100, jobs = 1, samples = 0, qp_count = 500;
  bool skip_certify = false;

  auto * simulate = app.add_subcommand("simulate", "run one scenario and write trace.csv and metrics.txt");
  simulate->add_option("config", config_path, "scenario file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", out_dir, "output directory (default: [output] directory)");
  simulate->add_option("--seed-offset", seed_offset, "added to both configured seeds")->capture_default_str();

  auto * batch = app.add_subcommand("batch", "run seeded scenarios and write aggregate.txt");
  batch->add_option("config", config_path, "scenario file")->required()->check(CLI::ExistingFile);
  batch->add_option("--out", out_dir, "output directory (default: [output] directory)");
  batch->add_option("--runs", runs, "number of runs")->capture_default_str()->check(CLI::PositiveNumber);
  batch->add_option("--seed-base", seed_base, "seed offset of the first run")->capture_default_str();
  batch->add_option("--jobs", jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  batch->add_flag("--skip-certify", skip_certify, "do not run the certifier first");

  auto * certify = app.add_subcommand("certify", "sample-check the detection and recovery assumptions");
  certify->add_option("config", config_path, "scenario file")->required()->check(CLI::ExistingFile);
  certify->add_option("--out", out_dir, "output directory (default: [output] directory)");
  certify->add_option("--samples", samples, "override the configured sample count")->check(CLI::NonNegativeNumber);

  auto * qp_check = app.add_subcommand("qp-check", "compare the QP solver with active-set enumeration");
  qp_check->add_option("--count", qp_count, "random problems")->capture_default_str()->check(CLI::PositiveNumber);
  qp_check->add_option("--seed", qp_seed, "generator seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*simulate) return cmd_simulate(config_path, out_dir, seed_offset);
    if (*batch) return cmd_batch(config_path, out_dir, runs, seed_base, jobs, !skip_certify);
    if (*certify) return cmd_certify(config_path, out_dir, samples);
    if (*qp_check) return cmd_qp_check(qp_count, qp_seed);
  } catch (const ConfigError & e) {
    std::cerr << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument & e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception & e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kRuntimeAbort;
  }
  return kConfigError;
}
