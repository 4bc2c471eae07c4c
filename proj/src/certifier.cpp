#include "cbfguard/certifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

namespace cbfguard {

namespace {

constexpr std::size_t kMaxWitnesses = 10;

double box_min(const Vec & coeff, const Box & box)
{
  double total = 0.0;
  for (Eigen::Index j = 0; j < coeff.size(); ++j) total += std::min(coeff(j) * box.lo(j), coeff(j) * box.hi(j));
  return total;
}

const Box & require_box(const InputBounds & U, const char * what)
{
  if (!U.box) throw std::invalid_argument(std::string("certifier: ") + what + " must be a box");
  return *U.box;
}

Vec uniform_in(const Box & box, std::mt19937_64 & rng)
{
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec x(box.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = box.lo(i) + unit(rng) * (box.hi(i) - box.lo(i));
  return x;
}

bool inside_raw_safe_set(const BarrierBank & bank, const Vec & x)
{
  for (const auto & spec : bank.barriers)
    if (spec.value(x) > 0.0) return false;
  return true;
}

Certificate finish(Certificate c, std::vector<std::pair<double, Vec>> & scored)
{
  std::sort(scored.begin(), scored.end(), [](const auto & a, const auto & b) { return a.first > b.first; });
  c.samples = static_cast<int>(scored.size());
  c.worst_margin = scored.empty() ? -std::numeric_limits<double>::infinity() : scored.front().first;
  c.passed = !scored.empty() && c.worst_margin <= 0.0;
  for (std::size_t i = 0; i < std::min(kMaxWitnesses, scored.size()); ++i) c.witnesses.push_back(scored[i].second);
  return c;
}

// One RK4 step of signed length h under constant u and d.
Vec flow(const AffineModel & model, const Vec & x, const Vec & u, const Vec & d, double h)
{
  auto F = [&](const Vec & s) { return model.evaluate(s, u, d); };
  const Vec k1 = F(x);
  const Vec k2 = F(x + 0.5 * h * k1);
  const Vec k3 = F(x + 0.5 * h * k2);
  const Vec k4 = F(x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

const char * to_string(Assumption a) { return a == Assumption::A2 ? "A2" : "A3"; }

void CertifierSettings::validate(int state_dim) const
{
  if (envelope.size() != state_dim) throw std::invalid_argument("certifier: envelope has the wrong dimension");
  if (!envelope.lo.allFinite() || !envelope.hi.allFinite() || (envelope.lo.array() > envelope.hi.array()).any())
    throw std::invalid_argument("certifier: envelope must be a bounded box with lo <= hi");
  if (samples <= 0) throw std::invalid_argument("certifier: sample count must be positive");
  if (attempts_per_sample <= 0) throw std::invalid_argument("certifier: attempts per sample must be positive");
  if (!(eta_factor >= 1.0) || !(lipschitz_factor >= 1.0))
    throw std::invalid_argument("certifier: safety factors must be at least 1");
  if (!(rollout_step > 0.0)) throw std::invalid_argument("certifier: rollout step must be positive");
}

std::vector<Vec> sample_band(const BarrierBank & bank, std::size_t index, const AffineModel & model,
                             const CertifierSettings & settings)
{
  settings.validate(model.state_dim);
  const BarrierSpec & spec = bank.barriers.at(index);
  std::mt19937_64 rng(settings.seed + 0x51ed2701ULL * (index + 1));
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(settings.samples));
  const long budget = static_cast<long>(settings.samples) * settings.attempts_per_sample;
  for (long attempt = 0; attempt < budget && static_cast<int>(out.size()) < settings.samples; ++attempt) {
    Vec x = uniform_in(settings.envelope, rng);
    const double v = effective_value(spec, model, x);
    if (v > 0.0 || v <= -spec.c_bar) continue;
    if (!inside_raw_safe_set(bank, x)) continue;
    out.push_back(std::move(x));
  }
  if (static_cast<int>(out.size()) < settings.samples)
    throw std::invalid_argument("certifier: sampler could not fill the band of barrier " + spec.name + " (got "
                                + std::to_string(out.size()) + " of " + std::to_string(settings.samples) + ")");
  return out;
}

double a2_margin(const EffectiveBarrier & eb, const BarrierSpec & spec, const InputBounds & U, double delta_bar,
                 double delta)
{
  return eb.lf + box_min(eb.lg, require_box(U, "U")) + delta_bar * eb.value + spec.lipschitz * delta;
}

double a3_margin(const EffectiveBarrier & eb, const BarrierSpec & spec, const InputBounds & U_s, const Box & U_v,
                 double delta)
{
  const Box & bs = require_box(U_s, "U_s");
  const Eigen::Index ms = bs.size();
  return eb.lf + box_min(eb.lg.head(ms), bs) + worst_case_attack_term(eb.lg.tail(eb.lg.size() - ms), U_v)
         + spec.lipschitz * delta;
}

Certificate certify_A2(const ControllerConfig & cfg, const AffineModel & model, std::size_t index, double delta_bar,
                       const std::vector<Vec> & samples)
{
  const BarrierSpec & spec = cfg.bank.barriers.at(index);
  Certificate c;
  c.assumption = Assumption::A2;
  c.barrier = spec.name;
  c.c_bar = spec.c_bar;
  c.delta_bar = delta_bar;
  std::vector<std::pair<double, Vec>> scored;
  scored.reserve(samples.size());
  for (const auto & x : samples)
    scored.emplace_back(a2_margin(effective_barrier(spec, model, x), spec, cfg.bounds, delta_bar, cfg.delta), x);
  return finish(std::move(c), scored);
}

Certificate certify_A3(const ControllerConfig & cfg, const AffineModel & model, std::size_t index,
                       const std::vector<Vec> & samples)
{
  const BarrierSpec & spec = cfg.bank.barriers.at(index);
  Certificate c;
  c.assumption = Assumption::A3;
  c.barrier = spec.name;
  c.c_bar = spec.c_bar;
  std::vector<std::pair<double, Vec>> scored;
  scored.reserve(samples.size());
  for (const auto & x : samples)
    scored.emplace_back(
      a3_margin(effective_barrier(spec, model, x), spec, cfg.secure_bounds, cfg.vulnerable_box, cfg.delta), x);
  return finish(std::move(c), scored);
}

std::vector<Certificate> certify_all(const ControllerConfig & cfg, const AffineModel & model, double delta_bar,
                                     const CertifierSettings & settings)
{
  std::vector<Certificate> out;
  for (std::size_t i = 0; i < cfg.bank.size(); ++i) {
    const auto samples = sample_band(cfg.bank, i, model, settings);
    out.push_back(certify_A2(cfg, model, i, delta_bar, samples));
    out.push_back(certify_A3(cfg, model, i, samples));
  }
  return out;
}

bool all_passed(const std::vector<Certificate> & certificates)
{
  return std::all_of(certificates.begin(), certificates.end(), [](const Certificate & c) { return c.passed; });
}

ConstantEstimate estimate_constants(const BarrierBank & bank, std::size_t index, const AffineModel & model,
                                    const InputBounds & U, const CertifierSettings & settings)
{
  settings.validate(model.state_dim);
  const BarrierSpec & spec = bank.barriers.at(index);
  const Box & box = require_box(U, "U");
  std::mt19937_64 rng(settings.seed ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
  std::uniform_int_distribution<int> coin(0, 1);
  const double h = settings.rollout_step;

  // Envelope corners lo and hi come first so extreme gradients on the box faces are seen.
  std::vector<Vec> points;
  for (const Vec & corner : {settings.envelope.lo, settings.envelope.hi})
    if (inside_raw_safe_set(bank, corner)) points.push_back(corner);
  const long budget = static_cast<long>(settings.samples) * settings.attempts_per_sample;
  for (long attempt = 0; attempt < budget && static_cast<int>(points.size()) < settings.samples; ++attempt) {
    Vec x = uniform_in(settings.envelope, rng);
    if (inside_raw_safe_set(bank, x)) points.push_back(std::move(x));
  }
  if (points.empty()) throw std::invalid_argument("certifier: no envelope sample lies in the safe set");

  ConstantEstimate est;
  est.barrier = spec.name;
  est.samples = static_cast<int>(points.size());
  std::vector<Vec> inside;
  for (std::size_t s = 0; s < points.size(); ++s) {
    const Vec & x = points[s];
    const EffectiveBarrier eb = effective_barrier(spec, model, x);
    if (!std::isfinite(eb.value) || !eb.gradient.allFinite())
      throw std::runtime_error("certifier: non-finite barrier data at an envelope sample");
    est.max_gradient_norm = std::max(est.max_gradient_norm, eb.gradient.norm());
    if (eb.value <= 0.0) inside.push_back(x);

    // Alternate box vertices and interior points for the held input.
    Vec u(box.size());
    if (s % 2 == 0) {
      for (Eigen::Index j = 0; j < u.size(); ++j) u(j) = coin(rng) ? box.hi(j) : box.lo(j);
    } else {
      u = uniform_in(box, rng);
    }
    const Vec d = sample_disturbance(model.state_dim, model.disturbance_bound, rng());
    const Vec xp1 = flow(model, x, u, d, h), xp2 = flow(model, xp1, u, d, h);
    const Vec xm1 = flow(model, x, u, d, -h), xm2 = flow(model, xm1, u, d, -h);
    const double b0 = eb.value;
    const double bp1 = effective_value(spec, model, xp1), bp2 = effective_value(spec, model, xp2);
    const double bm1 = effective_value(spec, model, xm1), bm2 = effective_value(spec, model, xm2);
    const double second = (-bp2 + 16.0 * bp1 - 30.0 * b0 + 16.0 * bm1 - bm2) / (12.0 * h * h);
    if (!std::isfinite(second)) throw std::runtime_error("certifier: non-finite second derivative estimate");
    est.max_second_derivative = std::max(est.max_second_derivative, std::abs(second));
  }
  est.eta = std::max(settings.eta_factor * est.max_second_derivative, 1e-6);
  est.lipschitz = settings.lipschitz_factor * est.max_gradient_norm;
  if (!inside.empty()) {
    est.c_M = compute_cM([&](const Vec & x) { return effective_value(spec, model, x); }, inside);
  }
  return est;
}

void write_certificates(std::ostream & out, const std::vector<Certificate> & certificates,
                        const std::vector<ConstantEstimate> & estimates)
{
  out << "# sampling evidence over the configured envelope, not a formal proof\n";
  for (const auto & c : certificates) {
    const std::string key = std::string(to_string(c.assumption)) + "." + c.barrier;
    out << key << ".passed = " << (c.passed ? "true" : "false") << '\n';
    out << key << ".worst_margin = " << c.worst_margin << '\n';
    out << key << ".samples = " << c.samples << '\n';
    out << key << ".c_bar = " << c.c_bar << '\n';
    if (c.assumption == Assumption::A2) out << key << ".delta_bar = " << c.delta_bar << '\n';
    if (!c.witnesses.empty()) {
      out << key << ".worst_witness = ";
      for (Eigen::Index i = 0; i < c.witnesses.front().size(); ++i) out << (i ? ";" : "") << c.witnesses.front()(i);
      out << '\n';
    }
  }
  for (const auto & e : estimates) {
    out << "constants." << e.barrier << ".eta = " << e.eta << '\n';
    out << "constants." << e.barrier << ".lipschitz = " << e.lipschitz << '\n';
    out << "constants." << e.barrier << ".c_M = " << e.c_M << '\n';
    out << "constants." << e.barrier << ".samples = " << e.samples << '\n';
  }
  out << "all_passed = " << (all_passed(certificates) ? "true" : "false") << '\n';
}

}  // namespace cbfguard
