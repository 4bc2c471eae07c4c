#include "cbfguard/attack.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <random>
#include <stdexcept>

namespace cbfguard {

namespace {

std::uint64_t splitmix64(std::uint64_t z)
{
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform in [0, 1) from (seed, t, component); pure so replays agree.
double hashed_unit(std::uint64_t seed, double t, Eigen::Index component)
{
  std::uint64_t bits = 0;
  static_assert(sizeof(bits) == sizeof(t));
  std::memcpy(&bits, &t, sizeof(t));
  const std::uint64_t h = splitmix64(splitmix64(seed ^ bits) + static_cast<std::uint64_t>(component));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

void require_box(const Box & box)
{
  if (box.lo.size() != box.hi.size()) throw std::invalid_argument("attack: U_v bounds differ in size");
  if (!box.lo.allFinite() || !box.hi.allFinite()) throw std::invalid_argument("attack: U_v must be bounded");
  if ((box.lo.array() > box.hi.array()).any()) throw std::invalid_argument("attack: U_v has lo > hi");
}

}  // namespace

bool AttackSchedule::active(double t) const { return interval_at(t).has_value(); }

std::optional<std::size_t> AttackSchedule::interval_at(double t) const
{
  for (std::size_t i = 0; i < intervals.size(); ++i)
    if (intervals[i].contains(t)) return i;
  return std::nullopt;
}

std::vector<std::string> schedule_violations(const AttackSchedule & s)
{
  std::vector<std::string> out;
  if (!(s.T_bar > 0.0)) out.push_back("T_bar must be positive");
  if (s.T_na < 0.0) out.push_back("T_na must be nonnegative");
  const double tol = 1e-12;
  for (std::size_t i = 0; i < s.intervals.size(); ++i) {
    const auto & iv = s.intervals[i];
    const std::string tag = "attack interval " + std::to_string(i);
    if (!(iv.end > iv.start)) out.push_back(tag + " is empty or reversed");
    if (iv.length() > s.T_bar + tol) out.push_back(tag + " is longer than T_bar");
    if (iv.start < 0.0) out.push_back(tag + " starts before t = 0");
    if (i > 0) {
      const double gap = iv.start - s.intervals[i - 1].end;
      if (gap < 0.0) out.push_back(tag + " overlaps or precedes its predecessor");
      else if (gap < s.T_na - tol) out.push_back(tag + " follows its predecessor by less than T_na");
    }
  }
  return out;
}

AttackSchedule generate_schedule(double T_bar, double T_na, double horizon, std::uint64_t seed,
                                 std::vector<std::string> * warnings)
{
  if (!(T_bar > 0.0)) throw std::invalid_argument("generate_schedule: T_bar must be positive");
  if (T_na < 0.0) throw std::invalid_argument("generate_schedule: T_na must be nonnegative");
  if (horizon < 0.0) throw std::invalid_argument("generate_schedule: horizon must be nonnegative");

  AttackSchedule s;
  s.T_bar = T_bar;
  s.T_na = T_na;
  if (T_bar + T_na > horizon && warnings)
    warnings->push_back("T_bar + T_na exceeds the horizon; at most one attack fits");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> length(0.2 * T_bar, T_bar);
  // Exp(mean T_na); a zero T_na degenerates to zero extra gap.
  auto extra_gap = [&]() {
    if (T_na == 0.0) return 0.0;
    std::exponential_distribution<double> exp(1.0 / T_na);
    return exp(rng);
  };

  double t = 0.0;
  while (true) {
    const double start = t + T_na + extra_gap();
    if (start >= horizon) break;
    const double end = std::min(start + length(rng), horizon);
    s.intervals.push_back({start, end});
    t = end;
  }
  return s;
}

const char * to_string(AttackKind kind)
{
  switch (kind) {
    case AttackKind::constant: return "constant";
    case AttackKind::uniform_random: return "uniform_random";
    case AttackKind::sinusoid: return "sinusoid";
    case AttackKind::greedy_adversarial: return "greedy_adversarial";
  }
  return "?";
}

AttackKind attack_kind_from_string(const std::string & name)
{
  for (AttackKind k : {AttackKind::constant, AttackKind::uniform_random, AttackKind::sinusoid,
                       AttackKind::greedy_adversarial})
    if (name == to_string(k)) return k;
  throw std::invalid_argument("unknown attack kind '" + name + "'");
}

void AttackSignal::validate() const
{
  require_box(U_v);
  if (kind == AttackKind::constant) {
    if (constant_value.size() != U_v.size()) throw std::invalid_argument("attack: constant value has the wrong dimension");
    if (!U_v.contains(constant_value)) throw std::invalid_argument("attack: constant value lies outside U_v");
  }
  if (kind == AttackKind::sinusoid && (amplitude < 0.0 || !(frequency > 0.0)))
    throw std::invalid_argument("attack: sinusoid needs amplitude >= 0 and frequency > 0");
}

Vec greedy_vertex(const Vec & lgv, const Box & U_v)
{
  require_box(U_v);
  if (lgv.size() != U_v.size()) throw std::invalid_argument("greedy_vertex: dimension mismatch");
  Vec v(lgv.size());
  for (Eigen::Index j = 0; j < lgv.size(); ++j) v(j) = lgv(j) >= 0.0 ? U_v.hi(j) : U_v.lo(j);
  return v;
}

std::size_t most_violated_barrier(const StateEvaluation & ev)
{
  if (ev.barriers.empty()) throw std::invalid_argument("most_violated_barrier: no barriers");
  std::size_t best = 0;
  for (std::size_t i = 1; i < ev.barriers.size(); ++i)
    if (ev.barriers[i].value > ev.barriers[best].value) best = i;
  return best;
}

Vec attack_value(const AttackSignal & signal, const AttackSchedule & schedule, const StateEvaluation & ev,
                 int secure_inputs, double t)
{
  if (!schedule.active(t)) throw std::invalid_argument("attack_value queried outside every attack interval");
  const Box & box = signal.U_v;
  switch (signal.kind) {
    case AttackKind::constant: return signal.constant_value;
    case AttackKind::uniform_random: {
      Vec v(box.size());
      for (Eigen::Index j = 0; j < v.size(); ++j)
        v(j) = box.lo(j) + hashed_unit(signal.seed, t, j) * (box.hi(j) - box.lo(j));
      return box.clamp(v);
    }
    case AttackKind::sinusoid: {
      const double s = std::sin(2.0 * std::numbers::pi * signal.frequency * t);
      return box.clamp(box.midpoint() + Vec::Constant(box.size(), signal.amplitude * s));
    }
    case AttackKind::greedy_adversarial: {
      const auto & eb = ev.barriers[most_violated_barrier(ev)];
      return greedy_vertex(eb.lg.tail(eb.lg.size() - secure_inputs), box);
    }
  }
  throw std::logic_error("attack_value: unhandled kind");
}

}  // namespace cbfguard
