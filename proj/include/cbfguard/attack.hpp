#pragma once

#include "cbfguard/barrier.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cbfguard {

/// Half-open attack interval [start, end).
struct AttackInterval
{
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  bool contains(double t) const { return t >= start && t < end; }
  bool operator==(const AttackInterval &) const = default;
};

struct AttackSchedule
{
  std::vector<AttackInterval> intervals;
  double T_bar = 0.934;  // longest attack, s
  double T_na = 2.238;   // shortest attack-free gap, s

  bool active(double t) const;
  std::optional<std::size_t> interval_at(double t) const;
  bool operator==(const AttackSchedule &) const = default;
};

/// Every violated invariant (ordering, disjointness, length ≤ T̄, gap ≥ T_na); empty when valid.
std::vector<std::string> schedule_violations(const AttackSchedule & schedule);

/**
 * Random schedule over [0, horizon]: gaps ~ T_na + Exp(mean T_na), lengths
 * ~ U(0.2 T̄, T̄). The leading gap before the first attack follows the same
 * law. Deterministic per seed; an interval that would cross the horizon is
 * truncated.
 */
AttackSchedule generate_schedule(double T_bar, double T_na, double horizon, std::uint64_t seed,
                                 std::vector<std::string> * warnings = nullptr);

enum class AttackKind { constant, uniform_random, sinusoid, greedy_adversarial };

const char * to_string(AttackKind kind);
AttackKind attack_kind_from_string(const std::string & name);

struct AttackSignal
{
  AttackKind kind = AttackKind::greedy_adversarial;
  Box U_v;
  Vec constant_value;      // constant kind
  double amplitude = 0.0;  // sinusoid kind, about the midpoint of U_v
  double frequency = 1.0;  // Hz
  std::uint64_t seed = 0;  // uniform_random kind

  void validate() const;
};

/// Vertex of the box maximizing lgᵀ u_v; a zero component goes to the upper bound.
Vec greedy_vertex(const Vec & lgv, const Box & U_v);

/// Index of the barrier with the largest B̃ (first on ties).
std::size_t most_violated_barrier(const StateEvaluation & ev);

/**
 * u_a(t) for the vulnerable inputs. Throws std::invalid_argument when t is
 * not inside an attack interval. ev supplies B̃ and L_gB̃ for the greedy kind.
 */
Vec attack_value(const AttackSignal & signal, const AttackSchedule & schedule, const StateEvaluation & ev,
                 int secure_inputs, double t);

}  // namespace cbfguard
