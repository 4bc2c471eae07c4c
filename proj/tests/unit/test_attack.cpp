#include "cbfguard/attack.hpp"
#include "cbfguard/guard.hpp"
#include "support.hpp"

#include <doctest.h>

#include <random>

using namespace cbfguard;
using namespace cbfguard::testing;

namespace {

Box scalar_box(double lo, double hi) { return Box{Vec::Constant(1, lo), Vec::Constant(1, hi)}; }

// Two barriers on ẋ = g_s u_s + g_v u_v; the second one sits closer to its boundary.
StateEvaluation two_barrier_eval(double lgv0, double lgv1, double b0, double b1)
{
  StateEvaluation ev;
  ev.barriers.resize(2);
  ev.barriers[0].value = b0;
  ev.barriers[0].lg = Vec::Zero(2);
  ev.barriers[0].lg(1) = lgv0;
  ev.barriers[1].value = b1;
  ev.barriers[1].lg = Vec::Zero(2);
  ev.barriers[1].lg(1) = lgv1;
  return ev;
}

AttackSchedule always_on()
{
  AttackSchedule s;
  s.intervals = {{0.0, 100.0}};
  s.T_bar = 100.0;
  return s;
}

}  // namespace

TEST_CASE("generated schedules respect the length and gap bounds")
{
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const AttackSchedule s = generate_schedule(0.934, 2.238, 30.0, seed);
    CHECK(schedule_violations(s).empty());
    for (const auto & iv : s.intervals) {
      CHECK(iv.length() <= 0.934);
      CHECK(iv.start >= 2.238);
      CHECK(iv.end <= 30.0);
    }
    for (std::size_t i = 1; i < s.intervals.size(); ++i)
      CHECK(s.intervals[i].start - s.intervals[i - 1].end >= 2.238);
  }
}

TEST_CASE("schedule generation edge cases")
{
  CHECK(generate_schedule(0.934, 2.238, 0.0, 1).intervals.empty());
  CHECK(generate_schedule(0.934, 2.238, 30.0, 9) == generate_schedule(0.934, 2.238, 30.0, 9));
  CHECK_FALSE(generate_schedule(0.934, 2.238, 30.0, 9) == generate_schedule(0.934, 2.238, 30.0, 10));
  std::vector<std::string> warnings;
  const AttackSchedule s = generate_schedule(0.934, 2.238, 3.0, 4, &warnings);
  CHECK(s.intervals.size() <= 1);
  CHECK(warnings.size() == 1);
  CHECK_THROWS_AS(generate_schedule(0.0, 2.238, 30.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate_schedule(0.934, -1.0, 30.0, 1), std::invalid_argument);
}

TEST_CASE("schedule checker reports each broken invariant")
{
  AttackSchedule s;
  s.intervals = {{1.0, 2.5}, {3.0, 3.5}, {3.4, 3.45}};
  const auto v = schedule_violations(s);
  CHECK(v.size() == 3);
  CHECK(s.active(1.0));
  CHECK_FALSE(s.active(2.5));
  CHECK(s.interval_at(3.2) == std::optional<std::size_t>{1});
}

TEST_CASE("greedy vertex follows the sign of the gradient")
{
  CHECK(greedy_vertex(Vec::Constant(1, 2.0), scalar_box(-27.7, 27.7))(0) == 27.7);
  CHECK(greedy_vertex(Vec::Constant(1, -2.0), scalar_box(-27.7, 27.7))(0) == -27.7);
  CHECK(greedy_vertex(Vec::Constant(1, 0.0), scalar_box(-5.0, 20.0))(0) == 20.0);
  CHECK_THROWS_AS(greedy_vertex(Vec::Constant(1, 1.0), scalar_box(-1.0, INFINITY)), std::invalid_argument);
}

TEST_CASE("greedy attack targets the most violated barrier")
{
  AttackSignal sig;
  sig.U_v = scalar_box(-5.0, 20.0);
  const StateEvaluation ev = two_barrier_eval(1.0, -1.0, -0.3, -0.01);
  CHECK(most_violated_barrier(ev) == 1);
  CHECK(attack_value(sig, always_on(), ev, 1, 0.5)(0) == -5.0);
  const StateEvaluation tied = two_barrier_eval(1.0, -1.0, -0.2, -0.2);
  CHECK(most_violated_barrier(tied) == 0);
}

TEST_CASE("greedy attack attains the worst-case term")
{
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  AttackSignal sig;
  sig.U_v = scalar_box(-5.0, 20.0);
  for (int k = 0; k < 500; ++k) {
    const StateEvaluation ev = two_barrier_eval(n(rng), n(rng), n(rng), n(rng));
    const auto & eb = ev.barriers[most_violated_barrier(ev)];
    const Vec ua = attack_value(sig, always_on(), ev, 1, 0.1);
    CHECK(std::abs(eb.lg.tail(1).dot(ua) - worst_case_attack_term(eb.lg.tail(1), sig.U_v)) <= 1e-12);
  }
}

TEST_CASE("every signal kind stays inside the attacker's range")
{
  const StateEvaluation ev = two_barrier_eval(0.3, -0.2, -0.1, -0.2);
  for (AttackKind kind : {AttackKind::constant, AttackKind::uniform_random, AttackKind::sinusoid,
                          AttackKind::greedy_adversarial}) {
    AttackSignal sig;
    sig.kind = kind;
    sig.U_v = scalar_box(-5.0, 20.0);
    sig.constant_value = Vec::Constant(1, 20.0);
    sig.amplitude = 40.0;
    sig.frequency = 3.0;
    sig.seed = 17;
    sig.validate();
    for (int k = 0; k < 2000; ++k) {
      const Vec v = attack_value(sig, always_on(), ev, 1, k * 1e-3);
      CHECK(v(0) >= -5.0);
      CHECK(v(0) <= 20.0);
    }
  }
}

TEST_CASE("constant and random signals")
{
  AttackSignal sig;
  sig.kind = AttackKind::constant;
  sig.U_v = scalar_box(-27.7, 27.7);
  sig.constant_value = Vec::Constant(1, 27.7);
  const StateEvaluation ev = two_barrier_eval(1.0, 1.0, -0.1, -0.1);
  for (double t : {0.0, 0.5, 99.0}) CHECK(attack_value(sig, always_on(), ev, 1, t)(0) == 27.7);

  sig.kind = AttackKind::uniform_random;
  sig.seed = 5;
  CHECK(attack_value(sig, always_on(), ev, 1, 0.25)(0) == attack_value(sig, always_on(), ev, 1, 0.25)(0));
  CHECK(attack_value(sig, always_on(), ev, 1, 0.25)(0) != attack_value(sig, always_on(), ev, 1, 0.251)(0));
}

TEST_CASE("attack values are only defined inside attack intervals")
{
  AttackSignal sig;
  sig.U_v = scalar_box(-5.0, 20.0);
  AttackSchedule s;
  s.intervals = {{1.0, 1.5}};
  const StateEvaluation ev = two_barrier_eval(1.0, 1.0, -0.1, -0.1);
  CHECK_NOTHROW(attack_value(sig, s, ev, 1, 1.2));
  CHECK_THROWS_AS(attack_value(sig, s, ev, 1, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(attack_value(sig, s, ev, 1, 0.0), std::invalid_argument);
}

TEST_CASE("signal validation and kind names")
{
  AttackSignal sig;
  sig.kind = AttackKind::constant;
  sig.U_v = scalar_box(-5.0, 20.0);
  sig.constant_value = Vec::Constant(1, 27.7);
  CHECK_THROWS_AS(sig.validate(), std::invalid_argument);
  sig.kind = AttackKind::sinusoid;
  sig.frequency = 0.0;
  CHECK_THROWS_AS(sig.validate(), std::invalid_argument);
  for (AttackKind k : {AttackKind::constant, AttackKind::uniform_random, AttackKind::sinusoid,
                       AttackKind::greedy_adversarial})
    CHECK(attack_kind_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(attack_kind_from_string("stealthy"), std::invalid_argument);
}
