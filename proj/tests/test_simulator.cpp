#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "lipwalk/simulator.hpp"
#include "oracle.hpp"

using namespace lipwalk;

namespace {

const ModelParams<double> kModel(10.0, 1.0);
constexpr double kT = 0.3;
constexpr double kDeg = std::numbers::pi / 180.0;

const SpecialGains<double> kGains = special_b(step_constants(kT, kModel), kModel);

WorldState planar_start(double x0, double v0) {
  WorldState s;
  s.com.x() = x0;
  s.vel.x() = v0;
  return s;
}

WalkTrace walk2d(double x0, double v0, double a1, double b1, double a2, double b2, long n,
                 std::vector<PushEvent> pushes = {}, double rate = 0.0) {
  SimulationOptions opt;
  opt.sample_rate = rate;
  return simulate_2d(planar_start(x0, v0), {LegParams<double>{a1, b1}, LegParams<double>{a2, b2}}, kT, n,
                     pushes, opt, kModel);
}

WalkTrace walk3d(const WorldState& start, const GaitSchedule& schedule, long n, double rate = 0.0,
                 std::vector<PushEvent> pushes = {}) {
  SimulationOptions opt;
  opt.sample_rate = rate;
  return simulate_3d(start, schedule, n, pushes, opt, kModel);
}

std::vector<double> touchdown_velocities(const WalkTrace& trace, int axis = 0) {
  std::vector<double> v;
  for (const auto& s : trace.steps) v.push_back(s.vel_before(axis));
  return v;
}

Eigen::Matrix2d rot(double theta) { return heading_rotation(theta); }

}  // namespace

TEST(Simulate2d, EquilibriumStaysPut) {
  const auto trace = walk2d(0, 0, 0, 0.3, 0, 0.3, 10, {}, 50);
  ASSERT_EQ(trace.steps.size(), 10u);
  for (const auto& s : trace.steps) {
    EXPECT_EQ(s.rel_before, Eigen::Vector2d::Zero());
    EXPECT_EQ(s.vel_before, Eigen::Vector2d::Zero());
    EXPECT_EQ(s.footprint, Eigen::Vector2d::Zero());
  }
  for (const auto& f : trace.footprints()) EXPECT_EQ(f, Eigen::Vector2d::Zero());
}

TEST(Simulate2d, DeadbeatSequence) {
  const auto trace = walk2d(-0.3, 2.0, 0, kGains.b_db, 0, kGains.b_db, 20);
  const auto ref = oracle::walk_2d(-0.3, 2.0, {{{0, kGains.b_db}, {0, kGains.b_db}}}, kT, 20);
  const auto v = touchdown_velocities(trace);
  EXPECT_NEAR(v[0], 1.9283, 1e-4);
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_NEAR(v[i], ref[i].v_before, 1e-12) << i;
    if (i >= 1) EXPECT_LT(std::abs(v[i]), 1e-9) << i;
  }
}

TEST(Simulate2d, LowerBoundKeepsSpeed) {
  const auto v = touchdown_velocities(walk2d(-0.3, 2.0, 0, kGains.b_min, 0, kGains.b_min, 20));
  for (double x : v) EXPECT_NEAR(std::abs(x), 1.9283510531, 1e-6);
}

TEST(Simulate2d, MatchesOracleForRandomControllers) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> a(-0.4, 0.4), frac(0.05, 0.95), u(-2, 2);
  for (int i = 0; i < 30; ++i) {
    const double b1 = kGains.b_min + frac(rng) * (kGains.b_max - kGains.b_min);
    const double b2 = kGains.b_min + frac(rng) * (kGains.b_max - kGains.b_min);
    const double a1 = a(rng), a2 = a(rng), x0 = u(rng) * 0.2, v0 = u(rng);
    const auto trace = walk2d(x0, v0, a1, b1, a2, b2, 25);
    const auto ref = oracle::walk_2d(x0, v0, {{{a1, b1}, {a2, b2}}}, kT, 25);
    for (std::size_t k = 0; k < ref.size(); ++k) {
      EXPECT_NEAR(trace.steps[k].rel_before.x(), ref[k].x_before, 1e-11);
      EXPECT_NEAR(trace.steps[k].vel_before.x(), ref[k].v_before, 1e-11);
      EXPECT_NEAR(trace.steps[k].rel_after.x(), ref[k].x_after, 1e-11);
    }
  }
}

TEST(Simulate2d, TraceInvariants) {
  const auto trace = walk2d(-0.3, 2.0, 0.2, 0.3, -0.1, 0.5, 30, {}, 100);
  ASSERT_EQ(trace.steps.size(), 30u);
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const auto& s = trace.steps[i];
    EXPECT_EQ(s.index, static_cast<long>(i) + 1);
    EXPECT_EQ(s.leg, i % 2 == 0 ? Leg::One : Leg::Two);
    EXPECT_EQ(s.vel_before, s.vel_after);
    EXPECT_EQ(s.rel_after.x(), -s.placement.x());
    if (i > 0) EXPECT_NEAR(s.time - trace.steps[i - 1].time, kT, 1e-12);
    EXPECT_EQ(s.rel_before.y(), 0.0);
    EXPECT_EQ(s.footprint.y(), 0.0);
  }
  for (const auto& smp : trace.samples) {
    EXPECT_EQ(smp.com.y(), 0.0);
    EXPECT_EQ(smp.vel.y(), 0.0);
  }
}

TEST(Simulate2d, SamplesFollowClosedForm) {
  const auto trace = walk2d(-0.3, 2.0, 0.2, 0.3, -0.1, 0.5, 12, {}, 100);
  ASSERT_FALSE(trace.samples.empty());
  std::size_t checked = 0;
  for (const auto& smp : trace.samples) {
    // Segment start: initial state or the touchdown that began this step.
    PendulumState<double> start(-0.3, 2.0);
    double t0 = 0.0;
    if (smp.step_index > 0) {
      const auto& rec = trace.steps[static_cast<std::size_t>(smp.step_index - 1)];
      start = rec.after(0);
      t0 = rec.time;
    }
    const auto q = flow(start, smp.t - t0, kModel);
    EXPECT_NEAR(smp.com.x() - smp.stance.x(), q.x(), 1e-10);
    EXPECT_NEAR(smp.vel.x(), q.v(), 1e-10);
    ++checked;
  }
  EXPECT_GT(checked, 300u);
}

TEST(Simulate2d, SampleClock) {
  const auto trace = walk2d(-0.3, 2.0, 0, 0.4, 0, 0.4, 3, {}, 10);
  // 3 samples per 0.3 s step, plus the final one at the horizon.
  ASSERT_EQ(trace.samples.size(), 10u);
  EXPECT_DOUBLE_EQ(trace.samples[0].t, 0.0);
  EXPECT_NEAR(trace.samples[1].t, 0.1, 1e-15);
  EXPECT_NEAR(trace.samples.back().t, 0.9, 1e-12);
  for (std::size_t i = 1; i < trace.samples.size(); ++i) EXPECT_GT(trace.samples[i].t, trace.samples[i - 1].t);
}

TEST(Simulate2d, Deterministic) {
  const std::vector<PushEvent> pushes{{0.45, {0.3, 0}}, {1.0, {-0.2, 0}}};
  const auto a = walk2d(-0.3, 2.0, 0.1, 0.35, 0.1, 0.35, 40, pushes, 100);
  const auto b = walk2d(-0.3, 2.0, 0.1, 0.35, 0.1, 0.35, 40, pushes, 100);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].t, b.samples[i].t);
    EXPECT_EQ(a.samples[i].com, b.samples[i].com);
    EXPECT_EQ(a.samples[i].vel, b.samples[i].vel);
  }
  for (std::size_t i = 0; i < a.steps.size(); ++i) EXPECT_EQ(a.steps[i].footprint, b.steps[i].footprint);
}

TEST(Simulate2d, Preconditions) {
  EXPECT_THROW(walk2d(0, 0, 0, 0.3, 0, 0.3, 0), InvalidParameter);
  EXPECT_THROW(simulate_2d(planar_start(0, 0), {LegParams<double>{0, 0.3}, LegParams<double>{0, 0.3}}, 0.0, 5, {}, {},
                           kModel),
               InvalidParameter);
}

TEST(Pushes, MidStepChangesNextPlacement) {
  const double t_push = 0.45, dv = 0.5, a = 0.1, b = 0.35;
  const auto trace = walk2d(-0.3, 2.0, a, b, a, b, 4, {{t_push, {dv, 0}}});
  const auto& s1 = trace.steps[0];
  // Oracle: flow from the first touchdown to the push, add dv, flow to the next touchdown.
  const auto mid = oracle::flow(s1.rel_after.x(), s1.vel_after.x(), t_push - s1.time);
  const auto pre = oracle::flow(mid[0], mid[1] + dv, 2 * kT - t_push);
  EXPECT_NEAR(trace.steps[1].vel_before.x(), pre[1], 1e-12);
  EXPECT_NEAR(trace.steps[1].placement.x(), a + b * pre[1], 1e-12);
}

TEST(Pushes, DeadbeatRecoversInTwoTouchdowns) {
  for (double t_push : {0.1, 0.42, 0.75, 1.31}) {
    const auto trace = walk2d(-0.3, 2.0, 0, kGains.b_db, 0, kGains.b_db, 10, {{t_push, {0.5, 0}}});
    const auto next = static_cast<std::size_t>(std::floor(t_push / kT));  // first touchdown after the push
    EXPECT_GT(std::abs(trace.steps[next].vel_before.x()), 0.1);
    EXPECT_LT(std::abs(trace.steps[next + 1].vel_before.x()), 1e-9) << t_push;
  }
}

TEST(Pushes, AtTouchdownAppliesAfterExchange) {
  const auto plain = walk2d(-0.3, 2.0, 0, 0.4, 0, 0.4, 3);
  const double t1 = plain.steps[0].time;
  const auto pushed = walk2d(-0.3, 2.0, 0, 0.4, 0, 0.4, 3, {{t1, {0.25, 0}}});
  EXPECT_EQ(pushed.steps[0].vel_before, plain.steps[0].vel_before);
  EXPECT_EQ(pushed.steps[0].placement, plain.steps[0].placement);
  const auto pre = oracle::flow(plain.steps[0].rel_after.x(), plain.steps[0].vel_after.x() + 0.25, kT);
  EXPECT_NEAR(pushed.steps[1].vel_before.x(), pre[1], 1e-12);
}

TEST(Pushes, SameTimeKeepsInputOrderAndSums) {
  const auto a = walk2d(-0.3, 2.0, 0, 0.4, 0, 0.4, 3, {{0.2, {0.1, 0}}, {0.2, {0.3, 0}}});
  const auto b = walk2d(-0.3, 2.0, 0, 0.4, 0, 0.4, 3, {{0.2, {0.4, 0}}});
  EXPECT_NEAR(a.steps[2].vel_before.x(), b.steps[2].vel_before.x(), 1e-14);
}

TEST(Pushes, BeyondHorizonIgnoredWithWarning) {
  const auto plain = walk2d(-0.3, 2.0, 0, 0.4, 0, 0.4, 5);
  const auto late = walk2d(-0.3, 2.0, 0, 0.4, 0, 0.4, 5, {{10.0, {1.0, 0}}});
  ASSERT_EQ(late.warnings.size(), 1u);
  EXPECT_NE(late.warnings[0].find("10"), std::string::npos);
  EXPECT_EQ(late.steps.back().vel_before, plain.steps.back().vel_before);
  EXPECT_TRUE(plain.warnings.empty());
}

TEST(ReachLimit, FlagsWithoutHalting) {
  SimulationOptions opt;
  opt.reach_limit = 0.5;
  const auto trace = simulate_2d(planar_start(-0.3, 2.0), {LegParams<double>{0, 0.4278}, LegParams<double>{0, 0.4278}},
                                 kT, 6, {}, opt, kModel);
  ASSERT_EQ(trace.steps.size(), 6u);
  EXPECT_TRUE(trace.steps[0].infeasible);  // |x_f| ~ 0.82
  EXPECT_FALSE(trace.steps[3].infeasible);
}

TEST(StabilityEmpirics, DeviationScalesByLambda2) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> t(0.1, 0.6), frac(0.0, 1.0), v0(-3, 3);
  int inside = 0, outside = 0;
  while (inside < 200 || outside < 100) {
    const double period = t(rng);
    const auto g = special_b(step_constants(period, kModel), kModel);
    const double b = frac(rng) * 1.5 * g.b_max;
    const double l2 = eigenvalue_lambda2(b, step_constants(period, kModel), kModel);
    if (std::abs(std::abs(l2) - 1) < 1e-3) continue;
    const bool stable = b > g.b_min && b < g.b_max;
    if ((stable && inside >= 200) || (!stable && outside >= 100)) continue;
    (stable ? inside : outside)++;

    const double v = v0(rng);
    const auto trace = simulate_2d(planar_start(0.0, v), {LegParams<double>{0, b}, LegParams<double>{0, b}}, period,
                                   stable ? 50 : 12, {}, {}, kModel);
    const auto vel = touchdown_velocities(trace);
    for (std::size_t k = 1; k + 1 < vel.size(); ++k) {
      if (std::abs(vel[k]) < 1e-6) break;
      EXPECT_NEAR(vel[k + 1] / vel[k], l2, 1e-6);
      if (stable) EXPECT_LT(std::abs(vel[k + 1]), std::abs(vel[k]));
      else EXPECT_GT(std::abs(vel[k + 1]), std::abs(vel[k]));
    }
  }
}

TEST(Simulate3d, ZeroHeadingMatchesPlanarRunsExactly) {
  const double a_l = 0.2, a_w = 0.1, b = kGains.b_db;
  WorldState s3;
  s3.com = {0.05, -0.1};
  s3.vel = {0.3, 0.8};
  const auto t3 = walk3d(s3, {{0, {a_l, a_w, 0.0, b, kT}}}, 20, 50);

  SimulationOptions opt;
  opt.sample_rate = 50;
  const auto ty = simulate_2d(planar_start(-0.1, 0.8), {LegParams<double>{-a_l, b}, LegParams<double>{-a_l, b}}, kT,
                              20, {}, opt, kModel);
  const auto tx = simulate_2d(planar_start(0.05, 0.3), {LegParams<double>{-a_w, b}, LegParams<double>{a_w, b}}, kT,
                              20, {}, opt, kModel);
  ASSERT_EQ(t3.samples.size(), ty.samples.size());
  for (std::size_t i = 0; i < t3.steps.size(); ++i) {
    EXPECT_EQ(t3.steps[i].footprint.y(), ty.steps[i].footprint.x());
    EXPECT_EQ(t3.steps[i].footprint.x(), tx.steps[i].footprint.x());
    EXPECT_EQ(t3.steps[i].vel_before.y(), ty.steps[i].vel_before.x());
  }
  for (std::size_t i = 0; i < t3.samples.size(); ++i) {
    EXPECT_EQ(t3.samples[i].com.y(), ty.samples[i].com.x());
    EXPECT_EQ(t3.samples[i].com.x(), tx.samples[i].com.x());
  }
}

TEST(Simulate3d, NoLateralOffsetKeepsXAtZero) {
  const auto trace = walk3d(WorldState{}, {{0, {0.3, 0.0, 0.0, 0.35, kT}}}, 15, 40);
  for (const auto& s : trace.samples) {
    EXPECT_EQ(s.com.x(), 0.0);
    EXPECT_EQ(s.vel.x(), 0.0);
  }
}

TEST(Simulate3d, ConstantHeadingIsRotatedStraightWalk) {
  for (double deg : {30.0, 90.0, -135.0}) {
    const double th = deg * kDeg;
    WorldState s0;
    s0.com = {0.02, -0.05};
    s0.vel = {0.1, 0.6};
    WorldState sr = s0;
    sr.com = rot(th) * s0.com;
    sr.vel = rot(th) * s0.vel;
    const auto base = walk3d(s0, {{0, {0.25, 0.12, 0.0, 0.4, kT}}}, 20, 30);
    const auto turned = walk3d(sr, {{0, {0.25, 0.12, th, 0.4, kT}}}, 20, 30);
    for (std::size_t i = 0; i < base.steps.size(); ++i)
      EXPECT_LT((turned.steps[i].footprint - rot(th) * base.steps[i].footprint).norm(), 1e-9);
    for (std::size_t i = 0; i < base.samples.size(); ++i) {
      EXPECT_LT((turned.samples[i].com - rot(th) * base.samples[i].com).norm(), 1e-9);
      EXPECT_LT((turned.samples[i].vel - rot(th) * base.samples[i].vel).norm(), 1e-9);
    }
  }
}

TEST(Simulate3d, StepLengthProportionalToOffset) {
  const auto one = measure_gait(walk3d(WorldState{}, {{0, {0.2, 0.1, 0.0, kGains.b_db, kT}}}, 20));
  const auto two = measure_gait(walk3d(WorldState{}, {{0, {0.4, 0.1, 0.0, kGains.b_db, kT}}}, 20));
  const Eigen::Index last = one.step_lengths.size() - 1;
  EXPECT_GT(one.step_lengths(last), 0.0);
  EXPECT_NEAR(two.step_lengths(last), 2 * one.step_lengths(last), 1e-6);
  // Settled: length constant, width alternating with constant magnitude.
  EXPECT_NEAR(one.step_lengths(last), one.step_lengths(last - 1), 1e-9);
  EXPECT_NEAR(one.step_widths(last), -one.step_widths(last - 1), 1e-9);
  EXPECT_NEAR(std::abs(one.step_widths(last)), std::abs(two.step_widths(last)), 1e-9);
}

TEST(Simulate3d, ScheduleTakesEffectAtNamedStep) {
  const GaitSchedule schedule{{0, {0.2, 0.1, 0.0, kGains.b_db, kT}}, {4, {0.2, 0.1, 45 * kDeg, kGains.b_db, kT}}};
  const auto trace = walk3d(WorldState{}, schedule, 8);
  EXPECT_EQ(trace.steps[2].theta, 0.0);  // touchdown starting step 3
  EXPECT_DOUBLE_EQ(trace.steps[3].theta, 45 * kDeg);  // touchdown starting step 4
}

TEST(Simulate3d, PerEntryPeriod) {
  const GaitSchedule schedule{{0, {0.2, 0.1, 0.0, kGains.b_db, kT}}, {3, {0.2, 0.1, 0.0, kGains.b_db, 0.2}}};
  const auto trace = walk3d(WorldState{}, schedule, 6);
  EXPECT_NEAR(trace.steps[2].time, 0.9, 1e-12);                 // steps 0..2 last 0.3 s
  EXPECT_NEAR(trace.steps[3].time - trace.steps[2].time, 0.2, 1e-12);
  EXPECT_NEAR(horizon_of(schedule, 0.0, 0, 6), trace.steps.back().time, 1e-15);
}

TEST(Simulate3d, ScheduleValidation) {
  const Gait3DParams<double> g{0.2, 0.1, 0.0, 0.4, kT};
  EXPECT_THROW(walk3d(WorldState{}, {}, 5), InvalidParameter);
  EXPECT_THROW(walk3d(WorldState{}, {{1, g}}, 5), InvalidParameter);
  EXPECT_THROW(walk3d(WorldState{}, {{0, g}, {3, g}, {2, g}}, 5), InvalidParameter);
  EXPECT_THROW(walk3d(WorldState{}, {{0, g}, {2, g}, {2, g}}, 5), InvalidParameter);
  Gait3DParams<double> bad = g;
  bad.period = 0.0;
  EXPECT_THROW(walk3d(WorldState{}, {{0, bad}}, 5), InvalidParameter);
}

TEST(Simulate3d, CircleTurnsTenDegreesPerTwoSteps) {
  GaitSchedule schedule;
  for (int k = 0; k < 37; ++k) schedule.push_back({2L * k, {0.2, 0.1, 10.0 * k * kDeg, kGains.b_db, kT}});
  const auto m = measure_gait(walk3d(WorldState{}, schedule, 74));
  int checked = 0;
  for (Eigen::Index i = 6; i + 2 < m.headings.size() - 2; ++i) {
    EXPECT_NEAR((m.headings(i + 2) - m.headings(i)) / kDeg, 10.0, 0.5) << i;
    ++checked;
  }
  EXPECT_GT(checked, 50);
}

TEST(MeasureGait, InPlaceCase) {
  const auto m = measure_gait(walk2d(0, 0, 0.2, 0.3, -0.2, 0.3, 20));
  const Eigen::Index n = m.step_lengths.size();
  EXPECT_NEAR(std::abs(m.step_lengths(n - 1)), 0.69, 0.01);
  EXPECT_NEAR(m.step_lengths(n - 1) + m.step_lengths(n - 2), 0.0, 1e-6);
  EXPECT_EQ(m.step_widths.cwiseAbs().maxCoeff(), 0.0);
}

TEST(MeasureGait, EquilibriumIsZero) {
  const auto m = measure_gait(walk2d(0, 0, 0, 0.3, 0, 0.3, 6));
  EXPECT_EQ(m.step_lengths.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(m.step_widths.cwiseAbs().maxCoeff(), 0.0);
}

TEST(MeasureGait, NeedsThreeSteps) {
  EXPECT_THROW(measure_gait(walk2d(0, 0, 0.2, 0.3, 0.2, 0.3, 2)), InvalidParameter);
  EXPECT_NO_THROW(measure_gait(walk2d(0, 0, 0.2, 0.3, 0.2, 0.3, 3)));
}

TEST(MeasureGait, StepLengthIsNextMinusStance) {
  const auto trace = walk2d(0, 0, 0.2, 0.3, 0.2, 0.3, 20);
  const auto m = measure_gait(trace);
  const auto fp = trace.footprints();
  for (Eigen::Index i = 0; i < m.step_lengths.size(); ++i) {
    const auto k = static_cast<std::size_t>(m.step_index[static_cast<std::size_t>(i)]);
    EXPECT_DOUBLE_EQ(m.step_lengths(i), fp[k].x() - fp[k - 1].x());
  }
  EXPECT_NEAR(m.step_lengths(m.step_lengths.size() - 1), -0.348493633, 1e-6);
}

TEST(Walker, IrregularAdvanceMatchesBatch) {
  const GaitSchedule schedule{{0, {0.2, 0.1, 0.0, 0.4, kT}}, {5, {0.3, 0.1, 20 * kDeg, 0.4, kT}}};
  WorldState s0;
  s0.vel = {0.2, 0.5};
  const std::vector<PushEvent> pushes{{0.71, {0.2, -0.1}}};
  const auto batch = walk3d(s0, schedule, 10, 40, pushes);

  Walker w(kModel, s0, schedule);
  w.schedule_push(pushes[0]);
  for (std::size_t i = 1; i < batch.samples.size(); ++i) {
    const auto& ref = batch.samples[i];
    // Stop halfway first; the walker must not care how time is chopped up.
    w.advance_to(0.5 * (batch.samples[i - 1].t + ref.t));
    w.advance_to(ref.t);
    const auto s = w.state();
    EXPECT_EQ(s.step_index, ref.step_index) << i;
    EXPECT_LT((s.com - ref.com).norm(), 1e-12) << i;
    EXPECT_LT((s.vel - ref.vel).norm(), 1e-12) << i;
    EXPECT_EQ(s.stance, ref.stance) << i;
  }
  EXPECT_EQ(w.take_step_records().size(), 10u);
}

TEST(Walker, ScheduleGaitRejectsPastSteps) {
  Walker w(kModel, WorldState{}, GaitSchedule{{0, {0.2, 0.1, 0.0, 0.4, kT}}});
  w.advance_to(0.65);
  EXPECT_EQ(w.step_index(), 2);
  EXPECT_THROW(w.schedule_gait(2, {0.2, 0.1, 0.0, 0.4, kT}), InvalidParameter);
  w.schedule_gait(3, {0.2, 0.1, 1.0, 0.4, kT});
  EXPECT_EQ(w.gait_for_step(3).theta, 1.0);
  EXPECT_EQ(w.gait_for_step(2).theta, 0.0);
}
