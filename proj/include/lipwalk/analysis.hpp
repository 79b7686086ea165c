#pragma once

// Step-to-step analysis of linear foot placement on the LIP: the touchdown
// return map, its Jacobian and nontrivial eigenvalue, the stabilizing gain
// interval and the periodic gaits the map converges to.

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "lipwalk/controller.hpp"
#include "lipwalk/lip.hpp"

namespace lipwalk {

/// Tolerance on lambda2 when deciding the neutral and dead-beat boundaries.
inline constexpr double kRegimeTolerance = 1e-9;
/// Tolerance on zero denominators of the periodic-gait solvers.
inline constexpr double kDegenerateTolerance = 1e-12;

enum class Regime {
  DivergentLow,   // lambda2 > 1, b < b_min
  NeutralLower,   // lambda2 == 1
  Overdamped,     // 0 < lambda2 < 1, monotone decay
  Deadbeat,       // lambda2 == 0
  Underdamped,    // -1 < lambda2 < 0, alternating decay
  NeutralUpper,   // lambda2 == -1
  DivergentHigh,  // lambda2 < -1, b > b_max
};

inline std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::DivergentLow: return "divergent_low";
    case Regime::NeutralLower: return "neutral_lower";
    case Regime::Overdamped: return "overdamped";
    case Regime::Deadbeat: return "deadbeat";
    case Regime::Underdamped: return "underdamped";
    case Regime::NeutralUpper: return "neutral_upper";
    case Regime::DivergentHigh: return "divergent_high";
  }
  return "unknown";
}

inline bool is_stable(Regime regime) {
  return regime == Regime::Overdamped || regime == Regime::Deadbeat || regime == Regime::Underdamped;
}

template <typename Scalar = double>
struct GainBounds {
  Scalar b_min;
  Scalar b_max;
};

template <typename Scalar = double>
struct SpecialGains {
  Scalar b_min;
  Scalar b_cp;
  Scalar b_db;
  Scalar b_max;
};

template <typename Scalar = double>
struct StabilityReport {
  Scalar b_min;
  Scalar b_max;
  Scalar b_db;
  Scalar b_cp;
  Scalar lambda2;
  Regime regime;
};

template <typename Scalar = double>
using ReturnMapJacobian = Matrix2<Scalar>;

/// Touchdown state of a periodic gait, repeating every `period_count` steps,
/// and the step lengths (next foothold minus stance foot) of one cycle.
template <typename Scalar = double>
struct FixedPointSolution {
  PendulumState<Scalar> initial;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, 2, 1> step_lengths;
  int period_count = 1;
};

namespace detail {

template <typename Scalar>
void require_positive_period(const StepConstants<Scalar>& consts) {
  if (!(consts.period > Scalar(0)) || !(consts.s_t > Scalar(0)))
    throw DegeneratePeriod("step period must be > 0 (sinh(T/T_c) vanishes)");
}

}  // namespace detail

/// State just before the swing foot touches down, one period after `q0`.
template <typename Scalar>
PendulumState<Scalar> touchdown_state(const PendulumState<Scalar>& q0, const StepConstants<Scalar>& consts,
                                      const ModelParams<Scalar>& model) {
  const Scalar& tc = model.tc();
  return PendulumState<Scalar>(q0.x() * consts.c_t + tc * q0.v() * consts.s_t,
                               q0.x() * consts.s_t / tc + q0.v() * consts.c_t);
}

/// Instantaneous leg exchange: velocity is continuous and the CoM sits at
/// -x_f relative to the new stance foot.
template <typename Scalar>
PendulumState<Scalar> apply_transition(const PendulumState<Scalar>& q_minus, const FootPlacement<Scalar>& placement) {
  return PendulumState<Scalar>(-placement(0), q_minus.v());
}

template <typename Scalar>
PendulumState<Scalar> poincare_map(const PendulumState<Scalar>& q, const LegParams<Scalar>& leg,
                                   const StepConstants<Scalar>& consts, const ModelParams<Scalar>& model) {
  const PendulumState<Scalar> before = touchdown_state(q, consts, model);
  return apply_transition(before, lfpc_2d(before.v(), leg));
}

/// Analytic Jacobian of `poincare_map`; it does not depend on the state.
template <typename Scalar>
ReturnMapJacobian<Scalar> return_map_jacobian(const LegParams<Scalar>& leg, const StepConstants<Scalar>& consts,
                                              const ModelParams<Scalar>& model) {
  const Scalar& tc = model.tc();
  ReturnMapJacobian<Scalar> j;
  j << -leg.b * consts.s_t / tc, -leg.b * consts.c_t,
       consts.s_t / tc, consts.c_t;
  return j;
}

/// The nontrivial eigenvalue of the return map (the other one is 0).
template <typename Scalar>
Scalar eigenvalue_lambda2(const LegParams<Scalar>& leg, const StepConstants<Scalar>& consts,
                          const ModelParams<Scalar>& model) {
  return consts.c_t - leg.b * consts.s_t / model.tc();
}

template <typename Scalar>
Scalar eigenvalue_lambda2(const Scalar& b, const StepConstants<Scalar>& consts, const ModelParams<Scalar>& model) {
  return eigenvalue_lambda2(LegParams<Scalar>{Scalar(0), b}, consts, model);
}

/// Open interval of gains b with |lambda2| < 1.
template <typename Scalar>
GainBounds<Scalar> balance_bounds(const StepConstants<Scalar>& consts, const ModelParams<Scalar>& model) {
  detail::require_positive_period(consts);
  const Scalar& tc = model.tc();
  return {tc * (consts.c_t - Scalar(1)) / consts.s_t, tc * (consts.c_t + Scalar(1)) / consts.s_t};
}

template <typename Scalar>
SpecialGains<Scalar> special_b(const StepConstants<Scalar>& consts, const ModelParams<Scalar>& model) {
  const auto bounds = balance_bounds(consts, model);
  const Scalar& tc = model.tc();
  return {bounds.b_min, tc, tc * consts.c_t / consts.s_t, bounds.b_max};
}

template <typename Scalar>
Regime classify_lambda2(const Scalar& lambda2) {
  using std::abs;
  const Scalar tol(kRegimeTolerance);
  if (abs(lambda2 - Scalar(1)) <= tol) return Regime::NeutralLower;
  if (abs(lambda2 + Scalar(1)) <= tol) return Regime::NeutralUpper;
  if (abs(lambda2) <= tol) return Regime::Deadbeat;
  if (lambda2 > Scalar(1)) return Regime::DivergentLow;
  if (lambda2 < Scalar(-1)) return Regime::DivergentHigh;
  return lambda2 > Scalar(0) ? Regime::Overdamped : Regime::Underdamped;
}

template <typename Scalar>
Regime classify_regime(const Scalar& b, const StepConstants<Scalar>& consts, const ModelParams<Scalar>& model) {
  detail::require_positive_period(consts);
  return classify_lambda2(eigenvalue_lambda2(b, consts, model));
}

template <typename Scalar>
StabilityReport<Scalar> stability_report(const Scalar& b, const StepConstants<Scalar>& consts,
                                         const ModelParams<Scalar>& model) {
  const auto gains = special_b(consts, model);
  const Scalar lambda2 = eigenvalue_lambda2(b, consts, model);
  return {gains.b_min, gains.b_max, gains.b_db, gains.b_cp, lambda2, classify_lambda2(lambda2)};
}

/// Period-1 gait of identical legs: the fixed point of `poincare_map` and its
/// step length d = -2 x0.
template <typename Scalar>
FixedPointSolution<Scalar> period1_fixed_point(const LegParams<Scalar>& leg, const StepConstants<Scalar>& consts,
                                               const ModelParams<Scalar>& model) {
  using std::abs;
  const Scalar& tc = model.tc();
  const Scalar den = tc - tc * consts.c_t + leg.b * consts.s_t;
  // den / s_T = b - b_min
  if (!(consts.s_t > Scalar(0)) || abs(den / consts.s_t) <= Scalar(kDegenerateTolerance))
    throw NoIsolatedFixedPoint("b_min", "no isolated period-1 gait: b equals b_min (lambda2 = 1)");

  FixedPointSolution<Scalar> sol;
  sol.initial = PendulumState<Scalar>(leg.a * tc * (consts.c_t - Scalar(1)) / den, -leg.a * consts.s_t / den);
  sol.step_lengths.resize(1);
  sol.step_lengths(0) = Scalar(-2) * sol.initial.x();
  sol.period_count = 1;
  return sol;
}

/// Period-2 gait with leg 1 swinging first. Step lengths are taken from the
/// pre-touchdown positions of the two steps of one cycle.
template <typename Scalar>
FixedPointSolution<Scalar> period2_fixed_point(const LegParams<Scalar>& leg1, const LegParams<Scalar>& leg2,
                                               const StepConstants<Scalar>& consts,
                                               const ModelParams<Scalar>& model) {
  using std::abs;
  const Scalar& tc = model.tc();
  const Scalar& s = consts.s_t;
  const Scalar& c = consts.c_t;
  const Scalar& a1 = leg1.a;
  const Scalar& a2 = leg2.a;
  const Scalar& b1 = leg1.b;
  const Scalar& b2 = leg2.b;

  const Scalar den = tc * tc - tc * tc * c * c + tc * b1 * c * s + tc * b2 * c * s - b1 * b2 * s * s;
  if (abs(den) <= Scalar(kDegenerateTolerance))
    throw NoIsolatedFixedPoint("period2", "no isolated period-2 gait: the two-step map has a unit eigenvalue");

  const Scalar x0 = -tc * (tc * a2 - a1 * b2 * s - tc * a2 * c * c + a2 * b1 * c * s) / den;
  const Scalar v0 = -(tc * a1 * s + tc * a2 * c * s - a2 * b1 * s * s) / den;

  const PendulumState<Scalar> q0(x0, v0);
  const PendulumState<Scalar> pre1 = touchdown_state(q0, consts, model);
  const PendulumState<Scalar> q1 = apply_transition(pre1, lfpc_2d(pre1.v(), leg1));
  const PendulumState<Scalar> pre2 = touchdown_state(q1, consts, model);
  const PendulumState<Scalar> q2 = apply_transition(pre2, lfpc_2d(pre2.v(), leg2));

  FixedPointSolution<Scalar> sol;
  sol.initial = q0;
  sol.step_lengths.resize(2);
  sol.step_lengths << pre1.x() - q1.x(), pre2.x() - q2.x();
  sol.period_count = 2;
  return sol;
}

/// Step lengths (d1, -d1) of the in-place gait a1 = a, a2 = -a, equal gains.
template <typename Scalar>
Vector2<Scalar> inplace_step_length(const Scalar& a, const Scalar& b, const StepConstants<Scalar>& consts,
                                    const ModelParams<Scalar>& model) {
  using std::abs;
  const Scalar& tc = model.tc();
  const Scalar den = tc + tc * consts.c_t - b * consts.s_t;
  // den / s_T = b_max - b
  if (consts.s_t > Scalar(0) && abs(den / consts.s_t) <= Scalar(kDegenerateTolerance))
    throw NoIsolatedFixedPoint("b_max", "no isolated in-place gait: b equals b_max (lambda2 = -1)");
  const Scalar d1 = Scalar(2) * tc * a * (consts.c_t + Scalar(1)) / den;
  return Vector2<Scalar>(d1, -d1);
}

template <typename Scalar = double>
struct Interval {
  Scalar lo;
  Scalar hi;
};

/// lambda2 and regime over a (period, gain) grid, row-major by period, plus
/// the special-gain curves sampled at each period.
template <typename Scalar = double>
struct RegionScan {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> periods;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gains;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> lambda2;  // periods x gains
  std::vector<Regime> regimes;                                    // row-major, periods x gains
  /// Columns: b_min, b_cp, b_db, b_max.
  Eigen::Matrix<Scalar, Eigen::Dynamic, 4> curves;

  Regime regime(Eigen::Index i, Eigen::Index j) const {
    return regimes[static_cast<std::size_t>(i * gains.size() + j)];
  }
};

template <typename Scalar>
RegionScan<Scalar> region_scan(const Interval<Scalar>& period_range, const Interval<Scalar>& gain_range,
                               Eigen::Index period_points, Eigen::Index gain_points,
                               const ModelParams<Scalar>& model) {
  if (!(period_range.lo > Scalar(0)) || !(period_range.hi > period_range.lo))
    throw InvalidParameter("period range must satisfy 0 < lo < hi");
  if (!(gain_range.hi > gain_range.lo)) throw InvalidParameter("gain range must satisfy lo < hi");
  if (period_points < 2 || gain_points < 2) throw InvalidParameter("grid resolution must be >= 2 per axis");

  RegionScan<Scalar> scan;
  scan.periods = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::LinSpaced(period_points, period_range.lo, period_range.hi);
  scan.gains = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::LinSpaced(gain_points, gain_range.lo, gain_range.hi);
  scan.lambda2.resize(period_points, gain_points);
  scan.curves.resize(period_points, 4);
  scan.regimes.reserve(static_cast<std::size_t>(period_points * gain_points));

  for (Eigen::Index i = 0; i < period_points; ++i) {
    const auto consts = step_constants(scan.periods(i), model);
    const auto g = special_b(consts, model);
    scan.curves.row(i) << g.b_min, g.b_cp, g.b_db, g.b_max;
    for (Eigen::Index j = 0; j < gain_points; ++j) {
      const Scalar l2 = eigenvalue_lambda2(scan.gains(j), consts, model);
      scan.lambda2(i, j) = l2;
      scan.regimes.push_back(classify_lambda2(l2));
    }
  }
  return scan;
}

}  // namespace lipwalk
