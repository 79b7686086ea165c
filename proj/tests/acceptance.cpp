// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "lipwalk/scenario.hpp"
#include "oracle.hpp"

using namespace lipwalk;

namespace {

const ModelParams<double> kModel(10.0, 1.0);
constexpr double kDeg = std::numbers::pi / 180.0;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  // Records a failed check; only the first few are kept in the detail line.
  void check(bool ok, const std::string& what) {
    if (ok) return;
    if (pass || failures < 3) detail << (pass ? "" : "; ") << what;
    pass = false;
    ++failures;
  }
  int failures = 0;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

WorldState planar(double x0, double v0) {
  WorldState s;
  s.com.x() = x0;
  s.vel.x() = v0;
  return s;
}

std::vector<double> touchdown_velocities(double b, double period, long n, double x0 = -0.3, double v0 = 2.0) {
  const auto trace = simulate_2d(planar(x0, v0), {LegParams<double>{0, b}, LegParams<double>{0, b}}, period, n, {},
                                 {}, kModel);
  std::vector<double> v;
  for (const auto& s : trace.steps) v.push_back(s.vel_before.x());
  return v;
}

// Reference 4-decimal constants at T = 0.3.
void constants(Outcome& o) {
  const auto k = step_constants(0.3, kModel);
  const auto g = special_b(k, kModel);
  const std::pair<const char*, std::pair<double, double>> rows[] = {
      {"T_c", {kModel.tc(), 0.3162}}, {"b_min", {g.b_min, 0.1397}}, {"b_cp", {g.b_cp, 0.3162}},
      {"b_db", {g.b_db, 0.4278}},     {"b_max", {g.b_max, 0.7159}}};
  for (const auto& [name, vals] : rows)
    o.check(std::abs(vals.first - vals.second) <= 5e-5, std::string(name) + "=" + fmt(vals.first));
  if (o.pass)
    o.detail << "T_c=" << fmt(kModel.tc()) << " b_min=" << fmt(g.b_min) << " b_cp=" << fmt(g.b_cp)
             << " b_db=" << fmt(g.b_db) << " b_max=" << fmt(g.b_max);
}

// Reference step lengths of the four example gaits.
void gait_golden(Outcome& o) {
  const auto k = step_constants(0.3, kModel);
  const LegParams<double> base{0.2, 0.3};
  const auto c1 = period1_fixed_point(base, k, kModel).step_lengths;
  const auto c2 = period2_fixed_point(base, LegParams<double>{-0.2, 0.3}, k, kModel).step_lengths;
  const auto c3 = period2_fixed_point(base, LegParams<double>{0.4, 0.3}, k, kModel).step_lengths;
  const auto c4 = period2_fixed_point(base, LegParams<double>{-0.4, 0.3}, k, kModel).step_lengths;
  o.check(std::abs(c1(0) + 0.35) <= 0.01, "case1 d=" + fmt(c1(0)));
  o.check(std::abs(c2(0) - 0.69) <= 0.01 && std::abs(c2(1) + 0.69) <= 0.01, "case2 " + fmt(c2(0)) + "," + fmt(c2(1)));
  o.check(std::abs(c3(0) + 0.87) <= 0.01 && std::abs(c3(1) + 0.18) <= 0.01, "case3 " + fmt(c3(0)) + "," + fmt(c3(1)));
  o.check(std::abs(c4(0) - 1.2) <= 0.01 && std::abs(c4(1) + 0.86) <= 0.01, "case4 " + fmt(c4(0)) + "," + fmt(c4(1)));
  if (o.pass)
    o.detail << "d=" << fmt(c1(0)) << "; (" << fmt(c2(0)) << "," << fmt(c2(1)) << "); (" << fmt(c3(0)) << ","
             << fmt(c3(1)) << "); (" << fmt(c4(0)) << "," << fmt(c4(1)) << ")";
}

void special_gain_behaviours(Outcome& o) {
  const double period = 0.3;
  const auto g = special_b(step_constants(period, kModel), kModel);

  const auto vmin = touchdown_velocities(g.b_min, period, 20);
  for (std::size_t i = 1; i < vmin.size(); ++i)
    o.check(std::abs(std::abs(vmin[i]) - std::abs(vmin[0])) <= 1e-6, "b_min |v| drifts at " + std::to_string(i));

  // Oracle ratio e^(-T/T_c), evaluated in 50 digits.
  const double decay = static_cast<double>(exp(-oracle::Big(period) / oracle::hyper(period).tc));
  const auto vcp = touchdown_velocities(g.b_cp, period, 20);
  for (std::size_t i = 0; i + 1 < vcp.size(); ++i) {
    o.check(vcp[i + 1] > 0.0, "b_cp sign change at " + std::to_string(i + 1));
    o.check(std::abs(vcp[i + 1] / vcp[i] - decay) <= 1e-6, "b_cp ratio " + fmt(vcp[i + 1] / vcp[i]));
  }

  const auto vdb = touchdown_velocities(g.b_db, period, 20);
  for (std::size_t i = 1; i < vdb.size(); ++i)
    o.check(std::abs(vdb[i]) < 1e-9, "b_db |v|=" + fmt(vdb[i]) + " at touchdown " + std::to_string(i + 1));

  const double l2 = oracle::lambda2(0.5, period);
  const auto v05 = touchdown_velocities(0.5, period, 20);
  for (std::size_t i = 0; i + 1 < v05.size(); ++i) {
    o.check(v05[i + 1] * v05[i] < 0.0, "b=0.5 no sign change at " + std::to_string(i + 1));
    o.check(std::abs(std::abs(v05[i + 1] / v05[i]) - std::abs(l2)) <= 1e-6, "b=0.5 ratio " + fmt(v05[i + 1] / v05[i]));
  }

  const auto vmax = touchdown_velocities(g.b_max, period, 20);
  for (std::size_t i = 0; i + 1 < vmax.size(); ++i) {
    o.check(vmax[i + 1] * vmax[i] < 0.0, "b_max no sign change at " + std::to_string(i + 1));
    o.check(std::abs(std::abs(vmax[i + 1]) - std::abs(vmax[0])) <= 1e-6, "b_max |v| drifts");
  }
  if (o.pass)
    o.detail << "v1=" << fmt(vdb[0]) << " cp ratio=" << fmt(vcp[1] / vcp[0]) << " (e^-T/Tc=" << fmt(decay)
             << ") 0.5 ratio=" << fmt(v05[1] / v05[0]) << " (lambda2=" << fmt(l2) << ")";
}

void oracle_equivalence(Outcome& o) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> x(-1.0, 1.0), v(-3.0, 3.0), t(0.0, 0.5);
  double worst_flow = 0.0, worst_energy = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const PendulumState<double> q(x(rng), v(rng));
    const double dt = t(rng);
    const auto closed = flow(q, dt, kModel);
    const auto numeric = flow_numeric(q, dt, kModel, 1e-5);
    worst_flow = std::max(worst_flow, (closed - numeric).cwiseAbs().maxCoeff());
    const double e0 = orbital_energy(q, kModel);
    // Energy along the closed-form flow, checked at several instants.
    for (int k = 1; k <= 4; ++k)
      worst_energy = std::max(worst_energy, std::abs(orbital_energy(flow(q, dt * k / 4, kModel), kModel) - e0));
  }
  o.check(worst_flow <= 1e-6, "flow mismatch " + fmt(worst_flow));
  o.check(worst_energy <= 1e-9, "energy drift " + fmt(worst_energy));
  if (o.pass) o.detail << "max |closed-rk4|=" << fmt(worst_flow) << " max |dE|=" << fmt(worst_energy);
}

void return_map(Outcome& o) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> a(-0.5, 0.5), t(0.1, 0.6), frac(0.02, 0.98), s(-1.0, 1.0);
  double worst_jac = 0.0, worst_det = 0.0, worst_closure = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto k = step_constants(t(rng), kModel);
    const auto bounds = balance_bounds(k, kModel);
    const auto gain = [&] { return bounds.b_min + frac(rng) * (bounds.b_max - bounds.b_min); };
    const LegParams<double> l1{a(rng), gain()}, l2{a(rng), gain()};

    const auto jac = return_map_jacobian(l1, k, kModel);
    worst_det = std::max(worst_det, std::abs(jac.determinant()));
    for (int n = 0; n < 5; ++n) {
      const PendulumState<double> q(s(rng), 2 * s(rng));
      const double h = 1e-6;
      for (int col = 0; col < 2; ++col) {
        PendulumState<double> dq = PendulumState<double>::Zero();
        dq(col) = h;
        const PendulumState<double> fd = (poincare_map(PendulumState<double>(q + dq), l1, k, kModel) -
                                          poincare_map(PendulumState<double>(q - dq), l1, k, kModel)) /
                                         (2 * h);
        worst_jac = std::max(worst_jac, (fd - jac.col(col)).cwiseAbs().maxCoeff());
      }
    }

    const auto p1 = period1_fixed_point(l1, k, kModel);
    worst_closure = std::max(worst_closure, (poincare_map(p1.initial, l1, k, kModel) - p1.initial).cwiseAbs().maxCoeff());
    const auto p2 = period2_fixed_point(l1, l2, k, kModel);
    const auto twice = poincare_map(poincare_map(p2.initial, l1, k, kModel), l2, k, kModel);
    worst_closure = std::max(worst_closure, (twice - p2.initial).cwiseAbs().maxCoeff());
  }
  o.check(worst_jac <= 1e-6, "jacobian mismatch " + fmt(worst_jac));
  o.check(worst_det <= 1e-9, "det(J)=" + fmt(worst_det));
  o.check(worst_closure <= 1e-9, "closure " + fmt(worst_closure));
  if (o.pass)
    o.detail << "max |J-FD|=" << fmt(worst_jac) << " max |det J|=" << fmt(worst_det)
             << " max closure=" << fmt(worst_closure);
}

void stability_region(Outcome& o) {
  const int n = 50;
  int inside = 0, outside = 0, excluded = 0;
  double prev_width = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double period = 0.1 + 0.5 * i / (n - 1);
    const auto k = step_constants(period, kModel);
    const auto bounds = balance_bounds(k, kModel);
    const double width = bounds.b_max - bounds.b_min;
    o.check(width < prev_width, "width not decreasing at T=" + fmt(period));
    prev_width = width;
    for (int j = 0; j < n; ++j) {
      const double b = 1.0 * j / (n - 1);
      if (std::abs(std::abs(eigenvalue_lambda2(b, k, kModel)) - 1.0) < 1e-6) {
        ++excluded;
        continue;
      }
      const bool predicted = b > bounds.b_min && b < bounds.b_max;
      const auto v = touchdown_velocities(b, period, 50);
      const bool decays = std::abs(v.back()) < std::abs(v.front());
      const bool grows = std::abs(v.back()) > std::abs(v.front());
      (predicted ? inside : outside)++;
      if (predicted) o.check(decays, "T=" + fmt(period) + " b=" + fmt(b) + " predicted stable but does not decay");
      else o.check(grows, "T=" + fmt(period) + " b=" + fmt(b) + " predicted unstable but does not grow");
    }
  }
  if (o.pass) o.detail << inside << " stable, " << outside << " unstable, " << excluded << " boundary cells";
}

void structure_3d(Outcome& o) {
  const double b = special_b(step_constants(0.3, kModel), kModel).b_db;
  SimulationOptions opt;
  opt.sample_rate = 100;

  // Zero heading: the forward axis is the planar walker with a = -a_l.
  WorldState s3;
  s3.com = {0.0, -0.1};
  s3.vel = {0.0, 0.7};
  const auto t3 = simulate_3d(s3, {{0, {0.2, 0.0, 0.0, b, 0.3}}}, 20, {}, opt, kModel);
  const auto t2 = simulate_2d(planar(-0.1, 0.7), {LegParams<double>{-0.2, b}, LegParams<double>{-0.2, b}}, 0.3, 20,
                              {}, opt, kModel);
  bool exact = t3.samples.size() == t2.samples.size();
  for (std::size_t i = 0; exact && i < t3.samples.size(); ++i)
    exact = t3.samples[i].com.y() == t2.samples[i].com.x() && t3.samples[i].vel.y() == t2.samples[i].vel.x() &&
            t3.samples[i].com.x() == 0.0;
  for (std::size_t i = 0; exact && i < t3.steps.size(); ++i) exact = t3.steps[i].footprint.y() == t2.steps[i].footprint.x();
  o.check(exact, "theta=0 run differs from the planar run");

  // Constant heading equals the rotated straight walk.
  double worst = 0.0;
  for (double deg : {30.0, 90.0, 135.0, -60.0}) {
    const Eigen::Matrix2d r = heading_rotation(deg * kDeg);
    WorldState a, c;
    a.vel = {0.1, 0.5};
    c.vel = r * a.vel;
    const auto base = simulate_3d(a, {{0, {0.2, 0.1, 0.0, b, 0.3}}}, 20, {}, opt, kModel);
    const auto turned = simulate_3d(c, {{0, {0.2, 0.1, deg * kDeg, b, 0.3}}}, 20, {}, opt, kModel);
    for (std::size_t i = 0; i < base.samples.size(); ++i)
      worst = std::max(worst, (turned.samples[i].com - r * base.samples[i].com).cwiseAbs().maxCoeff());
    for (std::size_t i = 0; i < base.steps.size(); ++i)
      worst = std::max(worst, (turned.steps[i].footprint - r * base.steps[i].footprint).cwiseAbs().maxCoeff());
  }
  o.check(worst <= 1e-9, "rotated run off by " + fmt(worst));

  // Circle: +10 degrees every two steps.
  const auto cfg = load_scenario(std::string(LIPWALK_CONFIGS) + "/circle.json");
  const auto m = measure_gait(run_scenario(cfg));
  double worst_turn = 0.0;
  const Eigen::Index last = m.headings.size() - 2;
  for (Eigen::Index i = 6; i + 2 <= last; ++i)
    worst_turn = std::max(worst_turn, std::abs((m.headings(i + 2) - m.headings(i)) / kDeg - 10.0));
  o.check(worst_turn <= 0.5, "heading increment off by " + fmt(worst_turn) + " deg");
  if (o.pass)
    o.detail << "theta=0 exact, rotation err=" << fmt(worst) << ", turn err=" << fmt(worst_turn) << " deg";
}

void proportionality(Outcome& o) {
  const double b = special_b(step_constants(0.3, kModel), kModel).b_db;
  const auto settled = [&](double a_l) {
    const auto m = measure_gait(simulate_3d(WorldState{}, {{0, {a_l, 0.1, 0.0, b, 0.3}}}, 20, {}, {}, kModel));
    return m.step_lengths(m.step_lengths.size() - 1);
  };
  const double d1 = settled(0.2), d2 = settled(0.4);
  o.check(std::abs(d2 - 2 * d1) <= 1e-6, "d(0.4)=" + fmt(d2) + " vs 2*d(0.2)=" + fmt(2 * d1));
  if (o.pass) o.detail << "d(0.2)=" << fmt(d1) << " d(0.4)=" << fmt(d2);
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<void(Outcome&)>> criteria[] = {
      {"constants", constants},
      {"gait golden values", gait_golden},
      {"touchdown velocity behaviours", special_gain_behaviours},
      {"oracle equivalence", oracle_equivalence},
      {"return-map properties", return_map},
      {"stability region", stability_region},
      {"3D structure", structure_3d},
      {"step-length proportionality", proportionality},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      run(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s  %-30s %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", name, o.detail.str().c_str(), secs);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}
