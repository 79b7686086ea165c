#include "lipwalk/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace lipwalk {

using nlohmann::json;

namespace {

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  // Avoid printing "-0.0000" for tiny negatives.
  if (std::string(buf) == "-0.0000") return "0.0000";
  return buf;
}

json vec(const Eigen::Vector2d& v) { return json::array({v.x(), v.y()}); }

}  // namespace

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

void write_samples_csv(std::ostream& out, const WalkTrace& trace) {
  out << kSamplesCsvHeader << '\n';
  for (const auto& s : trace.samples) {
    out << format_number(s.t) << ',' << format_number(s.com.x()) << ',' << format_number(s.com.y()) << ','
        << format_number(s.vel.x()) << ',' << format_number(s.vel.y()) << ',' << format_number(s.stance.x())
        << ',' << format_number(s.stance.y()) << ',' << static_cast<int>(s.stance_leg) << ',' << s.step_index
        << '\n';
  }
}

json summary_json(const WalkTrace& trace) {
  json j;
  j["mode"] = std::string(to_string(trace.mode));
  j["n_steps"] = trace.steps.size();
  j["initial_stance"] = vec(trace.initial_stance);

  json steps = json::array();
  for (const auto& s : trace.steps) {
    steps.push_back({{"index", s.index},
                     {"time", s.time},
                     {"leg", static_cast<int>(s.leg)},
                     {"rel_before", vec(s.rel_before)},
                     {"vel_before", vec(s.vel_before)},
                     {"rel_after", vec(s.rel_after)},
                     {"vel_after", vec(s.vel_after)},
                     {"touchdown_velocity", trace.mode == WalkMode::Planar ? json(s.vel_before.x())
                                                                           : vec(s.vel_before)},
                     {"placement", vec(s.placement)},
                     {"footprint", vec(s.footprint)},
                     {"theta_deg", s.theta * 180.0 / std::numbers::pi},
                     {"infeasible", s.infeasible}});
  }
  j["steps"] = std::move(steps);

  if (trace.steps.size() >= 3) {
    const auto m = measure_gait(trace);
    json g;
    g["step_index"] = m.step_index;
    g["step_lengths"] = std::vector<double>(m.step_lengths.data(), m.step_lengths.data() + m.step_lengths.size());
    g["step_widths"] = std::vector<double>(m.step_widths.data(), m.step_widths.data() + m.step_widths.size());
    std::vector<double> headings_deg;
    for (Eigen::Index i = 0; i < m.headings.size(); ++i) headings_deg.push_back(m.headings(i) * 180.0 / std::numbers::pi);
    g["headings_deg"] = headings_deg;
    j["gait"] = std::move(g);
  } else {
    j["gait"] = nullptr;
  }
  j["warnings"] = trace.warnings;
  return j;
}

json stability_json(double period, const ModelParams<double>& model, std::optional<double> b) {
  const auto consts = step_constants(period, model);
  const auto g = special_b(consts, model);
  json j = {{"T", period},     {"g", model.g()},   {"h", model.h()},   {"t_c", model.tc()},
            {"b_min", g.b_min}, {"b_cp", g.b_cp}, {"b_db", g.b_db}, {"b_max", g.b_max}};
  if (b) {
    const double l2 = eigenvalue_lambda2(*b, consts, model);
    j["b"] = *b;
    j["lambda2"] = l2;
    j["regime"] = std::string(to_string(classify_lambda2(l2)));
  }
  return j;
}

std::string stability_text(double period, const ModelParams<double>& model, std::optional<double> b) {
  const json j = stability_json(period, model, b);
  std::ostringstream out;
  out << "T     = " << fixed4(period) << " s  (g = " << fixed4(model.g()) << ", h = " << fixed4(model.h()) << ")\n"
      << "T_c   = " << fixed4(j["t_c"]) << '\n'
      << "b_min = " << fixed4(j["b_min"]) << '\n'
      << "b_cp  = " << fixed4(j["b_cp"]) << '\n'
      << "b_db  = " << fixed4(j["b_db"]) << '\n'
      << "b_max = " << fixed4(j["b_max"]) << '\n';
  if (b) {
    out << "b     = " << fixed4(*b) << '\n'
        << "lambda2 = " << fixed4(j["lambda2"]) << '\n'
        << "regime  = " << j["regime"].get<std::string>() << '\n';
  }
  return out.str();
}

json gait_json(const GaitQuery& q, const ModelParams<double>& model) {
  const auto consts = step_constants(q.period, model);
  json j = {{"T", q.period}, {"g", model.g()}, {"h", model.h()}};
  j["leg1"] = {{"a", q.leg1.a}, {"b", q.leg1.b}};

  FixedPointSolution<double> sol;
  if (q.leg2) {
    j["leg2"] = {{"a", q.leg2->a}, {"b", q.leg2->b}};
    sol = period2_fixed_point(q.leg1, *q.leg2, consts, model);
  } else {
    sol = period1_fixed_point(q.leg1, consts, model);
  }
  j["period_count"] = sol.period_count;
  j["x0"] = sol.initial.x();
  j["v0"] = sol.initial.v();
  j["step_lengths"] = std::vector<double>(sol.step_lengths.data(), sol.step_lengths.data() + sol.step_lengths.size());

  const double l1 = eigenvalue_lambda2(q.leg1, consts, model);
  j["lambda2"] = l1;
  j["regime"] = std::string(to_string(classify_lambda2(l1)));
  if (q.leg2) {
    const double l2 = eigenvalue_lambda2(*q.leg2, consts, model);
    j["lambda2_leg2"] = l2;
    j["regime_leg2"] = std::string(to_string(classify_lambda2(l2)));
    // The two-step map is rank one; its nonzero eigenvalue is the product.
    j["cycle_multiplier"] = l1 * l2;
  }
  double progress = 0.0;
  for (Eigen::Index i = 0; i < sol.step_lengths.size(); ++i) progress += sol.step_lengths(i);
  j["in_place"] = std::abs(progress) < 1e-12;
  return j;
}

std::string gait_text(const GaitQuery& q, const ModelParams<double>& model) {
  const json j = gait_json(q, model);
  std::ostringstream out;
  const int count = j["period_count"];
  out << "period-" << count << " gait (T = " << fixed4(q.period) << ")\n"
      << "x0 = " << fixed4(j["x0"]) << ", v0 = " << fixed4(j["v0"]) << '\n';
  const auto d = j["step_lengths"].get<std::vector<double>>();
  bool all_zero = true;
  for (double v : d) all_zero = all_zero && std::abs(v) < 1e-12;
  if (all_zero) {
    out << "step in-place, d=0\n";
  } else if (count == 1) {
    out << "d = " << fixed4(d[0]) << '\n';
  } else {
    out << "d1 = " << fixed4(d[0]) << ", d2 = " << fixed4(d[1]) << '\n';
    if (j["in_place"].get<bool>()) out << "in-place gait (d1 + d2 = 0)\n";
  }
  out << "lambda2 = " << fixed4(j["lambda2"]) << " (" << j["regime"].get<std::string>() << ")\n";
  if (q.leg2) {
    out << "lambda2 leg 2 = " << fixed4(j["lambda2_leg2"]) << " (" << j["regime_leg2"].get<std::string>() << ")\n"
        << "cycle multiplier = " << fixed4(j["cycle_multiplier"]) << '\n';
  }
  return out.str();
}

void write_region_csv(std::ostream& out, const RegionScan<double>& scan) {
  out << kRegionCsvHeader << '\n';
  for (Eigen::Index i = 0; i < scan.periods.size(); ++i)
    for (Eigen::Index j = 0; j < scan.gains.size(); ++j)
      out << format_number(scan.periods(i)) << ',' << format_number(scan.gains(j)) << ','
          << format_number(scan.lambda2(i, j)) << ',' << to_string(scan.regime(i, j)) << '\n';
}

void write_curves_csv(std::ostream& out, const RegionScan<double>& scan) {
  out << kCurvesCsvHeader << '\n';
  for (Eigen::Index i = 0; i < scan.periods.size(); ++i)
    out << format_number(scan.periods(i)) << ',' << format_number(scan.curves(i, 0)) << ','
        << format_number(scan.curves(i, 1)) << ',' << format_number(scan.curves(i, 2)) << ','
        << format_number(scan.curves(i, 3)) << '\n';
}

}  // namespace lipwalk
