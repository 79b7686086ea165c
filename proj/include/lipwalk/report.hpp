#pragma once

// Output formats of the command-line tools: dense-sample CSV, per-step JSON
// summaries, stability and periodic-gait reports, and region-scan grids.

#include <optional>
#include <ostream>
#include <string>

#include <json.hpp>

#include "lipwalk/analysis.hpp"
#include "lipwalk/simulator.hpp"

namespace lipwalk {

/// Header of the dense-sample CSV, in column order.
inline constexpr const char* kSamplesCsvHeader = "t,com_x,com_y,vx,vy,stance_x,stance_y,stance_leg,step_index";
inline constexpr const char* kRegionCsvHeader = "T,b,lambda2,regime";
inline constexpr const char* kCurvesCsvHeader = "T,b_min,b_cp,b_db,b_max";

/// Shortest decimal form that round-trips to the same double.
std::string format_number(double value);

void write_samples_csv(std::ostream& out, const WalkTrace& trace);

/// Per-step records, gait measurement (when at least 3 steps) and warnings.
nlohmann::json summary_json(const WalkTrace& trace);

nlohmann::json stability_json(double period, const ModelParams<double>& model, std::optional<double> b);
std::string stability_text(double period, const ModelParams<double>& model, std::optional<double> b);

struct GaitQuery {
  LegParams<double> leg1;
  std::optional<LegParams<double>> leg2;  // period-2 gait when set
  double period = 0.3;
};

nlohmann::json gait_json(const GaitQuery& query, const ModelParams<double>& model);
std::string gait_text(const GaitQuery& query, const ModelParams<double>& model);

void write_region_csv(std::ostream& out, const RegionScan<double>& scan);
void write_curves_csv(std::ostream& out, const RegionScan<double>& scan);

}  // namespace lipwalk
