#pragma once

// JSON scenario files for the command-line front end. Angles are in degrees
// here and nowhere else.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lipwalk/simulator.hpp"

namespace lipwalk {

/// Invalid scenario file. Carries the 1-based line of the offending value
/// (0 when unknown) and its JSON pointer.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::size_t line, std::string pointer, const std::string& message);

  std::size_t line() const noexcept { return line_; }
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::size_t line_;
  std::string pointer_;
};

/// A gain given either as a number or by name: "b_min", "b_cp", "b_db", "b_max".
using GainSpec = std::variant<double, std::string>;

double resolve_gain(const GainSpec& gain, double period, const ModelParams<double>& model);

struct LegConfig {
  double a = 0.0;
  GainSpec b = 0.0;
};

struct GaitConfig {
  long from_step = 0;
  double a_l = 0.0;
  double a_w = 0.0;
  double theta_deg = 0.0;
  GainSpec b = std::string("b_db");
  /// Falls back to the scenario period when absent.
  std::optional<double> period;
};

struct PushConfig {
  double at_time = 0.0;
  Eigen::Vector2d delta_v = Eigen::Vector2d::Zero();
};

/// Pushes drawn uniformly over the horizon from the --seed generator.
struct RandomPushConfig {
  int count = 0;
  double max_dv = 0.0;
};

struct OutputConfig {
  std::string samples_csv = "samples.csv";
  std::string summary_json = "summary.json";
};

struct ScenarioConfig {
  double g = 10.0;
  double h = 1.0;
  WalkMode mode = WalkMode::Planar;
  double period = 0.3;
  long n_steps = 20;
  WorldState initial;
  std::array<LegConfig, 2> legs;
  std::vector<GaitConfig> gait_schedule;
  std::vector<PushConfig> pushes;
  std::optional<RandomPushConfig> random_pushes;
  double sample_rate = 100.0;
  std::optional<double> reach_limit;
  OutputConfig output;
};

/// Parses and validates a scenario. Throws ConfigError on syntax errors,
/// unknown fields, wrong types or violated preconditions.
ScenarioConfig parse_scenario(std::string_view text);
ScenarioConfig load_scenario(const std::string& path);

nlohmann::json to_json(const ScenarioConfig& config);
std::string serialize(const ScenarioConfig& config);

ModelParams<double> model_of(const ScenarioConfig& config);
GaitSchedule resolve_schedule(const ScenarioConfig& config);
std::vector<PushEvent> resolve_pushes(const ScenarioConfig& config, std::uint64_t seed);

WalkTrace run_scenario(const ScenarioConfig& config, std::uint64_t seed = 0);

}  // namespace lipwalk
