#pragma once

// Multi-step walking on the LIP in a world frame. Touchdowns happen every step
// period, legs alternate with leg 1 swinging first, and the foot placement law
// runs only at touchdowns.

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "lipwalk/analysis.hpp"
#include "lipwalk/controller.hpp"
#include "lipwalk/lip.hpp"

namespace lipwalk {

enum class WalkMode { Planar, Spatial };

inline std::string_view to_string(WalkMode mode) { return mode == WalkMode::Planar ? "2d" : "3d"; }

/// World-frame snapshot. In planar mode only the x components are used.
struct WorldState {
  double time = 0.0;
  long step_index = 0;
  Eigen::Vector2d com = Eigen::Vector2d::Zero();
  Eigen::Vector2d vel = Eigen::Vector2d::Zero();
  Eigen::Vector2d stance = Eigen::Vector2d::Zero();
  /// Leg currently in stance. Starts at leg 2 so that leg 1 swings first.
  Leg stance_leg = Leg::Two;
};

/// Impulsive CoM velocity change (impulse over mass).
struct PushEvent {
  double at_time = 0.0;
  Eigen::Vector2d delta_v = Eigen::Vector2d::Zero();
};

/// Gait parameters that take over at the touchdown starting `from_step`
/// (step 0 is the initial, uncontrolled step).
struct ScheduledGait {
  long from_step = 0;
  Gait3DParams<double> gait;
};

struct StepRecord {
  /// Index of the step this touchdown starts (1 for the first touchdown).
  long index = 0;
  double time = 0.0;
  /// Swing leg that touched down and is now the stance leg.
  Leg leg = Leg::One;
  /// CoM minus stance foot, before and after the leg exchange.
  Eigen::Vector2d rel_before = Eigen::Vector2d::Zero();
  Eigen::Vector2d rel_after = Eigen::Vector2d::Zero();
  Eigen::Vector2d vel_before = Eigen::Vector2d::Zero();
  Eigen::Vector2d vel_after = Eigen::Vector2d::Zero();
  /// Foothold relative to the CoM, as returned by the controller.
  Eigen::Vector2d placement = Eigen::Vector2d::Zero();
  Eigen::Vector2d footprint = Eigen::Vector2d::Zero();
  /// Heading of the gait used for this placement (0 in planar mode).
  double theta = 0.0;
  /// Set when a reach limit is configured and |placement| exceeds it.
  bool infeasible = false;

  PendulumState<double> before(int axis) const { return {rel_before(axis), vel_before(axis)}; }
  PendulumState<double> after(int axis) const { return {rel_after(axis), vel_after(axis)}; }
};

struct Sample {
  double t = 0.0;
  long step_index = 0;
  Eigen::Vector2d com = Eigen::Vector2d::Zero();
  Eigen::Vector2d vel = Eigen::Vector2d::Zero();
  Eigen::Vector2d stance = Eigen::Vector2d::Zero();
  Leg stance_leg = Leg::Two;
};

struct WalkTrace {
  WalkMode mode = WalkMode::Planar;
  Eigen::Vector2d initial_stance = Eigen::Vector2d::Zero();
  std::vector<StepRecord> steps;
  std::vector<Sample> samples;
  std::vector<std::string> warnings;

  /// Initial stance foot followed by every touchdown footprint.
  std::vector<Eigen::Vector2d> footprints() const;
};

struct SimulationOptions {
  /// Dense samples per second; 0 disables dense sampling.
  double sample_rate = 0.0;
  /// Optional maximum |placement|; violations are flagged, never enforced.
  std::optional<double> reach_limit;
};

struct PlanarGait {
  std::array<LegParams<double>, 2> legs;
  double period = 0.0;
};

using GaitSchedule = std::vector<ScheduledGait>;

/// Incremental walking engine shared by the batch simulators and the live
/// session. Owns the dynamics state; not thread-safe.
class Walker {
 public:
  Walker(const ModelParams<double>& model, const WorldState& initial, PlanarGait gait,
         std::optional<double> reach_limit = std::nullopt);
  Walker(const ModelParams<double>& model, const WorldState& initial, GaitSchedule schedule,
         std::optional<double> reach_limit = std::nullopt);

  WalkMode mode() const { return mode_; }
  const ModelParams<double>& model() const { return model_; }

  /// State at the current time.
  WorldState state() const;
  double time() const { return time_; }
  long step_index() const { return step_index_; }
  double step_start_time() const { return step_start_; }
  double next_touchdown_time() const { return step_end_; }
  Eigen::Vector2d stance() const { return stance_; }

  /// Gait in force for step `step` (spatial mode only).
  const Gait3DParams<double>& gait_for_step(long step) const;
  const GaitSchedule& schedule() const { return schedule_; }
  /// Adds or replaces the schedule entry starting at `from_step`; the entry
  /// must not start at or before the current step.
  void schedule_gait(long from_step, const Gait3DParams<double>& gait);

  /// Queues a push; pushes at equal times keep insertion order and a push at a
  /// touchdown instant lands after the leg exchange.
  void schedule_push(const PushEvent& push);
  /// Adds `delta_v` to the CoM velocity at the current time.
  void apply_push_now(const Eigen::Vector2d& delta_v);

  /// Runs touchdowns and queued pushes with time <= t, then flows to t.
  void advance_to(double t);

  /// Dense-sample clock: samples sit at k / rate offsets inside each step, and
  /// each touchdown restarts the offsets.
  double next_sample_time(double rate) const;
  Sample advance_to_next_sample(double rate);

  /// Step records produced since the last call.
  std::vector<StepRecord> take_step_records();

 private:
  double period_of_step(long step) const;
  Eigen::Vector2d placement_for(const Eigen::Vector2d& vel, Leg leg, long step, double* theta) const;
  void flow_segment_to(double t, Eigen::Vector2d* rel, Eigen::Vector2d* vel) const;
  void rebase(double t);
  void touchdown();
  Sample sample() const;

  ModelParams<double> model_;
  WalkMode mode_;
  PlanarGait planar_{};
  GaitSchedule schedule_;
  std::optional<double> reach_limit_;

  // Segment start: last touchdown or push. Relative state flows from here.
  double segment_time_ = 0.0;
  Eigen::Vector2d segment_rel_ = Eigen::Vector2d::Zero();
  Eigen::Vector2d segment_vel_ = Eigen::Vector2d::Zero();

  double time_ = 0.0;
  Eigen::Vector2d stance_ = Eigen::Vector2d::Zero();
  Leg stance_leg_ = Leg::Two;
  long step_index_ = 0;
  double step_start_ = 0.0;
  double step_end_ = 0.0;
  long sample_k_ = 0;

  std::vector<PushEvent> pending_pushes_;
  std::vector<StepRecord> records_;
};

/// Time of the touchdown ending `n_steps` steps, accumulated like the walker does.
double horizon_of(const PlanarGait& gait, double start_time, long n_steps);
double horizon_of(const GaitSchedule& schedule, double start_time, long first_step, long n_steps);

void validate_schedule(const GaitSchedule& schedule);

WalkTrace simulate_2d(const WorldState& initial, const std::array<LegParams<double>, 2>& legs, double period,
                      long n_steps, const std::vector<PushEvent>& pushes, const SimulationOptions& options,
                      const ModelParams<double>& model);

WalkTrace simulate_3d(const WorldState& initial, const GaitSchedule& schedule, long n_steps,
                      const std::vector<PushEvent>& pushes, const SimulationOptions& options,
                      const ModelParams<double>& model);

/// Per-step gait geometry for touchdowns 2..n. Length and width decompose the
/// footprint displacement along and across the active heading; the heading is
/// measured from the two-step stride and unwrapped.
struct GaitMeasurement {
  std::vector<long> step_index;
  Eigen::VectorXd step_lengths;
  Eigen::VectorXd step_widths;
  Eigen::VectorXd headings;
};

GaitMeasurement measure_gait(const WalkTrace& trace);

}  // namespace lipwalk
