#pragma once

// Live steering session: a single sequential executor that owns a 3D walker,
// applies steering commands at tick boundaries and produces snapshots. The
// transport lives in ws_server.hpp; this layer has no I/O and no clock.

#include <cstddef>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "lipwalk/simulator.hpp"

namespace lipwalk {

inline constexpr const char* kProtocolVersion = "1";

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Steering knobs as they travel on the wire (heading in degrees).
struct GaitCommand {
  double a_l = 0.0;
  double a_w = 0.0;
  double theta_deg = 0.0;
  double b = 0.0;
  double T = 0.3;
};

Gait3DParams<double> to_gait(const GaitCommand& g);
GaitCommand to_command(const Gait3DParams<double>& g);

struct SetGait {
  GaitCommand gait;
};
struct Push {
  double dvx = 0.0;
  double dvy = 0.0;
};
struct Run {
  double speed = 1.0;
};
struct Pause {};
struct StepOnce {};
struct Reset {
  WorldState initial;
};

using SessionCommand = std::variant<SetGait, Push, Run, Pause, StepOnce, Reset>;

/// Parses one JSON line. Throws ProtocolError with a readable reason.
SessionCommand parse_command(std::string_view line);
nlohmann::json command_to_json(const SessionCommand& command);

enum class SessionEvent { None, Touchdown, Push, GaitChange, Reset };

std::string_view to_string(SessionEvent event);

struct SessionUpdate {
  /// Seconds since the session started; filled in by the transport.
  double wall_time = 0.0;
  double t = 0.0;
  long step_index = 0;
  Eigen::Vector2d com = Eigen::Vector2d::Zero();
  Eigen::Vector2d vel = Eigen::Vector2d::Zero();
  Eigen::Vector2d stance_foot = Eigen::Vector2d::Zero();
  Leg stance_leg = Leg::Two;
  GaitCommand gait;
  std::optional<GaitCommand> pending_gait;
  SessionEvent last_event = SessionEvent::None;
  /// Newest last, at most the configured cap.
  std::vector<Eigen::Vector2d> footprints;
};

nlohmann::json to_json(const SessionUpdate& update, bool include_wall_time = true);

struct SessionOptions {
  double tick_rate = 60.0;
  std::size_t footprint_cap = 64;
};

class Session {
 public:
  Session(const ModelParams<double>& model, const GaitCommand& gait, const WorldState& initial,
          const SessionOptions& options = {});

  /// First message on every connection: protocol version, model, tick rate
  /// and the special gains for the current step period.
  nlohmann::json handshake() const;

  /// Applies commands in order at the current tick boundary. Every StepOnce
  /// advances one tick and yields an update; other state changes yield one
  /// trailing update.
  std::vector<SessionUpdate> apply(const std::vector<SessionCommand>& commands);

  /// One paced tick while running: advances to the next sample time.
  std::optional<SessionUpdate> tick();

  bool running() const { return running_; }
  double speed() const { return speed_; }
  double tick_rate() const { return options_.tick_rate; }

  SessionUpdate snapshot() const;
  WorldState state() const { return walker_.state(); }

  /// Everything needed to replay the session through simulate_3d since the
  /// last reset: the initial state, the gait schedule and the applied pushes.
  const WorldState& initial_state() const { return initial_; }
  const GaitSchedule& schedule() const { return walker_.schedule(); }
  const std::vector<PushEvent>& push_log() const { return push_log_; }

 private:
  SessionUpdate advance();
  void reset(const WorldState& initial);
  void collect_footprints();
  void note(SessionEvent event) { last_event_ = event; }

  ModelParams<double> model_;
  SessionOptions options_;
  GaitCommand latest_gait_;
  std::optional<GaitCommand> pending_;
  WorldState initial_;
  Walker walker_;
  std::deque<Eigen::Vector2d> footprints_;
  std::vector<PushEvent> push_log_;
  bool running_ = false;
  double speed_ = 1.0;
  SessionEvent last_event_ = SessionEvent::None;
};

}  // namespace lipwalk
