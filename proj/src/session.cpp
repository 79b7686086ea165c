#include "lipwalk/session.hpp"

#include <cmath>
#include <numbers>
#include <set>

namespace lipwalk {

using nlohmann::json;

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void check_fields(const json& j, const std::set<std::string>& allowed) {
  for (const auto& [k, _] : j.items())
    if (!allowed.count(k)) throw ProtocolError("unknown field '" + k + "' for command '" + j["type"].get<std::string>() + "'");
}

double number(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ProtocolError(std::string("missing field '") + key + "'");
  if (!it->is_number()) throw ProtocolError(std::string("field '") + key + "' must be a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw ProtocolError(std::string("field '") + key + "' must be finite");
  return v;
}

Eigen::Vector2d pair(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) return Eigen::Vector2d::Zero();
  if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number())
    throw ProtocolError(std::string("field '") + key + "' must be an [x, y] array");
  Eigen::Vector2d v((*it)[0].get<double>(), (*it)[1].get<double>());
  if (!v.allFinite()) throw ProtocolError(std::string("field '") + key + "' must be finite");
  return v;
}

json vec(const Eigen::Vector2d& v) { return json::array({v.x(), v.y()}); }

json gait_json(const GaitCommand& g) {
  return {{"a_l", g.a_l}, {"a_w", g.a_w}, {"theta_deg", g.theta_deg}, {"b", g.b}, {"T", g.T}};
}

}  // namespace

Gait3DParams<double> to_gait(const GaitCommand& g) { return {g.a_l, g.a_w, g.theta_deg * kDegToRad, g.b, g.T}; }

GaitCommand to_command(const Gait3DParams<double>& g) {
  return {g.a_l, g.a_w, g.theta / kDegToRad, g.b, g.period};
}

SessionCommand parse_command(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("command must be a JSON object");
  auto type_it = j.find("type");
  if (type_it == j.end() || !type_it->is_string()) throw ProtocolError("command needs a string 'type'");
  const std::string type = *type_it;

  if (type == "set_gait") {
    check_fields(j, {"type", "a_l", "a_w", "theta_deg", "b", "T"});
    GaitCommand g{number(j, "a_l"), number(j, "a_w"), number(j, "theta_deg"), number(j, "b"), number(j, "T")};
    if (!(g.T > 0.0)) throw ProtocolError("field 'T' must be > 0");
    return SetGait{g};
  }
  if (type == "push") {
    check_fields(j, {"type", "dvx", "dvy"});
    return Push{number(j, "dvx"), number(j, "dvy")};
  }
  if (type == "run") {
    check_fields(j, {"type", "speed"});
    Run r;
    if (j.contains("speed")) r.speed = number(j, "speed");
    if (!(r.speed > 0.0)) throw ProtocolError("field 'speed' must be > 0");
    return r;
  }
  if (type == "pause") {
    check_fields(j, {"type"});
    return Pause{};
  }
  if (type == "step_once") {
    check_fields(j, {"type"});
    return StepOnce{};
  }
  if (type == "reset") {
    check_fields(j, {"type", "initial"});
    Reset r;
    if (j.contains("initial")) {
      const json& init = j["initial"];
      if (!init.is_object()) throw ProtocolError("field 'initial' must be an object");
      for (const auto& [k, _] : init.items())
        if (k != "time" && k != "step_index" && k != "com" && k != "vel" && k != "stance" && k != "stance_leg")
          throw ProtocolError("unknown field '" + k + "' in reset.initial");
      if (init.contains("time")) r.initial.time = number(init, "time");
      if (r.initial.time < 0.0) throw ProtocolError("field 'time' must be >= 0");
      if (init.contains("step_index")) {
        if (!init["step_index"].is_number_integer() || init["step_index"].get<long>() < 0)
          throw ProtocolError("field 'step_index' must be a non-negative integer");
        r.initial.step_index = init["step_index"].get<long>();
      }
      r.initial.com = pair(init, "com");
      r.initial.vel = pair(init, "vel");
      r.initial.stance = pair(init, "stance");
      if (init.contains("stance_leg")) {
        const json& leg = init["stance_leg"];
        if (!leg.is_number_integer() || (leg.get<int>() != 1 && leg.get<int>() != 2))
          throw ProtocolError("field 'stance_leg' must be 1 or 2");
        r.initial.stance_leg = leg_from_id(leg.get<int>());
      }
    }
    return r;
  }
  throw ProtocolError("unknown command type '" + type + "'");
}

json command_to_json(const SessionCommand& command) {
  return std::visit(
      [](const auto& c) -> json {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, SetGait>) {
          json j = gait_json(c.gait);
          j["type"] = "set_gait";
          return j;
        } else if constexpr (std::is_same_v<T, Push>) {
          return {{"type", "push"}, {"dvx", c.dvx}, {"dvy", c.dvy}};
        } else if constexpr (std::is_same_v<T, Run>) {
          return {{"type", "run"}, {"speed", c.speed}};
        } else if constexpr (std::is_same_v<T, Pause>) {
          return {{"type", "pause"}};
        } else if constexpr (std::is_same_v<T, StepOnce>) {
          return {{"type", "step_once"}};
        } else {
          return {{"type", "reset"},
                  {"initial",
                   {{"time", c.initial.time},
                    {"step_index", c.initial.step_index},
                    {"com", vec(c.initial.com)},
                    {"vel", vec(c.initial.vel)},
                    {"stance", vec(c.initial.stance)},
                    {"stance_leg", static_cast<int>(c.initial.stance_leg)}}}};
        }
      },
      command);
}

std::string_view to_string(SessionEvent event) {
  switch (event) {
    case SessionEvent::None: return "none";
    case SessionEvent::Touchdown: return "touchdown";
    case SessionEvent::Push: return "push";
    case SessionEvent::GaitChange: return "gait_change";
    case SessionEvent::Reset: return "reset";
  }
  return "none";
}

json to_json(const SessionUpdate& u, bool include_wall_time) {
  json j = {{"type", "update"},
            {"t", u.t},
            {"step_index", u.step_index},
            {"com", vec(u.com)},
            {"vel", vec(u.vel)},
            {"stance_foot", vec(u.stance_foot)},
            {"stance_leg", static_cast<int>(u.stance_leg)},
            {"gait", gait_json(u.gait)},
            {"pending_gait", u.pending_gait ? gait_json(*u.pending_gait) : json(nullptr)},
            {"last_event", std::string(to_string(u.last_event))}};
  json fp = json::array();
  for (const auto& f : u.footprints) fp.push_back(vec(f));
  j["footprints"] = std::move(fp);
  if (include_wall_time) j["wall_time"] = u.wall_time;
  return j;
}

Session::Session(const ModelParams<double>& model, const GaitCommand& gait, const WorldState& initial,
                 const SessionOptions& options)
    : model_(model),
      options_(options),
      latest_gait_(gait),
      initial_(initial),
      walker_(model, initial, GaitSchedule{{0, to_gait(gait)}}) {
  if (!(options_.tick_rate > 0.0) || !std::isfinite(options_.tick_rate))
    throw InvalidParameter("tick rate must be > 0");
  if (options_.footprint_cap == 0) throw InvalidParameter("footprint cap must be >= 1");
  reset(initial);
}

json Session::handshake() const {
  const auto special = special_b(step_constants(latest_gait_.T, model_), model_);
  return {{"type", "hello"},
          {"protocol", kProtocolVersion},
          {"model", {{"g", model_.g()}, {"h", model_.h()}, {"t_c", model_.tc()}}},
          {"tick_rate", options_.tick_rate},
          {"footprint_cap", options_.footprint_cap},
          {"gait", gait_json(latest_gait_)},
          {"special_b",
           {{"T", latest_gait_.T},
            {"b_min", special.b_min},
            {"b_cp", special.b_cp},
            {"b_db", special.b_db},
            {"b_max", special.b_max}}}};
}

SessionUpdate Session::snapshot() const {
  const WorldState s = walker_.state();
  SessionUpdate u;
  u.t = s.time;
  u.step_index = s.step_index;
  u.com = s.com;
  u.vel = s.vel;
  u.stance_foot = s.stance;
  u.stance_leg = s.stance_leg;
  u.gait = to_command(walker_.gait_for_step(s.step_index));
  u.pending_gait = pending_;
  u.last_event = last_event_;
  u.footprints.assign(footprints_.begin(), footprints_.end());
  return u;
}

void Session::collect_footprints() {
  for (const auto& rec : walker_.take_step_records()) {
    footprints_.push_back(rec.footprint);
    while (footprints_.size() > options_.footprint_cap) footprints_.pop_front();
    note(SessionEvent::Touchdown);
  }
  const auto& sched = walker_.schedule();
  if (pending_ && sched.back().from_step <= walker_.step_index()) pending_.reset();
}

SessionUpdate Session::advance() {
  walker_.advance_to_next_sample(options_.tick_rate);
  collect_footprints();
  SessionUpdate u = snapshot();
  last_event_ = SessionEvent::None;
  return u;
}

void Session::reset(const WorldState& initial) {
  walker_ = Walker(model_, initial, GaitSchedule{{0, to_gait(latest_gait_)}});
  // The initial state is the snapshot clients already have; the first tick
  // moves to the next sample.
  walker_.advance_to_next_sample(options_.tick_rate);
  initial_ = initial;
  footprints_.clear();
  footprints_.push_back(initial.stance);
  push_log_.clear();
  pending_.reset();
}

std::vector<SessionUpdate> Session::apply(const std::vector<SessionCommand>& commands) {
  std::vector<SessionUpdate> updates;
  bool dirty = false;
  for (const auto& command : commands) {
    if (const auto* c = std::get_if<SetGait>(&command)) {
      walker_.schedule_gait(walker_.step_index() + 1, to_gait(c->gait));
      latest_gait_ = c->gait;
      pending_ = c->gait;
      note(SessionEvent::GaitChange);
      dirty = true;
    } else if (const auto* c = std::get_if<Push>(&command)) {
      const Eigen::Vector2d dv(c->dvx, c->dvy);
      walker_.apply_push_now(dv);
      push_log_.push_back({walker_.time(), dv});
      note(SessionEvent::Push);
      dirty = true;
    } else if (const auto* c = std::get_if<Run>(&command)) {
      running_ = true;
      speed_ = c->speed;
    } else if (std::holds_alternative<Pause>(command)) {
      running_ = false;
    } else if (std::holds_alternative<StepOnce>(command)) {
      updates.push_back(advance());
      dirty = false;
    } else if (const auto* c = std::get_if<Reset>(&command)) {
      reset(c->initial);
      note(SessionEvent::Reset);
      dirty = true;
    }
  }
  if (dirty) {
    updates.push_back(snapshot());
    last_event_ = SessionEvent::None;
  }
  return updates;
}

std::optional<SessionUpdate> Session::tick() {
  if (!running_) return std::nullopt;
  return advance();
}

}  // namespace lipwalk
