#include "lipwalk/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace lipwalk {

using nlohmann::json;

ConfigError::ConfigError(std::size_t line, std::string pointer, const std::string& message)
    : std::runtime_error([&] {
        std::ostringstream out;
        if (line > 0) out << "line " << line << ": ";
        out << (pointer.empty() ? std::string("/") : pointer) << ": " << message;
        return out.str();
      }()),
      line_(line),
      pointer_(std::move(pointer)) {}

namespace {

// Forward iterator over the raw text that remembers the last offset the JSON
// lexer dereferenced, so SAX events can be mapped back to source lines.
class TrackingIterator {
 public:
  using iterator_category = std::forward_iterator_tag;
  using value_type = char;
  using difference_type = std::ptrdiff_t;
  using pointer = const char*;
  using reference = const char&;

  TrackingIterator() = default;
  TrackingIterator(const char* p, const char* begin, std::size_t* last) : p_(p), begin_(begin), last_(last) {}

  reference operator*() const {
    *last_ = static_cast<std::size_t>(p_ - begin_);
    return *p_;
  }
  TrackingIterator& operator++() {
    ++p_;
    return *this;
  }
  TrackingIterator operator++(int) {
    TrackingIterator tmp = *this;
    ++p_;
    return tmp;
  }
  bool operator==(const TrackingIterator& o) const { return p_ == o.p_; }
  bool operator!=(const TrackingIterator& o) const { return p_ != o.p_; }

 private:
  const char* p_ = nullptr;
  const char* begin_ = nullptr;
  std::size_t* last_ = nullptr;
};

std::string escape_token(const std::string& token) {
  std::string out;
  for (char c : token) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

// Builds the DOM like nlohmann's own SAX DOM parser, and records the source
// offset of every value by JSON pointer.
class PositionedDomBuilder : public nlohmann::json_sax<json> {
 public:
  explicit PositionedDomBuilder(const std::size_t* last) : last_(last) {}

  json& root() { return root_; }
  std::map<std::string, std::size_t>& offsets() { return offsets_; }
  const std::string& error() const { return error_; }
  std::size_t error_offset() const { return error_offset_; }

  bool null() override { return value(json(nullptr)); }
  bool boolean(bool v) override { return value(json(v)); }
  bool number_integer(number_integer_t v) override { return value(json(v)); }
  bool number_unsigned(number_unsigned_t v) override { return value(json(v)); }
  bool number_float(number_float_t v, const string_t&) override { return value(json(v)); }
  bool string(string_t& v) override { return value(json(v)); }
  bool binary(binary_t&) override { return false; }

  bool start_object(std::size_t) override {
    json* node = place(json::object());
    stack_.push_back({node, pointer_of_last_, {}});
    return true;
  }
  bool key(string_t& k) override {
    stack_.back().key = k;
    return true;
  }
  bool end_object() override {
    stack_.pop_back();
    return true;
  }
  bool start_array(std::size_t) override {
    json* node = place(json::array());
    stack_.push_back({node, pointer_of_last_, {}});
    return true;
  }
  bool end_array() override {
    stack_.pop_back();
    return true;
  }
  bool parse_error(std::size_t position, const std::string&, const nlohmann::detail::exception& ex) override {
    error_ = ex.what();
    error_offset_ = position == 0 ? 0 : position - 1;
    return false;
  }

 private:
  struct Frame {
    json* node;
    std::string pointer;
    std::string key;
  };

  bool value(json v) {
    place(std::move(v));
    return true;
  }

  json* place(json v) {
    json* slot = nullptr;
    if (stack_.empty()) {
      root_ = std::move(v);
      slot = &root_;
      pointer_of_last_.clear();
    } else if (stack_.back().node->is_array()) {
      auto& arr = *stack_.back().node;
      arr.push_back(std::move(v));
      slot = &arr.back();
      pointer_of_last_ = stack_.back().pointer + "/" + std::to_string(arr.size() - 1);
    } else {
      auto& obj = *stack_.back().node;
      const std::string& k = stack_.back().key;
      obj[k] = std::move(v);
      slot = &obj[k];
      pointer_of_last_ = stack_.back().pointer + "/" + escape_token(k);
    }
    offsets_.emplace(pointer_of_last_, *last_);
    return slot;
  }

  const std::size_t* last_;
  json root_;
  std::vector<Frame> stack_;
  std::string pointer_of_last_;
  std::map<std::string, std::size_t> offsets_;
  std::string error_;
  std::size_t error_offset_ = 0;
};

std::size_t line_at(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

const std::set<std::string> kGainPresets = {"b_min", "b_cp", "b_db", "b_max"};

// Typed access into the parsed document with line-anchored failures.
class Reader {
 public:
  Reader(std::string_view text, std::map<std::string, std::size_t> offsets)
      : text_(text), offsets_(std::move(offsets)) {}

  [[noreturn]] void fail(const std::string& pointer, const std::string& message) const {
    auto it = offsets_.find(pointer);
    std::size_t line = it == offsets_.end() ? 0 : line_at(text_, it->second);
    throw ConfigError(line, pointer, message);
  }

  void require_object(const json& v, const std::string& ptr, const std::set<std::string>& allowed) const {
    if (!v.is_object()) fail(ptr, "expected an object");
    for (const auto& [k, _] : v.items())
      if (!allowed.count(k)) fail(ptr + "/" + escape_token(k), "unknown field '" + k + "'");
  }

  const json* find(const json& obj, const std::string& key) const {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
  }

  const json& need(const json& obj, const std::string& ptr, const std::string& key) const {
    const json* v = find(obj, key);
    if (v == nullptr) fail(ptr, "missing required field '" + key + "'");
    return *v;
  }

  double number(const json& v, const std::string& ptr) const {
    if (!v.is_number()) fail(ptr, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(ptr, "must be finite");
    return d;
  }

  long integer(const json& v, const std::string& ptr) const {
    if (!v.is_number_integer()) fail(ptr, "expected an integer");
    return v.get<long>();
  }

  std::string string(const json& v, const std::string& ptr) const {
    if (!v.is_string()) fail(ptr, "expected a string");
    return v.get<std::string>();
  }

  GainSpec gain(const json& v, const std::string& ptr) const {
    if (v.is_string()) {
      auto name = v.get<std::string>();
      if (!kGainPresets.count(name)) fail(ptr, "unknown gain preset '" + name + "' (use b_min, b_cp, b_db, b_max)");
      return name;
    }
    return number(v, ptr);
  }

  // A planar quantity is a bare number; a spatial one is an [x, y] pair.
  Eigen::Vector2d vec(const json& v, const std::string& ptr, WalkMode mode) const {
    if (mode == WalkMode::Planar) return {number(v, ptr), 0.0};
    if (!v.is_array() || v.size() != 2) fail(ptr, "expected an [x, y] array");
    return {number(v[0], ptr + "/0"), number(v[1], ptr + "/1")};
  }

 private:
  std::string_view text_;
  std::map<std::string, std::size_t> offsets_;
};

json vec_to_json(const Eigen::Vector2d& v, WalkMode mode) {
  if (mode == WalkMode::Planar) return v.x();
  return json::array({v.x(), v.y()});
}

json gain_to_json(const GainSpec& g) {
  if (std::holds_alternative<double>(g)) return std::get<double>(g);
  return std::get<std::string>(g);
}

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

double resolve_gain(const GainSpec& gain, double period, const ModelParams<double>& model) {
  if (std::holds_alternative<double>(gain)) return std::get<double>(gain);
  const auto special = special_b(step_constants(period, model), model);
  const auto& name = std::get<std::string>(gain);
  if (name == "b_min") return special.b_min;
  if (name == "b_cp") return special.b_cp;
  if (name == "b_db") return special.b_db;
  if (name == "b_max") return special.b_max;
  throw InvalidParameter("unknown gain preset '" + name + "'");
}

ScenarioConfig parse_scenario(std::string_view text) {
  std::size_t last = 0;
  PositionedDomBuilder builder(&last);
  TrackingIterator first(text.data(), text.data(), &last);
  TrackingIterator end(text.data() + text.size(), text.data(), &last);
  if (!json::sax_parse(first, end, &builder)) {
    throw ConfigError(line_at(text, builder.error_offset()), "", "malformed JSON: " + builder.error());
  }

  const Reader r(text, builder.offsets());
  const json& root = builder.root();
  r.require_object(root, "",
                   {"model", "mode", "period", "n_steps", "initial", "legs", "gait_schedule", "pushes",
                    "random_pushes", "sample_rate", "reach_limit", "output"});

  ScenarioConfig cfg;

  const json& model = r.need(root, "", "model");
  r.require_object(model, "/model", {"g", "h"});
  cfg.g = r.number(r.need(model, "/model", "g"), "/model/g");
  cfg.h = r.number(r.need(model, "/model", "h"), "/model/h");
  if (!(cfg.g > 0.0)) r.fail("/model/g", "gravity must be > 0");
  if (!(cfg.h > 0.0)) r.fail("/model/h", "CoM height must be > 0");
  const ModelParams<double> params(cfg.g, cfg.h);

  const std::string mode = r.string(r.need(root, "", "mode"), "/mode");
  if (mode == "2d") cfg.mode = WalkMode::Planar;
  else if (mode == "3d") cfg.mode = WalkMode::Spatial;
  else r.fail("/mode", "mode must be \"2d\" or \"3d\"");

  cfg.period = r.number(r.need(root, "", "period"), "/period");
  if (!(cfg.period > 0.0)) r.fail("/period", "step period must be > 0");

  cfg.n_steps = r.integer(r.need(root, "", "n_steps"), "/n_steps");
  if (cfg.n_steps < 1) r.fail("/n_steps", "n_steps must be >= 1");

  if (const json* init = r.find(root, "initial")) {
    r.require_object(*init, "/initial", {"com", "vel", "stance", "stance_leg"});
    if (const json* v = r.find(*init, "com")) cfg.initial.com = r.vec(*v, "/initial/com", cfg.mode);
    if (const json* v = r.find(*init, "vel")) cfg.initial.vel = r.vec(*v, "/initial/vel", cfg.mode);
    if (const json* v = r.find(*init, "stance")) cfg.initial.stance = r.vec(*v, "/initial/stance", cfg.mode);
    if (const json* v = r.find(*init, "stance_leg")) {
      const long leg = r.integer(*v, "/initial/stance_leg");
      if (leg != 1 && leg != 2) r.fail("/initial/stance_leg", "stance_leg must be 1 or 2");
      cfg.initial.stance_leg = leg_from_id(static_cast<int>(leg));
    }
  }

  const auto check_gain = [&](const GainSpec& g, double period, const std::string& ptr) {
    if (std::holds_alternative<std::string>(g)) {
      (void)resolve_gain(g, period, params);
    } else if (!std::isfinite(std::get<double>(g))) {
      r.fail(ptr, "gain must be finite");
    }
  };

  if (cfg.mode == WalkMode::Planar) {
    if (r.find(root, "gait_schedule")) r.fail("/gait_schedule", "gait_schedule is only valid in 3d mode");
    const json& legs = r.need(root, "", "legs");
    if (!legs.is_array() || legs.size() != 2) r.fail("/legs", "legs must be an array of exactly 2 objects");
    for (std::size_t i = 0; i < 2; ++i) {
      const std::string ptr = "/legs/" + std::to_string(i);
      r.require_object(legs[i], ptr, {"a", "b"});
      cfg.legs[i].a = r.number(r.need(legs[i], ptr, "a"), ptr + "/a");
      cfg.legs[i].b = r.gain(r.need(legs[i], ptr, "b"), ptr + "/b");
      check_gain(cfg.legs[i].b, cfg.period, ptr + "/b");
    }
  } else {
    if (r.find(root, "legs")) r.fail("/legs", "legs is only valid in 2d mode; use gait_schedule");
    const json& sched = r.need(root, "", "gait_schedule");
    if (!sched.is_array() || sched.empty()) r.fail("/gait_schedule", "gait_schedule must be a non-empty array");
    for (std::size_t i = 0; i < sched.size(); ++i) {
      const std::string ptr = "/gait_schedule/" + std::to_string(i);
      r.require_object(sched[i], ptr, {"from_step", "a_l", "a_w", "theta_deg", "b", "period"});
      GaitConfig g;
      g.from_step = r.integer(r.need(sched[i], ptr, "from_step"), ptr + "/from_step");
      g.a_l = r.number(r.need(sched[i], ptr, "a_l"), ptr + "/a_l");
      g.a_w = r.number(r.need(sched[i], ptr, "a_w"), ptr + "/a_w");
      g.theta_deg = r.number(r.need(sched[i], ptr, "theta_deg"), ptr + "/theta_deg");
      g.b = r.gain(r.need(sched[i], ptr, "b"), ptr + "/b");
      if (const json* p = r.find(sched[i], "period")) {
        g.period = r.number(*p, ptr + "/period");
        if (!(*g.period > 0.0)) r.fail(ptr + "/period", "step period must be > 0");
      }
      if (i == 0 && g.from_step != 0) r.fail(ptr + "/from_step", "the first gait must start at step 0");
      if (i > 0 && g.from_step <= cfg.gait_schedule.back().from_step)
        r.fail(ptr + "/from_step", "from_step must be strictly increasing");
      check_gain(g.b, g.period.value_or(cfg.period), ptr + "/b");
      cfg.gait_schedule.push_back(g);
    }
  }

  if (const json* pushes = r.find(root, "pushes")) {
    if (!pushes->is_array()) r.fail("/pushes", "pushes must be an array");
    for (std::size_t i = 0; i < pushes->size(); ++i) {
      const std::string ptr = "/pushes/" + std::to_string(i);
      const json& p = (*pushes)[i];
      r.require_object(p, ptr, {"at_time", "delta_v"});
      PushConfig push;
      push.at_time = r.number(r.need(p, ptr, "at_time"), ptr + "/at_time");
      if (push.at_time < 0.0) r.fail(ptr + "/at_time", "push time must be >= 0");
      push.delta_v = r.vec(r.need(p, ptr, "delta_v"), ptr + "/delta_v", cfg.mode);
      cfg.pushes.push_back(push);
    }
  }

  if (const json* rp = r.find(root, "random_pushes")) {
    r.require_object(*rp, "/random_pushes", {"count", "max_dv"});
    RandomPushConfig random;
    random.count = static_cast<int>(r.integer(r.need(*rp, "/random_pushes", "count"), "/random_pushes/count"));
    random.max_dv = r.number(r.need(*rp, "/random_pushes", "max_dv"), "/random_pushes/max_dv");
    if (random.count < 0) r.fail("/random_pushes/count", "count must be >= 0");
    if (random.max_dv < 0.0) r.fail("/random_pushes/max_dv", "max_dv must be >= 0");
    cfg.random_pushes = random;
  }

  if (const json* v = r.find(root, "sample_rate")) {
    cfg.sample_rate = r.number(*v, "/sample_rate");
    if (cfg.sample_rate < 0.0) r.fail("/sample_rate", "sample_rate must be >= 0");
  }

  if (const json* v = r.find(root, "reach_limit")) {
    if (!v->is_null()) {
      cfg.reach_limit = r.number(*v, "/reach_limit");
      if (!(*cfg.reach_limit > 0.0)) r.fail("/reach_limit", "reach_limit must be > 0");
    }
  }

  if (const json* out = r.find(root, "output")) {
    r.require_object(*out, "/output", {"samples_csv", "summary_json"});
    if (const json* v = r.find(*out, "samples_csv")) cfg.output.samples_csv = r.string(*v, "/output/samples_csv");
    if (const json* v = r.find(*out, "summary_json")) cfg.output.summary_json = r.string(*v, "/output/summary_json");
  }

  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "", "cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

nlohmann::json to_json(const ScenarioConfig& cfg) {
  json j;
  j["model"] = {{"g", cfg.g}, {"h", cfg.h}};
  j["mode"] = std::string(to_string(cfg.mode));
  j["period"] = cfg.period;
  j["n_steps"] = cfg.n_steps;
  j["initial"] = {{"com", vec_to_json(cfg.initial.com, cfg.mode)},
                  {"vel", vec_to_json(cfg.initial.vel, cfg.mode)},
                  {"stance", vec_to_json(cfg.initial.stance, cfg.mode)},
                  {"stance_leg", static_cast<int>(cfg.initial.stance_leg)}};
  if (cfg.mode == WalkMode::Planar) {
    j["legs"] = json::array();
    for (const auto& leg : cfg.legs) j["legs"].push_back({{"a", leg.a}, {"b", gain_to_json(leg.b)}});
  } else {
    j["gait_schedule"] = json::array();
    for (const auto& g : cfg.gait_schedule) {
      json e = {{"from_step", g.from_step}, {"a_l", g.a_l}, {"a_w", g.a_w}, {"theta_deg", g.theta_deg},
                {"b", gain_to_json(g.b)}};
      if (g.period) e["period"] = *g.period;
      j["gait_schedule"].push_back(e);
    }
  }
  j["pushes"] = json::array();
  for (const auto& p : cfg.pushes)
    j["pushes"].push_back({{"at_time", p.at_time}, {"delta_v", vec_to_json(p.delta_v, cfg.mode)}});
  if (cfg.random_pushes)
    j["random_pushes"] = {{"count", cfg.random_pushes->count}, {"max_dv", cfg.random_pushes->max_dv}};
  j["sample_rate"] = cfg.sample_rate;
  j["reach_limit"] = cfg.reach_limit ? json(*cfg.reach_limit) : json(nullptr);
  j["output"] = {{"samples_csv", cfg.output.samples_csv}, {"summary_json", cfg.output.summary_json}};
  return j;
}

std::string serialize(const ScenarioConfig& config) { return to_json(config).dump(2) + "\n"; }

ModelParams<double> model_of(const ScenarioConfig& config) { return {config.g, config.h}; }

GaitSchedule resolve_schedule(const ScenarioConfig& config) {
  const auto model = model_of(config);
  GaitSchedule schedule;
  for (const auto& g : config.gait_schedule) {
    const double period = g.period.value_or(config.period);
    schedule.push_back({g.from_step,
                        {g.a_l, g.a_w, g.theta_deg * kDegToRad, resolve_gain(g.b, period, model), period}});
  }
  return schedule;
}

std::vector<PushEvent> resolve_pushes(const ScenarioConfig& config, std::uint64_t seed) {
  std::vector<PushEvent> pushes;
  for (const auto& p : config.pushes) pushes.push_back({p.at_time, p.delta_v});
  if (config.random_pushes && config.random_pushes->count > 0) {
    const double horizon = config.mode == WalkMode::Planar
                               ? horizon_of(PlanarGait{{}, config.period}, 0.0, config.n_steps)
                               : horizon_of(resolve_schedule(config), 0.0, 0, config.n_steps);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> when(0.0, horizon);
    std::uniform_real_distribution<double> dv(-config.random_pushes->max_dv, config.random_pushes->max_dv);
    for (int i = 0; i < config.random_pushes->count; ++i) {
      PushEvent e;
      e.at_time = when(rng);
      e.delta_v.x() = dv(rng);
      e.delta_v.y() = config.mode == WalkMode::Spatial ? dv(rng) : 0.0;
      pushes.push_back(e);
    }
  }
  return pushes;
}

WalkTrace run_scenario(const ScenarioConfig& config, std::uint64_t seed) {
  const auto model = model_of(config);
  SimulationOptions options;
  options.sample_rate = config.sample_rate;
  options.reach_limit = config.reach_limit;
  const auto pushes = resolve_pushes(config, seed);

  if (config.mode == WalkMode::Planar) {
    std::array<LegParams<double>, 2> legs;
    for (std::size_t i = 0; i < 2; ++i)
      legs[i] = {config.legs[i].a, resolve_gain(config.legs[i].b, config.period, model)};
    return simulate_2d(config.initial, legs, config.period, config.n_steps, pushes, options, model);
  }
  return simulate_3d(config.initial, resolve_schedule(config), config.n_steps, pushes, options, model);
}

}  // namespace lipwalk
