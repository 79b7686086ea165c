#include "lipwalk/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace lipwalk {

namespace {

bool finite(const Eigen::Vector2d& v) { return v.allFinite(); }

void validate_initial(const WorldState& s) {
  if (!std::isfinite(s.time) || s.time < 0.0) throw InvalidParameter("initial time must be finite and >= 0");
  if (!finite(s.com) || !finite(s.vel) || !finite(s.stance))
    throw InvalidParameter("initial state must be finite");
}

void validate_gait(const Gait3DParams<double>& g) {
  if (!std::isfinite(g.a_l) || !std::isfinite(g.a_w) || !std::isfinite(g.theta) || !std::isfinite(g.b))
    throw InvalidParameter("gait parameters must be finite");
  if (!std::isfinite(g.period) || !(g.period > 0.0)) throw InvalidParameter("gait period must be > 0");
}

WorldState planar(WorldState s) {
  s.com.y() = 0.0;
  s.vel.y() = 0.0;
  s.stance.y() = 0.0;
  return s;
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a < 0.0) a += two_pi;
  return a - std::numbers::pi;
}

}  // namespace

std::vector<Eigen::Vector2d> WalkTrace::footprints() const {
  std::vector<Eigen::Vector2d> out;
  out.reserve(steps.size() + 1);
  out.push_back(initial_stance);
  for (const auto& s : steps) out.push_back(s.footprint);
  return out;
}

void validate_schedule(const GaitSchedule& schedule) {
  if (schedule.empty()) throw InvalidParameter("gait schedule must not be empty");
  if (schedule.front().from_step != 0) throw InvalidParameter("gait schedule must start at step 0");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    validate_gait(schedule[i].gait);
    if (i > 0 && schedule[i].from_step <= schedule[i - 1].from_step)
      throw InvalidParameter("gait schedule entries must have strictly increasing from_step");
  }
}

Walker::Walker(const ModelParams<double>& model, const WorldState& initial, PlanarGait gait,
               std::optional<double> reach_limit)
    : model_(model), mode_(WalkMode::Planar), planar_(gait), reach_limit_(reach_limit) {
  validate_initial(initial);
  if (!std::isfinite(gait.period) || !(gait.period > 0.0)) throw InvalidParameter("step period must be > 0");
  for (const auto& leg : gait.legs)
    if (!std::isfinite(leg.a) || !std::isfinite(leg.b)) throw InvalidParameter("leg parameters must be finite");

  const WorldState s = planar(initial);
  time_ = segment_time_ = step_start_ = s.time;
  segment_rel_ = s.com - s.stance;
  segment_vel_ = s.vel;
  stance_ = s.stance;
  stance_leg_ = s.stance_leg;
  step_index_ = s.step_index;
  step_end_ = step_start_ + period_of_step(step_index_);
}

Walker::Walker(const ModelParams<double>& model, const WorldState& initial, GaitSchedule schedule,
               std::optional<double> reach_limit)
    : model_(model), mode_(WalkMode::Spatial), schedule_(std::move(schedule)), reach_limit_(reach_limit) {
  validate_initial(initial);
  validate_schedule(schedule_);

  time_ = segment_time_ = step_start_ = initial.time;
  segment_rel_ = initial.com - initial.stance;
  segment_vel_ = initial.vel;
  stance_ = initial.stance;
  stance_leg_ = initial.stance_leg;
  step_index_ = initial.step_index;
  step_end_ = step_start_ + period_of_step(step_index_);
}

const Gait3DParams<double>& Walker::gait_for_step(long step) const {
  if (mode_ != WalkMode::Spatial) throw InvalidParameter("planar walker has no 3D gait schedule");
  auto it = std::upper_bound(schedule_.begin(), schedule_.end(), step,
                             [](long s, const ScheduledGait& e) { return s < e.from_step; });
  if (it == schedule_.begin()) return schedule_.front().gait;
  return std::prev(it)->gait;
}

void Walker::schedule_gait(long from_step, const Gait3DParams<double>& gait) {
  if (mode_ != WalkMode::Spatial) throw InvalidParameter("planar walker has no 3D gait schedule");
  validate_gait(gait);
  if (from_step <= step_index_) throw InvalidParameter("gait change must start after the current step");
  if (schedule_.back().from_step == from_step) {
    schedule_.back().gait = gait;
  } else if (schedule_.back().from_step < from_step) {
    schedule_.push_back({from_step, gait});
  } else {
    throw InvalidParameter("gait schedule entries must have strictly increasing from_step");
  }
}

double Walker::period_of_step(long step) const {
  return mode_ == WalkMode::Planar ? planar_.period : gait_for_step(step).period;
}

Eigen::Vector2d Walker::placement_for(const Eigen::Vector2d& vel, Leg leg, long step, double* theta) const {
  if (mode_ == WalkMode::Planar) {
    *theta = 0.0;
    const auto& params = planar_.legs[leg == Leg::One ? 0 : 1];
    return lfpc_2d(vel.x(), params);
  }
  const auto& gait = gait_for_step(step);
  *theta = gait.theta;
  return lfpc_3d(vel.x(), vel.y(), leg, gait);
}

void Walker::flow_segment_to(double t, Eigen::Vector2d* rel, Eigen::Vector2d* vel) const {
  const Matrix2<double> m = transition_matrix(t - segment_time_, model_);
  for (int axis = 0; axis < 2; ++axis) {
    const Vector2<double> q = m * Vector2<double>(segment_rel_(axis), segment_vel_(axis));
    (*rel)(axis) = q(0);
    (*vel)(axis) = q(1);
  }
}

void Walker::rebase(double t) {
  Eigen::Vector2d rel, vel;
  flow_segment_to(t, &rel, &vel);
  segment_time_ = t;
  segment_rel_ = rel;
  segment_vel_ = vel;
  time_ = t;
}

void Walker::touchdown() {
  rebase(step_end_);
  const long next = step_index_ + 1;
  const Leg leg = other_leg(stance_leg_);

  StepRecord rec;
  rec.index = next;
  rec.time = step_end_;
  rec.leg = leg;
  rec.rel_before = segment_rel_;
  rec.vel_before = segment_vel_;
  rec.placement = placement_for(segment_vel_, leg, next, &rec.theta);
  if (mode_ == WalkMode::Planar) rec.placement.y() = 0.0;

  const Eigen::Vector2d com = stance_ + segment_rel_;
  stance_ = com + rec.placement;
  segment_rel_ = -rec.placement;

  rec.rel_after = segment_rel_;
  rec.vel_after = segment_vel_;
  rec.footprint = stance_;
  rec.infeasible = reach_limit_.has_value() && rec.placement.norm() > *reach_limit_;
  records_.push_back(rec);

  stance_leg_ = leg;
  step_index_ = next;
  step_start_ = step_end_;
  step_end_ = step_start_ + period_of_step(step_index_);
}

void Walker::schedule_push(const PushEvent& push) {
  if (!std::isfinite(push.at_time) || !finite(push.delta_v)) throw InvalidParameter("push must be finite");
  if (push.at_time < time_) throw InvalidParameter("push time lies before the current time");
  PushEvent p = push;
  if (mode_ == WalkMode::Planar) p.delta_v.y() = 0.0;
  auto it = std::upper_bound(pending_pushes_.begin(), pending_pushes_.end(), p.at_time,
                             [](double t, const PushEvent& e) { return t < e.at_time; });
  pending_pushes_.insert(it, p);
}

void Walker::apply_push_now(const Eigen::Vector2d& delta_v) {
  if (!finite(delta_v)) throw InvalidParameter("push must be finite");
  rebase(time_);
  segment_vel_.x() += delta_v.x();
  if (mode_ == WalkMode::Spatial) segment_vel_.y() += delta_v.y();
}

void Walker::advance_to(double t) {
  if (!std::isfinite(t) || t < time_) throw InvalidParameter("cannot advance the walker backwards in time");
  for (;;) {
    const double next_push =
        pending_pushes_.empty() ? std::numeric_limits<double>::infinity() : pending_pushes_.front().at_time;
    if (step_end_ <= t && step_end_ <= next_push) {
      touchdown();
    } else if (next_push <= t) {
      const PushEvent p = pending_pushes_.front();
      pending_pushes_.erase(pending_pushes_.begin());
      if (p.at_time > time_) rebase(p.at_time);
      apply_push_now(p.delta_v);
    } else {
      break;
    }
  }
  time_ = t;
}

double Walker::next_sample_time(double rate) const {
  if (!(rate > 0.0)) throw InvalidParameter("sample rate must be > 0");
  const double offset = static_cast<double>(sample_k_) / rate;
  const double period = period_of_step(step_index_);
  if (offset < period - 1e-6 / rate) return step_start_ + offset;
  return step_end_;
}

Sample Walker::advance_to_next_sample(double rate) {
  const double t = next_sample_time(rate);
  advance_to(t);
  sample_k_ = (step_start_ == t) ? 1 : sample_k_ + 1;
  return sample();
}

Sample Walker::sample() const {
  const WorldState s = state();
  return {s.time, s.step_index, s.com, s.vel, s.stance, s.stance_leg};
}

WorldState Walker::state() const {
  Eigen::Vector2d rel, vel;
  flow_segment_to(time_, &rel, &vel);
  WorldState s;
  s.time = time_;
  s.step_index = step_index_;
  s.com = stance_ + rel;
  s.vel = vel;
  s.stance = stance_;
  s.stance_leg = stance_leg_;
  return s;
}

std::vector<StepRecord> Walker::take_step_records() {
  std::vector<StepRecord> out;
  out.swap(records_);
  return out;
}

double horizon_of(const PlanarGait& gait, double start_time, long n_steps) {
  double t = start_time;
  for (long j = 0; j < n_steps; ++j) t = t + gait.period;
  return t;
}

double horizon_of(const GaitSchedule& schedule, double start_time, long first_step, long n_steps) {
  double t = start_time;
  std::size_t e = 0;
  for (long j = first_step; j < first_step + n_steps; ++j) {
    while (e + 1 < schedule.size() && schedule[e + 1].from_step <= j) ++e;
    t = t + schedule[e].gait.period;
  }
  return t;
}

namespace {

WalkTrace run(Walker& walker, long n_steps, double horizon, const std::vector<PushEvent>& pushes,
              const SimulationOptions& options, const WorldState& initial) {
  if (n_steps < 1) throw InvalidParameter("n_steps must be >= 1");
  if (options.sample_rate < 0.0 || !std::isfinite(options.sample_rate))
    throw InvalidParameter("sample rate must be >= 0");

  WalkTrace trace;
  trace.mode = walker.mode();
  trace.initial_stance = walker.stance();

  std::vector<PushEvent> sorted = pushes;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const PushEvent& a, const PushEvent& b) { return a.at_time < b.at_time; });
  for (const auto& p : sorted) {
    if (!std::isfinite(p.at_time) || p.at_time < 0.0) throw InvalidParameter("push time must be >= 0");
    if (p.at_time < initial.time) throw InvalidParameter("push time lies before the initial time");
    if (p.at_time > horizon) {
      std::ostringstream msg;
      msg << "push at t=" << p.at_time << " is beyond the horizon t=" << horizon << "; ignored";
      trace.warnings.push_back(msg.str());
      continue;
    }
    walker.schedule_push(p);
  }

  if (options.sample_rate > 0.0) {
    while (walker.step_index() < initial.step_index + n_steps)
      trace.samples.push_back(walker.advance_to_next_sample(options.sample_rate));
  } else {
    walker.advance_to(horizon);
  }
  trace.steps = walker.take_step_records();
  return trace;
}

}  // namespace

WalkTrace simulate_2d(const WorldState& initial, const std::array<LegParams<double>, 2>& legs, double period,
                      long n_steps, const std::vector<PushEvent>& pushes, const SimulationOptions& options,
                      const ModelParams<double>& model) {
  PlanarGait gait{legs, period};
  Walker walker(model, initial, gait, options.reach_limit);
  const double horizon = horizon_of(gait, initial.time, n_steps);
  return run(walker, n_steps, horizon, pushes, options, initial);
}

WalkTrace simulate_3d(const WorldState& initial, const GaitSchedule& schedule, long n_steps,
                      const std::vector<PushEvent>& pushes, const SimulationOptions& options,
                      const ModelParams<double>& model) {
  Walker walker(model, initial, schedule, options.reach_limit);
  const double horizon = horizon_of(schedule, initial.time, initial.step_index, n_steps);
  return run(walker, n_steps, horizon, pushes, options, initial);
}

GaitMeasurement measure_gait(const WalkTrace& trace) {
  if (trace.steps.size() < 3) throw InvalidParameter("gait measurement needs at least 3 steps");
  const auto f = trace.footprints();
  const std::size_t n = trace.steps.size();

  GaitMeasurement m;
  const auto count = static_cast<Eigen::Index>(n - 1);
  m.step_lengths.resize(count);
  m.step_widths.resize(count);
  m.headings.resize(count);

  double previous_heading = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 2; k <= n; ++k) {
    const auto i = static_cast<Eigen::Index>(k - 2);
    const StepRecord& rec = trace.steps[k - 1];
    const Eigen::Vector2d disp = f[k] - f[k - 1];
    m.step_index.push_back(rec.index);

    if (trace.mode == WalkMode::Planar) {
      m.step_lengths(i) = disp.x();
      m.step_widths(i) = 0.0;
      m.headings(i) = 0.0;
      continue;
    }

    m.step_lengths(i) = disp.dot(heading_direction(rec.theta));
    m.step_widths(i) = disp.dot(Eigen::Vector2d(std::cos(rec.theta), -std::sin(rec.theta)));

    const Eigen::Vector2d stride = f[k] - f[k - 2];
    const double reference = std::isnan(previous_heading) ? rec.theta : previous_heading;
    double heading = reference;
    if (stride.norm() > 1e-12) heading = reference + wrap_angle(std::atan2(stride.x(), stride.y()) - reference);
    m.headings(i) = heading;
    previous_heading = heading;
  }
  return m;
}

}  // namespace lipwalk
