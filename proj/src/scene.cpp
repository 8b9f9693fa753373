#include "neos/scene.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace neos::scene {

MotionKind motion_kind_from_string(const std::string& s) {
  if (s == "cv" || s == "constant-velocity") return MotionKind::ConstantVelocity;
  if (s == "ca" || s == "constant-acceleration") return MotionKind::ConstantAcceleration;
  if (s == "ct" || s == "coordinated-turn") return MotionKind::CoordinatedTurn;
  throw RuntimeError("unknown motion model kind: " + s);
}

std::string to_string(MotionKind k) {
  switch (k) {
    case MotionKind::ConstantVelocity: return "cv";
    case MotionKind::ConstantAcceleration: return "ca";
    case MotionKind::CoordinatedTurn: return "ct";
  }
  return "?";
}

const ObjectState& ObjectClass::state(int state_id) const {
  for (const auto& s : states)
    if (s.state_id == state_id) return s;
  throw RuntimeError("unknown state id " + std::to_string(state_id) + " in class " +
                     std::to_string(class_id));
}

const ObjectClass& ObjectClassCatalog::cls(int class_id) const {
  for (const auto& c : classes)
    if (c.class_id == class_id) return c;
  throw RuntimeError("unknown class id " + std::to_string(class_id));
}

bool ObjectClassCatalog::has(int class_id, int state_id) const {
  for (const auto& c : classes)
    if (c.class_id == class_id)
      for (const auto& s : c.states)
        if (s.state_id == state_id) return true;
  return false;
}

const CarrierModeParams& CarrierCatalog::lookup(const std::string& carrier_id,
                                                int mode_id) const {
  auto it = modes.find(carrier_id);
  if (it == modes.end()) throw RuntimeError("unknown carrier id " + carrier_id);
  for (const auto& m : it->second)
    if (m.mode_id == mode_id) return m;
  throw RuntimeError("unknown mode " + std::to_string(mode_id) + " for carrier " +
                     carrier_id);
}

int StateSchedule::active_at(double t) const {
  if (entries.empty()) throw RuntimeError("empty state schedule");
  int id = entries.front().state_id;
  for (const auto& e : entries)
    if (e.t_start_s <= t) id = e.state_id;
  return id;
}

namespace {

// Splits v into components parallel/perpendicular to the (unit) turn axis and
// rotates the perpendicular part; exact closed form for a constant-rate turn.
void turn_step(const Vec3& axis, double omega, double dt, const Vec3& r0,
               const Vec3& v0, Vec3& r1, Vec3& v1) {
  const Vec3 v_par = axis.dot(v0) * axis;
  const Vec3 v_perp = v0 - v_par;
  const double a = omega * dt;
  const double c = std::cos(a), s = std::sin(a);
  const Vec3 w = axis.cross(v_perp);
  v1 = v_par + c * v_perp + s * w;
  if (std::abs(omega) < 1e-12) {
    r1 = r0 + v0 * dt;
  } else {
    r1 = r0 + v_par * dt + (s / omega) * v_perp + ((1.0 - c) / omega) * w;
  }
}

}  // namespace

KinematicState propagate(const KinematicState& state, const MotionModel& model,
                         double dt_s, std::mt19937_64& rng) {
  if (!(dt_s > 0.0)) throw RuntimeError("propagate requires dt > 0");
  KinematicState out;
  out.time_s = state.time_s + dt_s;

  // process noise as a constant random acceleration over the step; variance
  // q/dt per axis gives velocity variance q*dt
  Vec3 w = Vec3::Zero();
  if (model.noise_intensity > 0.0) {
    std::normal_distribution<double> n(0.0, std::sqrt(model.noise_intensity / dt_s));
    w = Vec3(n(rng), n(rng), n(rng));
  }

  switch (model.kind) {
    case MotionKind::ConstantVelocity: {
      out.position_m = state.position_m + state.velocity_mps * dt_s;
      out.velocity_mps = state.velocity_mps;
      out.acceleration_mps2 = Vec3::Zero();
      break;
    }
    case MotionKind::ConstantAcceleration: {
      const Vec3& a = state.acceleration_mps2;
      out.position_m = state.position_m + state.velocity_mps * dt_s + 0.5 * a * dt_s * dt_s;
      out.velocity_mps = state.velocity_mps + a * dt_s;
      out.acceleration_mps2 = a;
      break;
    }
    case MotionKind::CoordinatedTurn: {
      turn_step(model.turn_axis.normalized(), model.turn_rate_radps, dt_s,
                state.position_m, state.velocity_mps, out.position_m, out.velocity_mps);
      out.acceleration_mps2 =
          model.turn_rate_radps * model.turn_axis.normalized().cross(out.velocity_mps);
      break;
    }
  }
  if (model.noise_intensity > 0.0) {
    out.position_m += 0.5 * w * dt_s * dt_s;
    out.velocity_mps += w * dt_s;
  }
  return out;
}

namespace {

void clip_to_bounds(KinematicState& s, const KinematicBounds& b, double t,
                    const geodesy::EllipsoidModel* ellipsoid,
                    std::vector<ClipEvent>& events) {
  const double speed = s.velocity_mps.norm();
  if (speed > b.speed_max_mps) {
    s.velocity_mps *= b.speed_max_mps / speed;
    events.push_back({t, ClipEvent::What::Speed});
  } else if (speed < b.speed_min_mps && speed > 0.0) {
    s.velocity_mps *= b.speed_min_mps / speed;
    events.push_back({t, ClipEvent::What::Speed});
  }
  const double acc = s.acceleration_mps2.norm();
  if (acc > b.accel_max_mps2) {
    s.acceleration_mps2 *= b.accel_max_mps2 / acc;
    events.push_back({t, ClipEvent::What::Accel});
  }
  if (ellipsoid != nullptr) {
    auto g = geodesy::ecef_to_geodetic(geodesy::EcefVector::from(s.position_m), *ellipsoid);
    double target = g.altitude_m;
    if (g.altitude_m < b.alt_min_m) target = b.alt_min_m;
    if (g.altitude_m > b.alt_max_m) target = b.alt_max_m;
    if (target != g.altitude_m) {
      const auto frame = geodesy::local_enu_frame(g, *ellipsoid);
      s.position_m += frame.up * (target - g.altitude_m);
      events.push_back({t, ClipEvent::What::Altitude});
    }
  }
}

}  // namespace

Trajectory simulate_trajectory(const KinematicState& initial, int class_id,
                               const StateSchedule& schedule,
                               const ObjectClassCatalog& catalog, double dt_s,
                               int n_steps, std::uint64_t seed,
                               const geodesy::EllipsoidModel* ellipsoid) {
  if (!(dt_s > 0.0)) throw RuntimeError("simulate_trajectory requires dt > 0");
  std::vector<double> times(n_steps + 1);
  for (int k = 0; k <= n_steps; ++k) times[k] = initial.time_s + k * dt_s;
  return simulate_trajectory_at(initial, class_id, schedule, catalog, times, seed,
                                ellipsoid);
}

Trajectory simulate_trajectory_at(const KinematicState& initial, int class_id,
                                  const StateSchedule& schedule,
                                  const ObjectClassCatalog& catalog,
                                  const std::vector<double>& times_s, std::uint64_t seed,
                                  const geodesy::EllipsoidModel* ellipsoid) {
  if (times_s.empty()) throw RuntimeError("empty timeline");
  if (times_s.front() != initial.time_s)
    throw RuntimeError("timeline must start at the initial state time");
  for (std::size_t i = 1; i < times_s.size(); ++i)
    if (times_s[i] <= times_s[i - 1])
      throw RuntimeError("timeline must be strictly increasing");
  if (schedule.entries.empty()) throw RuntimeError("empty state schedule");
  for (std::size_t i = 1; i < schedule.entries.size(); ++i)
    if (schedule.entries[i].t_start_s <= schedule.entries[i - 1].t_start_s)
      throw RuntimeError("schedule times must be strictly increasing");
  for (const auto& e : schedule.entries)
    if (!catalog.has(class_id, e.state_id))
      throw RuntimeError("schedule references unknown state " + std::to_string(e.state_id));

  const ObjectClass& cls = catalog.cls(class_id);
  Trajectory traj;
  KinematicState cur = initial;
  int active = schedule.active_at(initial.time_s);
  auto enter_state = [&](int sid, KinematicState& st) {
    const MotionModel& m = cls.state(sid).model;
    if (m.kind == MotionKind::ConstantAcceleration) st.acceleration_mps2 = m.nominal_accel_mps2;
    if (m.kind == MotionKind::ConstantVelocity) st.acceleration_mps2 = Vec3::Zero();
    if (m.kind == MotionKind::CoordinatedTurn)
      st.acceleration_mps2 =
          m.turn_rate_radps * m.turn_axis.normalized().cross(st.velocity_mps);
  };
  enter_state(active, cur);
  clip_to_bounds(cur, cls.state(active).model.bounds, cur.time_s, ellipsoid,
                 traj.clip_events);
  traj.samples.push_back(cur);
  traj.state_ids.push_back(active);

  for (std::size_t k = 1; k < times_s.size(); ++k) {
    const double dt = times_s[k] - times_s[k - 1];
    const int sid = schedule.active_at(times_s[k - 1] + 0.5 * dt);
    if (sid != active) {
      active = sid;
      enter_state(active, cur);
    }
    const MotionModel& model = cls.state(active).model;
    auto rng = make_rng(mix_seed(seed, 0x7472616aULL, static_cast<std::uint64_t>(k)));
    cur = propagate(cur, model, dt, rng);
    clip_to_bounds(cur, model.bounds, cur.time_s, ellipsoid, traj.clip_events);
    traj.samples.push_back(cur);
    traj.state_ids.push_back(active);
  }
  return traj;
}

std::vector<CarrierState> carrier_path(const CarrierState& initial, double dt_s,
                                       int n_steps) {
  std::vector<CarrierState> out;
  out.reserve(n_steps + 1);
  out.push_back(initial);
  for (int k = 1; k <= n_steps; ++k) {
    CarrierState s = initial;
    s.time_s = initial.time_s + k * dt_s;
    s.position_m = initial.position_m + initial.velocity_mps * (k * dt_s);
    out.push_back(s);
  }
  return out;
}

CarrierState carrier_state_at(const CarrierState& initial, double t_s) {
  CarrierState s = initial;
  s.time_s = t_s;
  s.position_m = initial.position_m + initial.velocity_mps * (t_s - initial.time_s);
  return s;
}

std::string serialize(const Trajectory& t) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    const auto& s = t.samples[i];
    os << s.time_s << ',' << t.state_ids[i];
    for (int j = 0; j < 3; ++j) os << ',' << s.position_m[j];
    for (int j = 0; j < 3; ++j) os << ',' << s.velocity_mps[j];
    for (int j = 0; j < 3; ++j) os << ',' << s.acceleration_mps2[j];
    os << '\n';
  }
  return os.str();
}

}  // namespace neos::scene
