#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "neos/geodesy.hpp"

namespace neos::scene {

/// One sample of an object's kinematics: the (position, velocity,
/// acceleration) column triple at a time instant.
struct KinematicState {
  double time_s = 0.0;
  Vec3 position_m = Vec3::Zero();
  Vec3 velocity_mps = Vec3::Zero();
  Vec3 acceleration_mps2 = Vec3::Zero();
};

/// Kinematic envelope of one (class, state) pair.
struct KinematicBounds {
  double speed_min_mps = 0.0;
  double speed_max_mps = 1e9;
  double accel_max_mps2 = 1e9;
  double alt_min_m = -1e9;
  double alt_max_m = 1e9;
};

enum class MotionKind { ConstantVelocity, ConstantAcceleration, CoordinatedTurn };

MotionKind motion_kind_from_string(const std::string& s);
std::string to_string(MotionKind k);

struct MotionModel {
  MotionKind kind = MotionKind::ConstantVelocity;
  double noise_intensity = 0.0;  // acceleration spectral density, m^2/s^3
  // CoordinatedTurn parameters
  double turn_rate_radps = 0.0;
  Vec3 turn_axis = Vec3(0, 0, 1);
  // ConstantAcceleration: acceleration adopted when a trajectory enters the state
  Vec3 nominal_accel_mps2 = Vec3::Zero();
  KinematicBounds bounds;
};

/// One behavioral state of an object class.
struct ObjectState {
  int state_id = 1;
  MotionModel model;
  double preferred_heading_rad = 0.0;
};

struct ObjectClass {
  int class_id = 1;
  std::string name;
  std::vector<ObjectState> states;
  // row i -> rates (1/s) of leaving state i for state j; square, diagonal ignored
  MatX transition_rates_per_s;

  const ObjectState& state(int state_id) const;
};

struct ObjectClassCatalog {
  std::vector<ObjectClass> classes;

  const ObjectClass& cls(int class_id) const;
  bool has(int class_id, int state_id) const;
};

/// Per-mode parameters of a direct-finder carrier.
struct CarrierModeParams {
  int mode_id = 1;
  double bearing_noise_std_rad = 0.0;
  double frame_rate_hz = 10.0;
  double detect_range_min_m = 1e3;
  double detect_range_max_m = 1e5;
};

struct CarrierState {
  double time_s = 0.0;
  Vec3 position_m = Vec3::Zero();
  Vec3 velocity_mps = Vec3::Zero();
  Quat attitude = Quat::Identity();  // body -> rectangular frame
  int mode = 1;
  CarrierModeParams mode_params;
};

/// Mode parameter tables of every declared carrier, keyed by carrier id.
struct CarrierCatalog {
  std::map<std::string, std::vector<CarrierModeParams>> modes;

  const CarrierModeParams& lookup(const std::string& carrier_id, int mode_id) const;
};

struct ClipEvent {
  double time_s = 0.0;
  enum class What { Speed, Accel, Altitude } what = What::Speed;
};

struct Trajectory {
  std::vector<KinematicState> samples;  // strictly increasing times
  std::vector<int> state_ids;           // active state per sample
  std::vector<ClipEvent> clip_events;

  const KinematicState& at(std::size_t i) const { return samples[i]; }
  std::size_t size() const { return samples.size(); }
};

/// (state id, activation time) entries, times strictly increasing; first
/// entry must activate at or before the trajectory start.
struct StateSchedule {
  struct Entry {
    int state_id = 1;
    double t_start_s = 0.0;
  };
  std::vector<Entry> entries;

  int active_at(double t) const;
};

/// One discrete propagation step. With zero process noise the constant
/// velocity / constant acceleration / coordinated turn kinematics are exact.
KinematicState propagate(const KinematicState& state, const MotionModel& model,
                         double dt_s, std::mt19937_64& rng);

inline KinematicState propagate(const KinematicState& state, const MotionModel& model,
                                double dt_s, std::uint64_t noise_seed) {
  auto rng = make_rng(noise_seed);
  return propagate(state, model, dt_s, rng);
}

/// Piecewise propagation over a state schedule at a fixed step. Bound
/// violations are clipped and logged. Output has n_steps+1 samples. Pass an
/// ellipsoid to enforce the altitude band (geodetic altitude); omit it for
/// frame-agnostic scenarios.
Trajectory simulate_trajectory(const KinematicState& initial, int class_id,
                               const StateSchedule& schedule,
                               const ObjectClassCatalog& catalog, double dt_s,
                               int n_steps, std::uint64_t seed,
                               const geodesy::EllipsoidModel* ellipsoid = nullptr);

/// Piecewise propagation across an explicit, strictly increasing timeline
/// (union of sensor frame times and estimation grid times). The first entry
/// must equal initial.time_s.
Trajectory simulate_trajectory_at(const KinematicState& initial, int class_id,
                                  const StateSchedule& schedule,
                                  const ObjectClassCatalog& catalog,
                                  const std::vector<double>& times_s, std::uint64_t seed,
                                  const geodesy::EllipsoidModel* ellipsoid = nullptr);

/// Constant-velocity carrier path sampled at the carrier frame rate.
std::vector<CarrierState> carrier_path(const CarrierState& initial, double dt_s,
                                       int n_steps);

/// Carrier state of a constant-velocity carrier at an arbitrary time.
CarrierState carrier_state_at(const CarrierState& initial, double t_s);

std::string serialize(const Trajectory& t);  // deterministic, for hashing

}  // namespace neos::scene
