#pragma once

#include <array>
#include <optional>

#include "neos/filter.hpp"

namespace neos::harness {

/// One carrier of the group: a constant-velocity platform expressed in the
/// local east/north/up frame of the scenario anchor.
struct CarrierSpec {
  std::string id;
  Vec3 initial_pos_enu_m = Vec3::Zero();
  Vec3 velocity_enu_mps = Vec3::Zero();
  Quat attitude = Quat::Identity();
  int mode = 1;
  std::vector<scene::CarrierModeParams> modes;
  double clock_offset_s = 0.0;
  double frame_phase_s = 0.0;  // shutter stagger relative to t = 0
};

struct TargetSpec {
  int class_id = 1;
  scene::StateSchedule schedule;
  Vec3 initial_pos_enu_m = Vec3::Zero();
  Vec3 initial_vel_enu_mps = Vec3::Zero();
  Vec3 initial_acc_enu_mps2 = Vec3::Zero();
};

struct LinkSpec {
  double latency_mean_s = 0.0;
  double jitter_std_s = 0.0;
  double loss_prob = 0.0;
};

struct SensorSpec {
  sensor::LayoutId layout = sensor::LayoutId::Cube6;
  int fpa_cols = 1024;
  int fpa_rows = 1024;
  bool quantize_pixels = false;
  double pos_noise_std_m = 0.0;
};

struct FilterSpec {
  filter::FilterSettings settings;
  std::vector<filter::SoftConstraint> constraints;
  std::vector<double> grid_times_s;  // empty: use the merged measurement times
};

struct SweepSpec {
  std::string axis;  // baseline_m | carrier_count | loss_prob
  std::vector<double> values;
};

/// Data rate (arbitrary units) leaving each of the 11 processing stages; the
/// cost of a stage boundary is the rate crossing it. Declining by default:
/// raw pixels down to command words.
struct CostModelSpec {
  std::array<double, 11> stage_rates = {1e6, 3e4, 3e3, 1e3, 300, 100, 30, 10, 3, 1, 0.3};
  double carrier_weight = 0.0;
  double frame_rate_weight = 0.0;
  double bandwidth_weight = 0.0;
};

struct BoundsSpec {
  double lo = 0.0;
  double hi = 0.0;
  bool integer = false;
};

struct OptimizeSpec {
  // DE controls
  int population = 16;
  double weight_f = 0.7;
  double crossover = 0.9;
  int max_generations = 20;
  std::uint64_t seed = 1;
  // objective weights
  double w_rmse = 1.0;
  double w_class = 1.0;
  double w_cost = 0.0;
  double failure_penalty = 1e3;
  double rmse_cap = 2.0;  // relative RMSE is clipped here before weighting
  CostModelSpec cost_model;
  // decision-variable bounds, keyed by variable name
  std::map<std::string, BoundsSpec> bounds;
};

struct ScenarioSpec {
  std::string name;
  std::vector<std::uint64_t> seeds;
  geodesy::EllipsoidModel ellipsoid = geodesy::wgs84();
  geodesy::GeodeticCoord anchor;
  geodesy::TerrainMap terrain = geodesy::TerrainMap::flat(0.0);
  geodesy::AtmosphereModel atmosphere;
  scene::ObjectClassCatalog catalog;
  TargetSpec target;
  std::vector<CarrierSpec> carriers;
  SensorSpec sensor;
  LinkSpec link;
  FilterSpec filter;
  double duration_s = 3.0;
  std::optional<SweepSpec> sweep;
  std::optional<OptimizeSpec> optimize;

  geodesy::Environment environment() const;
  Vec3 enu_to_ecef(const Vec3& enu) const;
  Vec3 enu_dir_to_ecef(const Vec3& enu) const;  // direction only, no origin shift
  Vec3 local_up() const;
  scene::CarrierCatalog carrier_catalog() const;
  scene::CarrierState carrier_initial_state(const CarrierSpec& c) const;
};

/// Parses and validates a scenario file (JSON). Throws ScenarioError with the
/// offending field path on any schema violation.
ScenarioSpec load_scenario(const std::string& path);
ScenarioSpec parse_scenario(const std::string& json_text);

}  // namespace neos::harness
