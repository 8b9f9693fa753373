#pragma once

#include <map>
#include <set>

#include "neos/scenario.hpp"

namespace neos::fusion {

/// One published observation event. Timestamps inside the payload are stamped
/// by the source clock; merge_field converts them back with known offsets.
struct EventRecord {
  std::uint64_t seq = 0;  // unique per source
  std::string source_id;
  sensor::Measurement payload;
  double emission_time_s = 0.0;
};

struct LinkModel {
  double latency_mean_s = 0.0;
  double jitter_std_s = 0.0;
  double loss_prob = 0.0;
  double clock_offset_s = 0.0;  // receiver clock minus true time
  double clock_drift_sps = 0.0;
};

struct Delivery {
  bool delivered = false;
  double arrival_time_s = 0.0;
};

/// Bernoulli loss, then arrival = emission + max(0, latency + jitter) +
/// receiver clock offset (plus drift-scaled emission when configured).
Delivery publish(const EventRecord& record, const LinkModel& link, std::mt19937_64& rng);

/// The single event-coordinate-time field visible to one fusion node:
/// clock-corrected, time-ordered, deduplicated by (source, seq).
struct EventField {
  std::vector<EventRecord> records;  // payload timestamps corrected
};

EventField merge_field(std::vector<EventRecord> records,
                       const std::map<std::string, double>& clock_offsets,
                       const std::set<std::string>& declared_sources);

struct NodeMetrics {
  double range_rmse_m = 0.0;
  double mean_true_range_m = 0.0;
  double rel_range_error_final = 0.0;
  bool class_correct = false;
  double convergence_time_s = -1.0;  // first time rel. range error stays < 5%; -1 if never
  int n_measurements = 0;
};

struct EventLogEntry {
  std::string node_id;
  std::string source_id;
  std::uint64_t seq = 0;
  double emission_time_s = 0.0;
  bool delivered = false;
  double arrival_time_s = 0.0;
};

struct GroupRunResult {
  std::vector<std::string> node_ids;
  std::map<std::string, filter::EstimateSet> estimates;
  std::map<std::string, NodeMetrics> metrics;
  std::vector<EventLogEntry> event_log;
  scene::Trajectory truth;
  std::vector<double> truth_times_s;
};

/// End-to-end group scenario: truth simulation, per-carrier synthesis,
/// publish/merge into per-node fields, per-node joint solve, metrics.
GroupRunResult run_group_scenario(const harness::ScenarioSpec& spec, std::uint64_t seed);

/// Synthesis only: ground truth plus the chronological measurement stream of
/// every carrier (true timestamps, no transport layer).
struct SimulationProducts {
  std::vector<sensor::Measurement> measurements;
  scene::Trajectory truth;
};
SimulationProducts simulate_group(const harness::ScenarioSpec& spec, std::uint64_t seed);

/// Direct single-carrier path (no network layer); reference for the
/// degenerate-network equivalence property.
filter::EstimateSet run_direct_single_carrier(const harness::ScenarioSpec& spec,
                                              std::uint64_t seed,
                                              std::size_t carrier_index = 0);

enum class SweepAxis { BaselineM, CarrierCount, LossProb };
SweepAxis sweep_axis_from_string(const std::string& s);
std::string to_string(SweepAxis a);

struct SweepRow {
  double axis_value = 0.0;
  int n_seeds = 0;
  double range_rmse_m = 0.0;        // mean over seeds and nodes
  double class_accuracy = 0.0;      // fraction of correct classifications
  double convergence_time_s = -1.0;  // mean over converged runs
  double geom_tri_error_m = 0.0;    // fixed-tilt two-ray triangulation error
};

struct SweepTable {
  SweepAxis axis = SweepAxis::BaselineM;
  std::vector<SweepRow> rows;
};

/// Applies one sweep-axis value to a scenario (repositioned baselines,
/// truncated carrier list, or overridden link loss).
harness::ScenarioSpec apply_sweep_value(const harness::ScenarioSpec& spec,
                                        SweepAxis axis, double value);

/// One run_group_scenario batch per axis value with the scenario's fixed seed
/// list; one row per value.
SweepTable degradation_sweep(const harness::ScenarioSpec& spec, SweepAxis axis,
                             const std::vector<double>& values);

}  // namespace neos::fusion
