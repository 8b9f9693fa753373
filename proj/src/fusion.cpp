#include "neos/fusion.hpp"

#include <algorithm>
#include <cmath>

namespace neos::fusion {

namespace {

constexpr std::uint64_t kTagTruth = 0x54525554ULL;
constexpr std::uint64_t kTagMeas = 0x4d454153ULL;
constexpr std::uint64_t kTagLink = 0x4c494e4bULL;

}  // namespace

Delivery publish(const EventRecord& record, const LinkModel& link, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  // draws happen unconditionally so the stream layout does not depend on
  // parameter values
  const double u = u01(rng);
  const double jitter = link.jitter_std_s * n01(rng);
  if (u < link.loss_prob) return {false, 0.0};
  const double transport = std::max(0.0, link.latency_mean_s + jitter);
  const double receiver_clock =
      link.clock_offset_s + link.clock_drift_sps * record.emission_time_s;
  return {true, record.emission_time_s + transport + receiver_clock};
}

EventField merge_field(std::vector<EventRecord> records,
                       const std::map<std::string, double>& clock_offsets,
                       const std::set<std::string>& declared_sources) {
  for (auto& r : records) {
    if (!declared_sources.count(r.source_id))
      throw RuntimeError("record from undeclared carrier " + r.source_id);
    const auto it = clock_offsets.find(r.source_id);
    const double off = it == clock_offsets.end() ? 0.0 : it->second;
    r.payload.t_s -= off;
    r.emission_time_s -= off;
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const EventRecord& a, const EventRecord& b) {
                     if (a.payload.t_s != b.payload.t_s) return a.payload.t_s < b.payload.t_s;
                     if (a.source_id != b.source_id) return a.source_id < b.source_id;
                     return a.seq < b.seq;
                   });
  EventField field;
  std::set<std::pair<std::string, std::uint64_t>> seen;
  for (auto& r : records)
    if (seen.insert({r.source_id, r.seq}).second) field.records.push_back(std::move(r));
  return field;
}

SweepAxis sweep_axis_from_string(const std::string& s) {
  if (s == "baseline_m") return SweepAxis::BaselineM;
  if (s == "carrier_count") return SweepAxis::CarrierCount;
  if (s == "loss_prob") return SweepAxis::LossProb;
  throw RuntimeError("unknown sweep axis: " + s);
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::BaselineM: return "baseline_m";
    case SweepAxis::CarrierCount: return "carrier_count";
    case SweepAxis::LossProb: return "loss_prob";
  }
  return "?";
}

namespace {

struct TruthTimeline {
  std::vector<double> times;
  scene::Trajectory traj;

  const scene::KinematicState* at(double t) const {
    auto it = std::lower_bound(times.begin(), times.end(), t - 1e-9);
    if (it == times.end() || std::abs(*it - t) > 1e-9) return nullptr;
    return &traj.samples[std::size_t(it - times.begin())];
  }
};

std::vector<double> carrier_frame_times(const harness::CarrierSpec& c, double duration_s) {
  const auto mode = std::find_if(c.modes.begin(), c.modes.end(),
                                 [&](const auto& m) { return m.mode_id == c.mode; });
  if (mode == c.modes.end()) throw RuntimeError("carrier " + c.id + " active mode missing");
  const double dt = 1.0 / mode->frame_rate_hz;
  std::vector<double> times;
  for (int k = 0;; ++k) {
    const double t = c.frame_phase_s + k * dt;
    if (t > duration_s + 1e-9) break;
    times.push_back(t);
  }
  return times;
}

TruthTimeline simulate_truth(const harness::ScenarioSpec& spec, std::uint64_t seed) {
  std::vector<double> times{0.0};
  for (const auto& c : spec.carriers) {
    const auto ft = carrier_frame_times(c, spec.duration_s);
    times.insert(times.end(), ft.begin(), ft.end());
  }
  for (double t : spec.filter.grid_times_s)
    if (t >= 0.0) times.push_back(t);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  scene::KinematicState initial;
  initial.time_s = 0.0;
  initial.position_m = spec.enu_to_ecef(spec.target.initial_pos_enu_m);
  initial.velocity_mps = spec.enu_dir_to_ecef(spec.target.initial_vel_enu_mps);
  initial.acceleration_mps2 = spec.enu_dir_to_ecef(spec.target.initial_acc_enu_mps2);

  TruthTimeline tl;
  tl.times = times;
  tl.traj = scene::simulate_trajectory_at(initial, spec.target.class_id,
                                          spec.target.schedule, spec.catalog, times,
                                          mix_seed(seed, kTagTruth), &spec.ellipsoid);
  return tl;
}

std::vector<EventRecord> synthesize_carrier_records(
    const harness::ScenarioSpec& spec, const sensor::SensorArray& array,
    const geodesy::Environment& env, const TruthTimeline& truth, std::size_t ci,
    std::uint64_t seed) {
  const auto& c = spec.carriers[ci];
  const auto frame_times = carrier_frame_times(c, spec.duration_s);
  const scene::CarrierState initial = spec.carrier_initial_state(c);
  sensor::SynthesisOptions opts;
  opts.quantize_to_pixel = spec.sensor.quantize_pixels;

  const auto mode = std::find_if(c.modes.begin(), c.modes.end(),
                                 [&](const auto& m) { return m.mode_id == c.mode; });
  sensor::NoiseParams noise{spec.sensor.pos_noise_std_m, mode->bearing_noise_std_rad};

  std::vector<EventRecord> records;
  records.reserve(frame_times.size());
  for (std::size_t k = 0; k < frame_times.size(); ++k) {
    const double t = frame_times[k];
    const auto* target = truth.at(t);
    if (target == nullptr) throw RuntimeError("truth timeline missing frame time");
    const scene::CarrierState cs = scene::carrier_state_at(initial, t);
    auto rng = make_rng(mix_seed(seed, kTagMeas, ci, k));
    EventRecord rec;
    rec.seq = k;
    rec.source_id = c.id;
    rec.payload =
        sensor::synthesize_measurement(cs, *target, array, noise, rng, &env, opts, c.id);
    rec.payload.t_s += c.clock_offset_s;  // stamped by the source clock
    rec.emission_time_s = t + c.clock_offset_s;
    records.push_back(std::move(rec));
  }
  return records;
}

filter::EstimateSet solve_node(const harness::ScenarioSpec& spec,
                               const geodesy::Environment& env,
                               const std::vector<sensor::Measurement>& measurements) {
  auto obs = sensor::assemble_observation_set(measurements);
  filter::EstimationGrid grid;
  if (!spec.filter.grid_times_s.empty()) {
    grid.times_s = spec.filter.grid_times_s;
  } else {
    grid.times_s.reserve(obs.size());
    for (std::size_t k = 0; k < obs.size(); ++k)
      if (grid.times_s.empty() || obs[k].t_s > grid.times_s.back())
        grid.times_s.push_back(obs[k].t_s);
  }
  return filter::solve(obs, grid, spec.catalog, spec.carrier_catalog(), &env,
                       spec.filter.constraints, spec.filter.settings);
}

NodeMetrics compute_metrics(const harness::ScenarioSpec& spec,
                            const filter::EstimateSet& est, const TruthTimeline& truth,
                            const scene::CarrierState& node_initial) {
  NodeMetrics m;
  m.class_correct = est.class_id_hat == spec.target.class_id;

  double sq_sum = 0.0, range_sum = 0.0;
  int n = 0;
  for (const auto& g : est.grid) {
    const auto* ts = truth.at(g.t_s);
    if (ts == nullptr) continue;
    const Vec3 cp = scene::carrier_state_at(node_initial, g.t_s).position_m;
    const double est_range = (g.mean.segment<3>(0) - cp).norm();
    const double true_range = (ts->position_m - cp).norm();
    sq_sum += (est_range - true_range) * (est_range - true_range);
    range_sum += true_range;
    ++n;
    if (&g == &est.grid.back() && true_range > 0.0)
      m.rel_range_error_final = std::abs(est_range - true_range) / true_range;
  }
  m.range_rmse_m = n > 0 ? std::sqrt(sq_sum / n) : -1.0;
  m.mean_true_range_m = n > 0 ? range_sum / n : 0.0;

  // causal convergence: first frame after which the relative range error of
  // the running mixture stays below 5%
  std::vector<std::pair<double, double>> rel;  // (t, rel error)
  for (const auto& f : est.frames) {
    const auto* ts = truth.at(f.t_s);
    if (ts == nullptr) continue;
    const Vec3 cp = scene::carrier_state_at(node_initial, f.t_s).position_m;
    const double est_range = (f.mean.segment<3>(0) - cp).norm();
    const double true_range = (ts->position_m - cp).norm();
    if (true_range > 0.0) rel.push_back({f.t_s, std::abs(est_range - true_range) / true_range});
  }
  m.convergence_time_s = -1.0;
  for (std::size_t i = 0; i < rel.size(); ++i) {
    bool ok = true;
    for (std::size_t j = i; j < rel.size(); ++j) ok = ok && rel[j].second < 0.05;
    if (ok) {
      m.convergence_time_s = rel[i].first;
      break;
    }
  }
  return m;
}

}  // namespace

GroupRunResult run_group_scenario(const harness::ScenarioSpec& spec, std::uint64_t seed) {
  if (spec.carriers.empty()) throw RuntimeError("scenario declares no carriers");
  const geodesy::Environment env = spec.environment();
  const auto array =
      sensor::build_tiling(spec.sensor.layout, spec.sensor.fpa_cols, spec.sensor.fpa_rows);
  const TruthTimeline truth = simulate_truth(spec, seed);

  std::vector<std::vector<EventRecord>> per_carrier;
  for (std::size_t ci = 0; ci < spec.carriers.size(); ++ci)
    per_carrier.push_back(synthesize_carrier_records(spec, array, env, truth, ci, seed));

  std::map<std::string, double> offsets;
  std::set<std::string> declared;
  for (const auto& c : spec.carriers) {
    offsets[c.id] = c.clock_offset_s;
    declared.insert(c.id);
  }

  GroupRunResult result;
  result.truth = truth.traj;
  result.truth_times_s = truth.times;

  for (std::size_t ni = 0; ni < spec.carriers.size(); ++ni) {
    const auto& node = spec.carriers[ni];
    result.node_ids.push_back(node.id);

    std::vector<EventRecord> delivered;
    for (std::size_t ci = 0; ci < spec.carriers.size(); ++ci) {
      for (const auto& rec : per_carrier[ci]) {
        EventLogEntry log;
        log.node_id = node.id;
        log.source_id = rec.source_id;
        log.seq = rec.seq;
        log.emission_time_s = rec.emission_time_s;
        if (ci == ni) {  // the node sees its own stream directly
          log.delivered = true;
          log.arrival_time_s = rec.emission_time_s;
          delivered.push_back(rec);
        } else {
          LinkModel link{spec.link.latency_mean_s, spec.link.jitter_std_s,
                         spec.link.loss_prob, 0.0, 0.0};
          auto rng = make_rng(mix_seed(seed, kTagLink, ci * 4096 + ni, rec.seq));
          const Delivery d = publish(rec, link, rng);
          log.delivered = d.delivered;
          log.arrival_time_s = d.arrival_time_s;
          if (d.delivered) delivered.push_back(rec);
        }
        result.event_log.push_back(std::move(log));
      }
    }

    const EventField field = merge_field(std::move(delivered), offsets, declared);
    std::vector<sensor::Measurement> meas;
    meas.reserve(field.records.size());
    for (const auto& r : field.records) meas.push_back(r.payload);
    if (meas.size() < 3)
      throw RuntimeError("node " + node.id + " received fewer than 3 observations");

    auto est = solve_node(spec, env, meas);
    result.metrics[node.id] =
        compute_metrics(spec, est, truth, spec.carrier_initial_state(node));
    result.metrics[node.id].n_measurements = static_cast<int>(meas.size());
    result.estimates[node.id] = std::move(est);
  }
  return result;
}

SimulationProducts simulate_group(const harness::ScenarioSpec& spec, std::uint64_t seed) {
  const geodesy::Environment env = spec.environment();
  const auto array =
      sensor::build_tiling(spec.sensor.layout, spec.sensor.fpa_cols, spec.sensor.fpa_rows);
  const TruthTimeline truth = simulate_truth(spec, seed);
  SimulationProducts out;
  out.truth = truth.traj;
  for (std::size_t ci = 0; ci < spec.carriers.size(); ++ci) {
    for (auto& rec : synthesize_carrier_records(spec, array, env, truth, ci, seed)) {
      rec.payload.t_s -= spec.carriers[ci].clock_offset_s;  // back to true time
      out.measurements.push_back(std::move(rec.payload));
    }
  }
  out.measurements =
      sensor::assemble_observation_set(std::move(out.measurements)).measurements;
  return out;
}

filter::EstimateSet run_direct_single_carrier(const harness::ScenarioSpec& spec,
                                              std::uint64_t seed,
                                              std::size_t carrier_index) {
  if (carrier_index >= spec.carriers.size())
    throw RuntimeError("carrier index out of range");
  const geodesy::Environment env = spec.environment();
  const auto array =
      sensor::build_tiling(spec.sensor.layout, spec.sensor.fpa_cols, spec.sensor.fpa_rows);
  const TruthTimeline truth = simulate_truth(spec, seed);
  const auto records =
      synthesize_carrier_records(spec, array, env, truth, carrier_index, seed);
  std::vector<sensor::Measurement> meas;
  meas.reserve(records.size());
  for (const auto& r : records) {
    sensor::Measurement m = r.payload;
    m.t_s -= spec.carriers[carrier_index].clock_offset_s;
    meas.push_back(std::move(m));
  }
  return solve_node(spec, env, meas);
}

harness::ScenarioSpec apply_sweep_value(const harness::ScenarioSpec& spec,
                                        SweepAxis axis, double value) {
  harness::ScenarioSpec out = spec;
  switch (axis) {
    case SweepAxis::BaselineM: {
      if (out.carriers.size() < 2)
        throw RuntimeError("baseline sweep needs at least 2 carriers");
      const Vec3 base = out.carriers[0].initial_pos_enu_m;
      for (std::size_t i = 1; i < out.carriers.size(); ++i) {
        Vec3 offset = out.carriers[i].initial_pos_enu_m - base;
        const double norm = offset.norm();
        if (norm == 0.0) throw RuntimeError("coincident carriers in baseline sweep");
        out.carriers[i].initial_pos_enu_m = base + offset / norm * value;
      }
      break;
    }
    case SweepAxis::CarrierCount: {
      const auto n = static_cast<std::size_t>(std::llround(value));
      if (n < 1 || n > spec.carriers.size())
        throw RuntimeError("carrier_count sweep value out of range");
      out.carriers.resize(n);
      break;
    }
    case SweepAxis::LossProb: {
      if (value < 0.0 || value >= 1.0) throw RuntimeError("loss_prob must be in [0,1)");
      out.link.loss_prob = value;
      break;
    }
  }
  return out;
}

namespace {

// two-ray triangulation error against truth with a fixed small tilt applied
// to each true line of sight; isolates the geometric factor from noise
double geometry_probe_error(const harness::ScenarioSpec& spec) {
  if (spec.carriers.size() < 2) return -1.0;
  const Vec3 target = spec.enu_to_ecef(spec.target.initial_pos_enu_m);
  constexpr double tilt = 0.5e-3;
  std::array<sensor::Measurement, 2> ms;
  for (int i = 0; i < 2; ++i) {
    const Vec3 cp = spec.enu_to_ecef(spec.carriers[i].initial_pos_enu_m);
    const Vec3 los = (target - cp).normalized();
    Vec3 e1, e2;
    tangent_basis(los, e1, e2);
    ms[i].carrier_pos_meas_m = cp;
    ms[i].los_dir_meas = (los + tilt * e1).normalized();
  }
  const auto tri = filter::triangulate_baseline(ms[0], ms[1]);
  return (tri.point_m - target).norm();
}

}  // namespace

SweepTable degradation_sweep(const harness::ScenarioSpec& spec, SweepAxis axis,
                             const std::vector<double>& values) {
  if (values.size() < 2) throw RuntimeError("sweep needs at least 2 values");
  if (spec.seeds.empty()) throw RuntimeError("scenario declares no seeds");
  SweepTable table;
  table.axis = axis;
  for (const double v : values) {
    const auto cfg = apply_sweep_value(spec, axis, v);
    SweepRow row;
    row.axis_value = v;
    row.n_seeds = static_cast<int>(spec.seeds.size());
    double rmse_sum = 0.0;
    int rmse_n = 0, class_n = 0, class_ok = 0;
    double conv_sum = 0.0;
    int conv_n = 0;
    for (const auto seed : spec.seeds) {
      const auto run = run_group_scenario(cfg, seed);
      for (const auto& [node, m] : run.metrics) {
        if (m.range_rmse_m >= 0.0) {
          rmse_sum += m.range_rmse_m;
          ++rmse_n;
        }
        ++class_n;
        if (m.class_correct) ++class_ok;
        if (m.convergence_time_s >= 0.0) {
          conv_sum += m.convergence_time_s;
          ++conv_n;
        }
      }
    }
    row.range_rmse_m = rmse_n > 0 ? rmse_sum / rmse_n : -1.0;
    row.class_accuracy = class_n > 0 ? double(class_ok) / class_n : 0.0;
    row.convergence_time_s = conv_n > 0 ? conv_sum / conv_n : -1.0;
    row.geom_tri_error_m = geometry_probe_error(cfg);
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace neos::fusion
