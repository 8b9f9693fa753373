#include "neos/report.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace neos::report {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string measurements_csv(const std::vector<sensor::Measurement>& measurements) {
  std::ostringstream os;
  os << "t_s,carrier_id,carrier_x_m,carrier_y_m,carrier_z_m,los_x,los_y,los_z,"
        "carrier_mode,tile_id,pixel_ix,pixel_iy,obs_extinction,obs_radiance\n";
  for (const auto& m : measurements) {
    os << fmt(m.t_s) << ',' << csv_escape(m.carrier_id);
    for (int i = 0; i < 3; ++i) os << ',' << fmt(m.carrier_pos_meas_m[i]);
    for (int i = 0; i < 3; ++i) os << ',' << fmt(m.los_dir_meas[i]);
    os << ',' << m.carrier_mode << ',' << m.tile_id << ',' << m.pixel_ix << ','
       << m.pixel_iy << ',' << fmt(m.obs_extinction) << ',' << fmt(m.obs_radiance)
       << '\n';
  }
  return os.str();
}

std::string truth_csv(const scene::Trajectory& truth) {
  std::ostringstream os;
  os << "t_s,state_id,x_m,y_m,z_m,vx_mps,vy_mps,vz_mps,ax_mps2,ay_mps2,az_mps2\n";
  for (std::size_t i = 0; i < truth.samples.size(); ++i) {
    const auto& s = truth.samples[i];
    os << fmt(s.time_s) << ',' << truth.state_ids[i];
    for (int j = 0; j < 3; ++j) os << ',' << fmt(s.position_m[j]);
    for (int j = 0; j < 3; ++j) os << ',' << fmt(s.velocity_mps[j]);
    for (int j = 0; j < 3; ++j) os << ',' << fmt(s.acceleration_mps2[j]);
    os << '\n';
  }
  return os.str();
}

std::string estimates_csv(const filter::EstimateSet& est) {
  std::ostringstream os;
  os << "t_s,state_id_hat";
  const char* names[9] = {"x_m",     "y_m",     "z_m",      "vx_mps",  "vy_mps",
                          "vz_mps",  "ax_mps2", "ay_mps2",  "az_mps2"};
  for (const auto* n : names) os << ',' << n;
  for (const auto* n : names) os << ",var_" << n;
  os << '\n';
  for (const auto& g : est.grid) {
    os << fmt(g.t_s) << ',' << g.state_id_hat;
    for (int i = 0; i < 9; ++i) os << ',' << fmt(g.mean[i]);
    for (int i = 0; i < 9; ++i) os << ',' << fmt(g.cov(i, i));
    os << '\n';
  }
  return os.str();
}

namespace {

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json estimate_json_obj(const filter::EstimateSet& est) {
  json j;
  j["class_id_hat"] = est.class_id_hat;
  j["regime"] = filter::to_string(est.regime);
  j["psd_clamp_events"] = est.psd_clamp_events;
  json hyps = json::array();
  for (std::size_t i = 0; i < est.hypothesis_ids.size(); ++i) {
    hyps.push_back({{"class_id", est.hypothesis_ids[i].first},
                    {"state_id", est.hypothesis_ids[i].second},
                    {"weight", est.final_weights[i]}});
  }
  j["hypotheses"] = hyps;
  json grid = json::array();
  for (const auto& g : est.grid) {
    json row;
    row["t_s"] = g.t_s;
    row["state_id_hat"] = g.state_id_hat;
    json mean = json::array(), var = json::array();
    for (int i = 0; i < 9; ++i) mean.push_back(g.mean[i]);
    for (int i = 0; i < 9; ++i) var.push_back(g.cov(i, i));
    row["mean"] = mean;
    row["cov_diagonal"] = var;
    grid.push_back(row);
  }
  j["grid"] = grid;
  return j;
}

json endpoint_json(const filter::TrajectoryEndpoint& e) {
  json j;
  j["reached"] = e.reached;
  j["t_s"] = e.t_s;
  j["position_m"] = vec3_json(e.position_m);
  json var = json::array();
  for (int i = 0; i < 9; ++i) var.push_back(e.cov_diagonal[i]);
  j["cov_diagonal"] = var;
  return j;
}

json task_json_obj(const filter::TaskClassOutput& out) {
  json j;
  j["a_operative"] = {{"slant_range_m", out.slant_range_m},
                      {"slant_range_std_m", out.slant_range_std_m},
                      {"velocity_mps", vec3_json(out.velocity_mps)}};
  json route = json::array();
  for (const auto& p : out.route_m) route.push_back(vec3_json(p));
  j["b_tactical"] = {{"route_m", route}, {"route_length_m", out.route_length_m}};
  j["c_strategic"] = {{"start", endpoint_json(out.start)}, {"end", endpoint_json(out.end)}};
  return j;
}

}  // namespace

std::string estimate_set_json(const filter::EstimateSet& est) {
  return estimate_json_obj(est).dump(2);
}

std::string task_report_json(const filter::TaskClassOutput& out) {
  return task_json_obj(out).dump(2);
}

std::string run_report_json(const harness::ScenarioSpec& spec,
                            const fusion::GroupRunResult& run,
                            const std::map<std::string, filter::TaskClassOutput>& tasks) {
  json j;
  j["version"] = kVersion;
  j["scenario"] = spec.name;
  j["config"] = {{"carriers", run.node_ids.size()},
                 {"layout", sensor::to_string(spec.sensor.layout)},
                 {"duration_s", spec.duration_s},
                 {"loss_prob", spec.link.loss_prob}};
  json nodes;
  for (const auto& id : run.node_ids) {
    const auto& m = run.metrics.at(id);
    json node;
    node["metrics"] = {
        {"range_rmse_m", m.range_rmse_m},
        {"mean_true_range_m", m.mean_true_range_m},
        {"rel_range_error_final", m.rel_range_error_final},
        {"class_accuracy", m.class_correct ? 1.0 : 0.0},
        {"convergence_time_s",
         m.convergence_time_s >= 0.0 ? json(m.convergence_time_s) : json()},
        {"n_measurements", m.n_measurements}};
    node["estimate"] = estimate_json_obj(run.estimates.at(id));
    if (tasks.count(id)) node["task_report"] = task_json_obj(tasks.at(id));
    nodes[id] = node;
  }
  j["nodes"] = nodes;
  return j.dump(2);
}

std::string event_log_jsonl(const std::vector<fusion::EventLogEntry>& log) {
  std::ostringstream os;
  for (const auto& e : log) {
    json j;
    j["node"] = e.node_id;
    j["source"] = e.source_id;
    j["seq"] = e.seq;
    j["emission_t_s"] = e.emission_time_s;
    j["delivered"] = e.delivered;
    if (e.delivered) j["arrival_t_s"] = e.arrival_time_s;
    os << j.dump() << '\n';
  }
  return os.str();
}

std::string sweep_csv(const fusion::SweepTable& table) {
  std::ostringstream os;
  os << "axis,value,n_seeds,range_rmse_m,class_accuracy,convergence_time_s,"
        "geom_tri_error_m\n";
  for (const auto& r : table.rows) {
    os << fusion::to_string(table.axis) << ',' << fmt(r.axis_value) << ',' << r.n_seeds
       << ',' << fmt(r.range_rmse_m) << ',' << fmt(r.class_accuracy) << ','
       << fmt(r.convergence_time_s) << ',' << fmt(r.geom_tri_error_m) << '\n';
  }
  return os.str();
}

std::string optimization_report_json(const opt::OptimizationReport& report) {
  json j;
  j["version"] = kVersion;
  j["best"] = {{"carrier_count", report.best.carrier_count},
               {"layout", sensor::to_string(report.best.layout)},
               {"bearing_noise_std_rad", report.best.bearing_noise_std_rad},
               {"frame_rate_hz", report.best.frame_rate_hz},
               {"boundary_a", report.best.boundary_a},
               {"boundary_b", report.best.boundary_b},
               {"link_loss", report.best.link_loss}};
  j["best_score"] = report.best_score;
  j["evaluations"] = report.evaluations;
  j["history"] = report.history;
  j["breakdown"] = {{"rmse_term", report.breakdown.rmse_term},
                    {"class_term", report.breakdown.class_term},
                    {"cost_term", report.breakdown.cost_term},
                    {"failures", report.breakdown.failures}};
  return j.dump(2);
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace neos::report
