#include "neos/scenario.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace neos::harness {

using nlohmann::json;

geodesy::Environment ScenarioSpec::environment() const {
  return {ellipsoid, terrain, atmosphere};
}

namespace {

Mat3 enu_matrix(const geodesy::GeodeticCoord& anchor, const geodesy::EllipsoidModel& e) {
  const auto f = geodesy::local_enu_frame(anchor, e);
  Mat3 m;
  m.col(0) = f.east;
  m.col(1) = f.north;
  m.col(2) = f.up;
  return m;
}

}  // namespace

Vec3 ScenarioSpec::enu_to_ecef(const Vec3& enu) const {
  return geodesy::geodetic_to_ecef(anchor, ellipsoid).vec() +
         enu_matrix(anchor, ellipsoid) * enu;
}

Vec3 ScenarioSpec::enu_dir_to_ecef(const Vec3& enu) const {
  return enu_matrix(anchor, ellipsoid) * enu;
}

Vec3 ScenarioSpec::local_up() const { return enu_matrix(anchor, ellipsoid).col(2); }

scene::CarrierCatalog ScenarioSpec::carrier_catalog() const {
  scene::CarrierCatalog cat;
  for (const auto& c : carriers) cat.modes[c.id] = c.modes;
  return cat;
}

scene::CarrierState ScenarioSpec::carrier_initial_state(const CarrierSpec& c) const {
  scene::CarrierState s;
  s.time_s = 0.0;
  s.position_m = enu_to_ecef(c.initial_pos_enu_m);
  s.velocity_mps = enu_dir_to_ecef(c.velocity_enu_mps);
  s.attitude = c.attitude;
  s.mode = c.mode;
  for (const auto& m : c.modes)
    if (m.mode_id == c.mode) s.mode_params = m;
  return s;
}

// ------------------------------------------------------------- validation ---

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ScenarioError(path + ": " + msg);
}

const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(path + "/" + key, "missing required field");
  return *it;
}

double num(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

double num_field(const json& j, const std::string& key, const std::string& path) {
  return num(field(j, key, path), path + "/" + key);
}

double num_or(const json& j, const std::string& key, double def, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) return def;
  return num(j.at(key), path + "/" + key);
}

int int_field(const json& j, const std::string& key, const std::string& path) {
  const json& v = field(j, key, path);
  if (!v.is_number_integer()) fail(path + "/" + key, "expected an integer");
  return v.get<int>();
}

int int_or(const json& j, const std::string& key, int def, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) return def;
  if (!j.at(key).is_number_integer()) fail(path + "/" + key, "expected an integer");
  return j.at(key).get<int>();
}

bool bool_or(const json& j, const std::string& key, bool def, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) return def;
  if (!j.at(key).is_boolean()) fail(path + "/" + key, "expected a boolean");
  return j.at(key).get<bool>();
}

std::string str_field(const json& j, const std::string& key, const std::string& path) {
  const json& v = field(j, key, path);
  if (!v.is_string()) fail(path + "/" + key, "expected a string");
  return v.get<std::string>();
}

Vec3 vec3_field(const json& j, const std::string& key, const std::string& path) {
  const json& v = field(j, key, path);
  if (!v.is_array() || v.size() != 3) fail(path + "/" + key, "expected an array of 3 numbers");
  return Vec3(num(v[0], path), num(v[1], path), num(v[2], path));
}

Vec3 vec3_or(const json& j, const std::string& key, const Vec3& def, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) return def;
  return vec3_field(j, key, path);
}

std::pair<double, double> band_field(const json& j, const std::string& key,
                                     const std::string& path) {
  const json& v = field(j, key, path);
  if (!v.is_array() || v.size() != 2) fail(path + "/" + key, "expected [min, max]");
  const double lo = num(v[0], path + "/" + key), hi = num(v[1], path + "/" + key);
  if (lo > hi) fail(path + "/" + key, "min must be <= max");
  return {lo, hi};
}

scene::MotionModel parse_motion(const json& j, const ScenarioSpec& spec,
                                const std::string& path) {
  scene::MotionModel m;
  m.kind = scene::motion_kind_from_string(str_field(j, "kind", path));
  m.noise_intensity = num_or(j, "noise_intensity", 0.0, path);
  if (m.noise_intensity < 0.0) fail(path + "/noise_intensity", "must be >= 0");
  if (m.kind == scene::MotionKind::CoordinatedTurn) {
    m.turn_rate_radps = num_field(j, "turn_rate_radps", path);
    m.turn_axis = spec.enu_dir_to_ecef(vec3_or(j, "turn_axis_enu", Vec3(0, 0, 1), path));
  }
  if (m.kind == scene::MotionKind::ConstantAcceleration)
    m.nominal_accel_mps2 =
        spec.enu_dir_to_ecef(vec3_or(j, "nominal_accel_enu_mps2", Vec3::Zero(), path));
  return m;
}

scene::ObjectClassCatalog parse_catalog(const json& j, const ScenarioSpec& spec,
                                        const std::string& path) {
  scene::ObjectClassCatalog catalog;
  const json& classes = field(j, "classes", path);
  if (!classes.is_array() || classes.empty()) fail(path + "/classes", "expected a non-empty array");
  for (std::size_t ci = 0; ci < classes.size(); ++ci) {
    const std::string cpath = path + "/classes/" + std::to_string(ci);
    const json& jc = classes[ci];
    scene::ObjectClass cls;
    cls.class_id = int_field(jc, "id", cpath);
    cls.name = jc.contains("name") ? str_field(jc, "name", cpath) : "";
    const json& states = field(jc, "states", cpath);
    if (!states.is_array() || states.empty()) fail(cpath + "/states", "expected a non-empty array");
    for (std::size_t si = 0; si < states.size(); ++si) {
      const std::string spath = cpath + "/states/" + std::to_string(si);
      const json& js = states[si];
      scene::ObjectState st;
      st.state_id = int_field(js, "id", spath);
      st.model = parse_motion(field(js, "motion", spath), spec, spath + "/motion");
      const auto speed = band_field(js, "speed_mps", spath);
      st.model.bounds.speed_min_mps = speed.first;
      st.model.bounds.speed_max_mps = speed.second;
      if (js.contains("accel_mps2")) {
        const auto accel = band_field(js, "accel_mps2", spath);
        st.model.bounds.accel_max_mps2 = accel.second;
      }
      if (js.contains("altitude_m")) {
        const auto alt = band_field(js, "altitude_m", spath);
        st.model.bounds.alt_min_m = alt.first;
        st.model.bounds.alt_max_m = alt.second;
      }
      st.preferred_heading_rad = deg2rad(num_or(js, "preferred_heading_deg", 0.0, spath));
      cls.states.push_back(std::move(st));
    }
    const int n = static_cast<int>(cls.states.size());
    cls.transition_rates_per_s = MatX::Zero(n, n);
    if (jc.contains("transition_rates_per_s")) {
      const json& tr = jc.at("transition_rates_per_s");
      const std::string tpath = cpath + "/transition_rates_per_s";
      if (!tr.is_array() || int(tr.size()) != n) fail(tpath, "expected a square matrix");
      for (int r = 0; r < n; ++r) {
        if (!tr[r].is_array() || int(tr[r].size()) != n) fail(tpath, "expected a square matrix");
        for (int c = 0; c < n; ++c) {
          cls.transition_rates_per_s(r, c) = num(tr[r][c], tpath);
          if (r != c && cls.transition_rates_per_s(r, c) < 0.0)
            fail(tpath, "off-diagonal rates must be >= 0");
        }
      }
    }
    catalog.classes.push_back(std::move(cls));
  }
  return catalog;
}

geodesy::TerrainMap parse_terrain(const json& j, const std::string& path) {
  if (j.contains("flat_height_m"))
    return geodesy::TerrainMap::flat(num_field(j, "flat_height_m", path));
  geodesy::TerrainMap m;
  for (const char* key : {"lat_deg", "lon_deg"}) {
    const json& axis = field(j, key, path);
    if (!axis.is_array() || axis.size() < 2)
      fail(path + "/" + key, "expected an array of >= 2 values");
    auto& dst = std::string(key) == "lat_deg" ? m.lat_rad : m.lon_rad;
    for (const auto& v : axis) dst.push_back(deg2rad(num(v, path + "/" + key)));
    for (std::size_t i = 1; i < dst.size(); ++i)
      if (dst[i] <= dst[i - 1]) fail(path + "/" + key, "axis must be strictly increasing");
  }
  const json& rows = field(j, "heights_m", path);
  if (!rows.is_array() || rows.size() != m.lat_rad.size())
    fail(path + "/heights_m", "expected one row per latitude");
  for (const auto& row : rows) {
    if (!row.is_array() || row.size() != m.lon_rad.size())
      fail(path + "/heights_m", "expected one column per longitude");
    for (const auto& v : row) m.heights_m.push_back(num(v, path + "/heights_m"));
  }
  m.time_tag_s = num_or(j, "time_tag_s", 0.0, path);
  return m;
}

std::vector<filter::SoftConstraint> parse_constraints(const json& j, const std::string& path) {
  std::vector<filter::SoftConstraint> out;
  if (!j.is_array()) fail(path, "expected an array");
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string cpath = path + "/" + std::to_string(i);
    filter::SoftConstraint c;
    c.kind = filter::constraint_kind_from_string(str_field(j[i], "kind", cpath));
    c.threshold = num_field(j[i], "threshold", cpath);
    c.confidence = num_field(j[i], "confidence", cpath);
    if (!(c.confidence > 0.0 && c.confidence < 1.0))
      fail(cpath + "/confidence", "must be strictly inside (0,1)");
    out.push_back(c);
  }
  return out;
}

CostModelSpec parse_cost_model(const json& j, const std::string& path) {
  CostModelSpec cm;
  if (j.contains("stage_rates")) {
    const json& rates = j.at("stage_rates");
    if (!rates.is_array() || rates.size() != 11)
      fail(path + "/stage_rates", "expected 11 values (one per stage)");
    for (int i = 0; i < 11; ++i) cm.stage_rates[i] = num(rates[i], path + "/stage_rates");
  }
  cm.carrier_weight = num_or(j, "carrier_weight", 0.0, path);
  cm.frame_rate_weight = num_or(j, "frame_rate_weight", 0.0, path);
  cm.bandwidth_weight = num_or(j, "bandwidth_weight", 0.0, path);
  return cm;
}

}  // namespace

ScenarioSpec parse_scenario(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("not valid JSON: ") + e.what());
  }
  ScenarioSpec spec;
  spec.name = j.contains("name") ? str_field(j, "name", "") : "scenario";

  const json& seeds = field(j, "seeds", "");
  if (!seeds.is_array() || seeds.empty()) fail("/seeds", "expected a non-empty array");
  for (const auto& s : seeds) {
    if (!s.is_number_integer() || s.get<long long>() < 0)
      fail("/seeds", "seeds must be non-negative integers");
    spec.seeds.push_back(s.get<std::uint64_t>());
  }

  if (j.contains("ellipsoid")) {
    const json& je = j.at("ellipsoid");
    spec.ellipsoid.semi_major_axis_m = num_field(je, "semi_major_axis_m", "/ellipsoid");
    if (je.contains("flattening_inv"))
      spec.ellipsoid.flattening = 1.0 / num_field(je, "flattening_inv", "/ellipsoid");
    else
      spec.ellipsoid.flattening = num_field(je, "flattening", "/ellipsoid");
    if (spec.ellipsoid.semi_major_axis_m <= 0.0) fail("/ellipsoid", "semi-major axis must be > 0");
    if (spec.ellipsoid.flattening <= 0.0 || spec.ellipsoid.flattening >= 1.0)
      fail("/ellipsoid", "flattening must be inside (0,1)");
  }

  if (j.contains("anchor")) {
    const json& ja = j.at("anchor");
    spec.anchor.latitude_rad = deg2rad(num_field(ja, "lat_deg", "/anchor"));
    spec.anchor.longitude_rad = deg2rad(num_field(ja, "lon_deg", "/anchor"));
    spec.anchor.altitude_m = num_or(ja, "alt_m", 0.0, "/anchor");
    if (std::abs(spec.anchor.latitude_rad) > kPi / 2) fail("/anchor/lat_deg", "outside [-90, 90]");
  }

  if (j.contains("terrain")) spec.terrain = parse_terrain(j.at("terrain"), "/terrain");
  if (j.contains("atmosphere")) {
    const json& ja = j.at("atmosphere");
    spec.atmosphere.extinction_per_km = num_or(ja, "extinction_per_km", 0.0, "/atmosphere");
    spec.atmosphere.scale_height_m = num_or(ja, "scale_height_m", 8000.0, "/atmosphere");
    spec.atmosphere.background_radiance = num_or(ja, "background_radiance", 0.0, "/atmosphere");
    if (spec.atmosphere.extinction_per_km < 0.0)
      fail("/atmosphere/extinction_per_km", "must be >= 0");
    if (spec.atmosphere.background_radiance < 0.0)
      fail("/atmosphere/background_radiance", "must be >= 0");
  }

  spec.catalog = parse_catalog(field(j, "catalog", ""), spec, "/catalog");

  {
    const json& jt = field(j, "target", "");
    spec.target.class_id = int_field(jt, "class_id", "/target");
    spec.target.initial_pos_enu_m = vec3_field(jt, "pos_enu_m", "/target");
    spec.target.initial_vel_enu_mps = vec3_or(jt, "vel_enu_mps", Vec3::Zero(), "/target");
    spec.target.initial_acc_enu_mps2 = vec3_or(jt, "acc_enu_mps2", Vec3::Zero(), "/target");
    const json& sched = field(jt, "schedule", "/target");
    if (!sched.is_array() || sched.empty()) fail("/target/schedule", "expected a non-empty array");
    for (std::size_t i = 0; i < sched.size(); ++i) {
      const std::string spath = "/target/schedule/" + std::to_string(i);
      scene::StateSchedule::Entry e;
      e.state_id = int_field(sched[i], "state_id", spath);
      e.t_start_s = num_or(sched[i], "t_start_s", 0.0, spath);
      spec.target.schedule.entries.push_back(e);
    }
    bool found = false;
    for (const auto& c : spec.catalog.classes) found = found || c.class_id == spec.target.class_id;
    if (!found) fail("/target/class_id", "references a class absent from the catalog");
    for (const auto& e : spec.target.schedule.entries)
      if (!spec.catalog.has(spec.target.class_id, e.state_id))
        fail("/target/schedule", "references state " + std::to_string(e.state_id) +
                                     " absent from class " + std::to_string(spec.target.class_id));
  }

  {
    const json& jc = field(j, "carriers", "");
    if (!jc.is_array() || jc.empty()) fail("/carriers", "expected a non-empty array");
    for (std::size_t i = 0; i < jc.size(); ++i) {
      const std::string cpath = "/carriers/" + std::to_string(i);
      CarrierSpec c;
      c.id = str_field(jc[i], "id", cpath);
      c.initial_pos_enu_m = vec3_field(jc[i], "pos_enu_m", cpath);
      c.velocity_enu_mps = vec3_or(jc[i], "vel_enu_mps", Vec3::Zero(), cpath);
      c.mode = int_or(jc[i], "mode", 1, cpath);
      c.clock_offset_s = num_or(jc[i], "clock_offset_s", 0.0, cpath);
      c.frame_phase_s = num_or(jc[i], "frame_phase_s", 0.0, cpath);
      const json& modes = field(jc[i], "modes", cpath);
      if (!modes.is_array() || modes.empty()) fail(cpath + "/modes", "expected a non-empty array");
      for (std::size_t mi = 0; mi < modes.size(); ++mi) {
        const std::string mpath = cpath + "/modes/" + std::to_string(mi);
        scene::CarrierModeParams p;
        p.mode_id = int_field(modes[mi], "id", mpath);
        p.bearing_noise_std_rad = num_field(modes[mi], "bearing_noise_std_rad", mpath);
        p.frame_rate_hz = num_field(modes[mi], "frame_rate_hz", mpath);
        const auto band = band_field(modes[mi], "detect_range_m", mpath);
        p.detect_range_min_m = band.first;
        p.detect_range_max_m = band.second;
        if (p.bearing_noise_std_rad < 0.0) fail(mpath + "/bearing_noise_std_rad", "must be >= 0");
        if (p.frame_rate_hz <= 0.0) fail(mpath + "/frame_rate_hz", "must be > 0");
        if (p.detect_range_min_m <= 0.0) fail(mpath + "/detect_range_m", "min must be > 0");
        c.modes.push_back(p);
      }
      bool mode_found = false;
      for (const auto& m : c.modes) mode_found = mode_found || m.mode_id == c.mode;
      if (!mode_found) fail(cpath + "/mode", "active mode absent from the mode list");
      for (const auto& other : spec.carriers)
        if (other.id == c.id) fail(cpath + "/id", "duplicate carrier id");
      spec.carriers.push_back(std::move(c));
    }
  }

  if (j.contains("sensor")) {
    const json& js = j.at("sensor");
    spec.sensor.layout = sensor::layout_from_string(
        js.contains("layout") ? str_field(js, "layout", "/sensor") : "cube6");
    spec.sensor.fpa_cols = int_or(js, "fpa_cols", 1024, "/sensor");
    spec.sensor.fpa_rows = int_or(js, "fpa_rows", 1024, "/sensor");
    spec.sensor.quantize_pixels = bool_or(js, "quantize_pixels", false, "/sensor");
    spec.sensor.pos_noise_std_m = num_or(js, "pos_noise_std_m", 0.0, "/sensor");
    if (spec.sensor.fpa_cols < 16 || spec.sensor.fpa_rows < 16)
      fail("/sensor", "FPA format must be at least 16x16");
    if (spec.sensor.pos_noise_std_m < 0.0) fail("/sensor/pos_noise_std_m", "must be >= 0");
  }

  if (j.contains("link")) {
    const json& jl = j.at("link");
    spec.link.latency_mean_s = num_or(jl, "latency_mean_s", 0.0, "/link");
    spec.link.jitter_std_s = num_or(jl, "jitter_std_s", 0.0, "/link");
    spec.link.loss_prob = num_or(jl, "loss_prob", 0.0, "/link");
    if (spec.link.latency_mean_s < 0.0) fail("/link/latency_mean_s", "must be >= 0");
    if (spec.link.loss_prob < 0.0 || spec.link.loss_prob >= 1.0)
      fail("/link/loss_prob", "must be in [0, 1)");
  }

  if (j.contains("filter")) {
    const json& jf = j.at("filter");
    spec.filter.settings.range_ladder_count =
        int_or(jf, "range_ladder_count", 8, "/filter");
    spec.filter.settings.meas_noise_floor_rad =
        num_or(jf, "meas_noise_floor_rad", 1e-6, "/filter");
    spec.filter.settings.extinction_noise_scaling =
        bool_or(jf, "extinction_noise_scaling", false, "/filter");
    spec.filter.settings.extinction_noise_coeff =
        num_or(jf, "extinction_noise_coeff", 1.0, "/filter");
    if (spec.filter.settings.range_ladder_count < 1)
      fail("/filter/range_ladder_count", "must be >= 1");
    if (jf.contains("constraints"))
      spec.filter.constraints = parse_constraints(jf.at("constraints"), "/filter/constraints");
    if (jf.contains("grid_times_s")) {
      const json& g = jf.at("grid_times_s");
      if (!g.is_array()) fail("/filter/grid_times_s", "expected an array");
      for (const auto& v : g) spec.filter.grid_times_s.push_back(num(v, "/filter/grid_times_s"));
    } else if (jf.contains("grid_range")) {
      const json& g = jf.at("grid_range");
      const double start = num_field(g, "start_s", "/filter/grid_range");
      const double stop = num_field(g, "stop_s", "/filter/grid_range");
      const double step = num_field(g, "step_s", "/filter/grid_range");
      if (step <= 0.0 || stop < start) fail("/filter/grid_range", "need stop >= start, step > 0");
      for (double t = start; t <= stop + 1e-9; t += step)
        spec.filter.grid_times_s.push_back(t);
    }
    for (std::size_t i = 1; i < spec.filter.grid_times_s.size(); ++i)
      if (spec.filter.grid_times_s[i] <= spec.filter.grid_times_s[i - 1])
        fail("/filter/grid_times_s", "must be strictly increasing");
  }

  spec.duration_s = num_or(j, "duration_s", 3.0, "");
  if (spec.duration_s <= 0.0) fail("/duration_s", "must be > 0");

  if (j.contains("sweep")) {
    const json& js = j.at("sweep");
    SweepSpec sw;
    sw.axis = str_field(js, "axis", "/sweep");
    const json& vals = field(js, "values", "/sweep");
    if (!vals.is_array() || vals.size() < 2) fail("/sweep/values", "expected >= 2 values");
    for (const auto& v : vals) sw.values.push_back(num(v, "/sweep/values"));
    spec.sweep = std::move(sw);
  }

  if (j.contains("optimize")) {
    const json& jo = j.at("optimize");
    OptimizeSpec op;
    op.population = int_or(jo, "population", 16, "/optimize");
    op.weight_f = num_or(jo, "weight_f", 0.7, "/optimize");
    op.crossover = num_or(jo, "crossover", 0.9, "/optimize");
    op.max_generations = int_or(jo, "max_generations", 20, "/optimize");
    op.seed = static_cast<std::uint64_t>(int_or(jo, "seed", 1, "/optimize"));
    op.w_rmse = num_or(jo, "w_rmse", 1.0, "/optimize");
    op.w_class = num_or(jo, "w_class", 1.0, "/optimize");
    op.w_cost = num_or(jo, "w_cost", 0.0, "/optimize");
    op.failure_penalty = num_or(jo, "failure_penalty", 1e3, "/optimize");
    op.rmse_cap = num_or(jo, "rmse_cap", 2.0, "/optimize");
    if (op.population < 4) fail("/optimize/population", "DE needs population >= 4");
    if (jo.contains("cost_model"))
      op.cost_model = parse_cost_model(jo.at("cost_model"), "/optimize/cost_model");
    if (jo.contains("bounds")) {
      const json& jb = jo.at("bounds");
      if (!jb.is_object()) fail("/optimize/bounds", "expected an object");
      for (const auto& [key, val] : jb.items()) {
        const std::string bpath = "/optimize/bounds/" + key;
        BoundsSpec b;
        b.lo = num_field(val, "lo", bpath);
        b.hi = num_field(val, "hi", bpath);
        b.integer = bool_or(val, "integer", false, bpath);
        if (b.hi < b.lo) fail(bpath, "hi must be >= lo");
        op.bounds[key] = b;
      }
    }
    spec.optimize = std::move(op);
  }

  return spec;
}

ScenarioSpec load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace neos::harness
