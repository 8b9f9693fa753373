#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "neos/report.hpp"

namespace py = pybind11;
using namespace neos;

namespace {

py::dict de_result_to_dict(const opt::DEResult& r) {
  py::dict d;
  d["best"] = std::vector<double>(r.best.data(), r.best.data() + r.best.size());
  d["best_score"] = r.best_score;
  d["history"] = r.history;
  d["evaluations"] = r.evaluations;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "network-centric staring-sensor simulation and estimation core";
  m.attr("__version__") = report::kVersion;

  // --- geodesy ---
  py::class_<geodesy::EllipsoidModel>(m, "EllipsoidModel")
      .def(py::init([](double a, double f) {
             return geodesy::EllipsoidModel{a, f};
           }),
           py::arg("semi_major_axis_m"), py::arg("flattening"))
      .def_readonly("semi_major_axis_m", &geodesy::EllipsoidModel::semi_major_axis_m)
      .def_readonly("flattening", &geodesy::EllipsoidModel::flattening);
  m.def("wgs84", &geodesy::wgs84);

  m.def(
      "geodetic_to_ecef",
      [](double alt_m, double lat_rad, double lon_rad, const geodesy::EllipsoidModel& e) {
        const auto r = geodesy::geodetic_to_ecef({alt_m, lat_rad, lon_rad}, e);
        return py::make_tuple(r.x_m, r.y_m, r.z_m);
      },
      py::arg("alt_m"), py::arg("lat_rad"), py::arg("lon_rad"),
      py::arg("ellipsoid") = geodesy::wgs84());
  m.def(
      "ecef_to_geodetic",
      [](double x, double y, double z, const geodesy::EllipsoidModel& e) {
        const auto g = geodesy::ecef_to_geodetic({x, y, z}, e);
        return py::make_tuple(g.altitude_m, g.latitude_rad, g.longitude_rad);
      },
      py::arg("x_m"), py::arg("y_m"), py::arg("z_m"), py::arg("ellipsoid") = geodesy::wgs84());
  m.def(
      "local_enu_frame",
      [](double lat_rad, double lon_rad, const geodesy::EllipsoidModel& e) {
        const auto f = geodesy::local_enu_frame({0.0, lat_rad, lon_rad}, e);
        return py::make_tuple(f.east, f.north, f.up);
      },
      py::arg("lat_rad"), py::arg("lon_rad"), py::arg("ellipsoid") = geodesy::wgs84());

  // --- sensor ---
  py::class_<sensor::SensorArray>(m, "SensorArray")
      .def_property_readonly("n_tiles",
                             [](const sensor::SensorArray& a) { return a.tiles.size(); })
      .def_property_readonly("layout", [](const sensor::SensorArray& a) {
        return sensor::to_string(a.layout_id);
      });
  m.def(
      "build_tiling",
      [](const std::string& layout, int cols, int rows) {
        return sensor::build_tiling(sensor::layout_from_string(layout), cols, rows);
      },
      py::arg("layout"), py::arg("fpa_cols") = 1024, py::arg("fpa_rows") = 1024);
  m.def(
      "coverage",
      [](const sensor::SensorArray& a, std::size_t n, std::uint64_t seed) {
        const auto c = sensor::coverage(a, n, seed);
        py::dict d;
        d["n_samples"] = c.n_samples;
        d["n_missed"] = c.n_missed;
        d["covered_fraction"] = c.covered_fraction;
        d["overlap_fraction"] = c.overlap_fraction;
        return d;
      },
      py::arg("array"), py::arg("n_samples") = 100000, py::arg("seed") = 1);
  m.def(
      "direction_to_pixel",
      [](const sensor::SensorArray& a, int tile_id, const Vec3& dir)
          -> std::optional<std::pair<double, double>> {
        const auto px = sensor::direction_to_pixel(a.tiles.at(tile_id), dir);
        if (!px) return std::nullopt;
        return std::make_pair(px->u, px->v);
      },
      py::arg("array"), py::arg("tile_id"), py::arg("dir_body"));
  m.def(
      "pixel_to_direction",
      [](const sensor::SensorArray& a, int tile_id, double u, double v) {
        return sensor::pixel_to_direction(a.tiles.at(tile_id), {u, v});
      },
      py::arg("array"), py::arg("tile_id"), py::arg("u"), py::arg("v"));
  m.def("owning_tile", &sensor::owning_tile, py::arg("array"), py::arg("dir_body"));
  m.def(
      "classify_image_extent",
      [](int extent) { return sensor::to_string(sensor::classify_image_extent(extent)); },
      py::arg("extent_px"));
  m.def("ftheta_deviation", &sensor::ftheta_deviation, py::arg("radius_of_theta"),
        py::arg("theta_max_rad"), py::arg("n_samples") = (1 << 20) + 1);
  m.def("meets_ftheta_bound", &sensor::meets_ftheta_bound, py::arg("deviation"));

  // --- filter ---
  m.def(
      "triangulate_baseline",
      [](const Vec3& p1, const Vec3& d1, const Vec3& p2, const Vec3& d2) {
        sensor::Measurement m1, m2;
        m1.carrier_pos_meas_m = p1;
        m1.los_dir_meas = d1;
        m2.carrier_pos_meas_m = p2;
        m2.los_dir_meas = d2;
        const auto r = filter::triangulate_baseline(m1, m2);
        return py::make_tuple(r.point_m, r.residual_m);
      },
      py::arg("carrier1_pos"), py::arg("los1"), py::arg("carrier2_pos"), py::arg("los2"));

  // --- optimizer ---
  m.def(
      "differential_evolution",
      [](const std::function<double(const VecX&)>& objective, const std::vector<double>& lo,
         const std::vector<double>& hi, const std::vector<bool>& integer_mask, int population,
         double weight_f, double crossover, int max_generations, std::uint64_t seed) {
        const auto n = static_cast<Eigen::Index>(lo.size());
        VecX lower = Eigen::Map<const VecX>(lo.data(), n);
        VecX upper = Eigen::Map<const VecX>(hi.data(), static_cast<Eigen::Index>(hi.size()));
        std::vector<bool> mask = integer_mask;
        if (mask.empty()) mask.assign(lo.size(), false);
        opt::DEParams params{population, weight_f, crossover, max_generations, seed};
        return de_result_to_dict(
            opt::differential_evolution(objective, lower, upper, mask, params));
      },
      py::arg("objective"), py::arg("lower"), py::arg("upper"),
      py::arg("integer_mask") = std::vector<bool>{}, py::arg("population") = 30,
      py::arg("weight_f") = 0.7, py::arg("crossover") = 0.9, py::arg("max_generations") = 100,
      py::arg("seed") = 1);

  // --- harness ---
  m.def(
      "simulate",
      [](const std::string& scenario_json, long long seed_override) {
        auto spec = harness::parse_scenario(scenario_json);
        if (seed_override >= 0) spec.seeds = {std::uint64_t(seed_override)};
        const auto products = fusion::simulate_group(spec, spec.seeds.front());
        return py::make_tuple(report::measurements_csv(products.measurements),
                              report::truth_csv(products.truth));
      },
      py::arg("scenario_json"), py::arg("seed_override") = -1,
      "Returns (measurements_csv, truth_csv).");
  m.def(
      "estimate",
      [](const std::string& scenario_json, long long seed_override) {
        auto spec = harness::parse_scenario(scenario_json);
        if (seed_override >= 0) spec.seeds = {std::uint64_t(seed_override)};
        const auto run = fusion::run_group_scenario(spec, spec.seeds.front());
        std::map<std::string, filter::TaskClassOutput> tasks;
        const auto env = spec.environment();
        for (std::size_t i = 0; i < run.node_ids.size(); ++i) {
          const auto& id = run.node_ids[i];
          const auto& est = run.estimates.at(id);
          const auto carrier = spec.carrier_initial_state(spec.carriers[i]);
          const Vec3 pos =
              scene::carrier_state_at(carrier, est.grid.back().t_s).position_m;
          tasks[id] = filter::task_class_report(est, spec.catalog, pos, &env);
        }
        return report::run_report_json(spec, run, tasks);
      },
      py::arg("scenario_json"), py::arg("seed_override") = -1,
      "Runs the full pipeline; returns the run report as a JSON string.");
  m.def(
      "sweep",
      [](const std::string& scenario_json) {
        const auto spec = harness::parse_scenario(scenario_json);
        if (!spec.sweep) throw ScenarioError("/sweep: scenario has no sweep block");
        const auto table = fusion::degradation_sweep(
            spec, fusion::sweep_axis_from_string(spec.sweep->axis), spec.sweep->values);
        return report::sweep_csv(table);
      },
      py::arg("scenario_json"), "Runs the degradation sweep; returns CSV.");
  m.def(
      "optimize",
      [](const std::string& scenario_json) {
        const auto spec = harness::parse_scenario(scenario_json);
        return report::optimization_report_json(opt::optimize_architecture(spec));
      },
      py::arg("scenario_json"), "Runs the architecture search; returns a JSON report.");

  py::register_exception<ScenarioError>(m, "ScenarioError");
}
