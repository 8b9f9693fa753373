#include "neos/geodesy.hpp"

#include <cmath>

namespace neos::geodesy {

TerrainMap TerrainMap::flat(double height_m) {
  TerrainMap m;
  m.lat_rad = {-kPi / 2, kPi / 2};
  m.lon_rad = {-kPi, kPi};
  m.heights_m = {height_m, height_m, height_m, height_m};
  return m;
}

EcefVector geodetic_to_ecef(const GeodeticCoord& g, const EllipsoidModel& e) {
  const double sin_lat = std::sin(g.latitude_rad);
  const double cos_lat = std::cos(g.latitude_rad);
  const double e2 = e.ecc_sq();
  // prime-vertical radius of curvature
  const double n = e.semi_major_axis_m / std::sqrt(1.0 - e2 * sin_lat * sin_lat);
  const double rho = (n + g.altitude_m) * cos_lat;
  return {rho * std::cos(g.longitude_rad), rho * std::sin(g.longitude_rad),
          (n * (1.0 - e2) + g.altitude_m) * sin_lat};
}

GeodeticCoord ecef_to_geodetic(const EcefVector& r, const EllipsoidModel& e) {
  const double p = std::hypot(r.x_m, r.y_m);
  const double norm = std::hypot(p, r.z_m);
  if (norm == 0.0) throw RuntimeError("origin has no geodetic image");

  const double e2 = e.ecc_sq();
  GeodeticCoord g;
  g.longitude_rad = (p == 0.0) ? 0.0 : std::atan2(r.y_m, r.x_m);

  // polar axis: latitude is +-pi/2, altitude measured along the minor axis
  if (p < 1e-9 * std::abs(r.z_m)) {
    g.latitude_rad = (r.z_m >= 0.0) ? kPi / 2 : -kPi / 2;
    g.altitude_m = std::abs(r.z_m) - e.semi_minor_axis_m();
    return g;
  }

  // altitude along the normal; stable at all latitudes, unlike p/cos(lat) - n
  auto altitude = [&](double lat) {
    const double s = std::sin(lat);
    const double w = std::sqrt(1.0 - e2 * s * s);
    return p * std::cos(lat) + r.z_m * s - e.semi_major_axis_m * w;
  };
  double lat = std::atan2(r.z_m, p * (1.0 - e2));
  for (int it = 0; it < 10; ++it) {
    const double sin_lat = std::sin(lat);
    const double n = e.semi_major_axis_m / std::sqrt(1.0 - e2 * sin_lat * sin_lat);
    const double h = altitude(lat);
    const double lat_next = std::atan2(r.z_m, p * (1.0 - e2 * n / (n + h)));
    const double step = std::abs(lat_next - lat);
    lat = lat_next;
    if (step < 1e-9) break;
  }
  g.latitude_rad = lat;
  g.altitude_m = altitude(lat);
  return g;
}

double terrain_height_at(const TerrainMap& m, double lat_rad, double lon_rad,
                         double /*t_s*/) {
  if (!m.valid()) throw RuntimeError("terrain map grid is malformed");
  if (lat_rad < m.lat_rad.front() || lat_rad > m.lat_rad.back() ||
      lon_rad < m.lon_rad.front() || lon_rad > m.lon_rad.back()) {
    throw RuntimeError("outside map coverage");
  }
  auto cell = [](const std::vector<double>& axis, double v) {
    std::size_t i = 1;
    while (i + 1 < axis.size() && axis[i] <= v) ++i;
    return i - 1;  // v in [axis[i-1], axis[i]]
  };
  const std::size_t i = cell(m.lat_rad, lat_rad);
  const std::size_t j = cell(m.lon_rad, lon_rad);
  const double u = (lat_rad - m.lat_rad[i]) / (m.lat_rad[i + 1] - m.lat_rad[i]);
  const double v = (lon_rad - m.lon_rad[j]) / (m.lon_rad[j + 1] - m.lon_rad[j]);
  return (1 - u) * (1 - v) * m.at(i, j) + (1 - u) * v * m.at(i, j + 1) +
         u * (1 - v) * m.at(i + 1, j) + u * v * m.at(i + 1, j + 1);
}

EnuFrame local_enu_frame(const GeodeticCoord& g, const EllipsoidModel& /*e*/) {
  const double sl = std::sin(g.latitude_rad), cl = std::cos(g.latitude_rad);
  const double so = std::sin(g.longitude_rad), co = std::cos(g.longitude_rad);
  EnuFrame f;
  f.east = Vec3(-so, co, 0.0);
  f.north = Vec3(-sl * co, -sl * so, cl);
  f.up = Vec3(cl * co, cl * so, sl);
  return f;
}

double path_extinction(const AtmosphereModel& atm, const EllipsoidModel& e,
                       const Vec3& from_ecef, const Vec3& to_ecef) {
  const double len_km = (to_ecef - from_ecef).norm() / 1000.0;
  if (len_km == 0.0) return 0.0;
  auto alt = [&](const Vec3& p) {
    return ecef_to_geodetic(EcefVector::from(p), e).altitude_m;
  };
  const double k0 = atm.extinction_at(alt(from_ecef));
  const double k1 = atm.extinction_at(alt(0.5 * (from_ecef + to_ecef)));
  const double k2 = atm.extinction_at(alt(to_ecef));
  return len_km * (k0 + 4.0 * k1 + k2) / 6.0;
}

}  // namespace neos::geodesy
