#pragma once

#include <vector>

#include "neos/common.hpp"

namespace neos::geodesy {

/// Reference ellipsoid of revolution (the base surface of the Earth-fixed
/// geodetic frame).
struct EllipsoidModel {
  double semi_major_axis_m = 0.0;
  double flattening = 0.0;

  double semi_minor_axis_m() const { return semi_major_axis_m * (1.0 - flattening); }
  double ecc_sq() const { return flattening * (2.0 - flattening); }
};

/// WGS-84 constants (NIMA TR8350.2).
inline EllipsoidModel wgs84() { return {6378137.0, 1.0 / 298.257223563}; }

struct GeodeticCoord {
  double altitude_m = 0.0;
  double latitude_rad = 0.0;   // in [-pi/2, pi/2]
  double longitude_rad = 0.0;  // in (-pi, pi]
};

struct EcefVector {
  double x_m = 0.0;
  double y_m = 0.0;
  double z_m = 0.0;

  Vec3 vec() const { return Vec3(x_m, y_m, z_m); }
  static EcefVector from(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
};

/// East/north/up unit vectors of the local geodetic frame, expressed in the
/// rectangular Earth-fixed frame. Right-handed, up = outward ellipsoid normal.
struct EnuFrame {
  Vec3 east;
  Vec3 north;
  Vec3 up;
};

/// Gridded terrain heights over (latitude, longitude), bilinear between nodes.
struct TerrainMap {
  std::vector<double> lat_rad;      // strictly increasing
  std::vector<double> lon_rad;      // strictly increasing
  std::vector<double> heights_m;    // row-major [lat][lon]
  double time_tag_s = 0.0;

  double at(std::size_t ilat, std::size_t ilon) const {
    return heights_m[ilat * lon_rad.size() + ilon];
  }
  bool valid() const {
    return lat_rad.size() >= 2 && lon_rad.size() >= 2 &&
           heights_m.size() == lat_rad.size() * lon_rad.size();
  }

  /// A single flat cell at the given height covering the whole globe.
  static TerrainMap flat(double height_m);
};

/// Point-query model of the propagation medium: extinction decays
/// exponentially with altitude, background radiance is uniform. The latitude,
/// longitude and time arguments are accepted for interface stability.
struct AtmosphereModel {
  double extinction_per_km = 0.0;
  double scale_height_m = 8000.0;     // <= 0 means altitude-independent
  double background_radiance = 0.0;   // normalized units

  double extinction_at(double alt_m, double /*lat*/ = 0, double /*lon*/ = 0,
                       double /*t*/ = 0) const {
    if (scale_height_m <= 0.0) return extinction_per_km;
    return extinction_per_km * std::exp(-std::max(alt_m, 0.0) / scale_height_m);
  }
  double radiance_at(double /*alt_m*/ = 0, double /*lat*/ = 0, double /*lon*/ = 0,
                     double /*t*/ = 0) const {
    return background_radiance;
  }
};

/// Terrain plus atmosphere, bundled for consumers that need both.
struct Environment {
  EllipsoidModel ellipsoid = wgs84();
  TerrainMap terrain = TerrainMap::flat(0.0);
  AtmosphereModel atmosphere;
};

EcefVector geodetic_to_ecef(const GeodeticCoord& g, const EllipsoidModel& e);

/// Inverse of geodetic_to_ecef by bounded fixed-point iteration (at most 10
/// iterations, exit when the latitude step drops below 1e-9 rad).
/// Throws RuntimeError for the ellipsoid center.
GeodeticCoord ecef_to_geodetic(const EcefVector& r, const EllipsoidModel& e);

/// Bilinear terrain height. Throws RuntimeError outside the grid hull.
double terrain_height_at(const TerrainMap& m, double lat_rad, double lon_rad,
                         double t_s = 0.0);

EnuFrame local_enu_frame(const GeodeticCoord& g, const EllipsoidModel& e);

/// Mean extinction along the straight path between two points times path
/// length in km (Simpson rule on the altitude profile endpoints/midpoint).
double path_extinction(const AtmosphereModel& atm, const EllipsoidModel& e,
                       const Vec3& from_ecef, const Vec3& to_ecef);

}  // namespace neos::geodesy
