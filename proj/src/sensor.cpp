#include "neos/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace neos::sensor {

LayoutId layout_from_string(const std::string& s) {
  if (s == "cube6") return LayoutId::Cube6;
  if (s == "cube24") return LayoutId::Cube24;
  throw RuntimeError("unknown sensor layout: " + s);
}

std::string to_string(LayoutId id) {
  return id == LayoutId::Cube6 ? "cube6" : "cube24";
}

std::string to_string(ImageExtentClass c) {
  switch (c) {
    case ImageExtentClass::Multipoint: return "multipoint";
    case ImageExtentClass::Pseudoimage: return "pseudoimage";
    case ImageExtentClass::FullImage: return "fullimage";
  }
  return "?";
}

namespace {

// Orientations taking the tile optical axis (+z) onto each cube face normal.
const std::array<Quat, 6>& face_orientations() {
  static const std::array<Quat, 6> faces = {
      Quat(Eigen::AngleAxisd(kPi / 2, Vec3::UnitY())),   // +x
      Quat(Eigen::AngleAxisd(-kPi / 2, Vec3::UnitY())),  // -x
      Quat(Eigen::AngleAxisd(-kPi / 2, Vec3::UnitX())),  // +y
      Quat(Eigen::AngleAxisd(kPi / 2, Vec3::UnitX())),   // -y
      Quat::Identity(),                                  // +z
      Quat(Eigen::AngleAxisd(kPi, Vec3::UnitX())),       // -z
  };
  return faces;
}

// Sub-tile placement for the 2x2 face split: per face, four axes tilted off
// the face normal in a chiral pinwheel (tilt magnitude, tilt azimuth, tile
// roll). A symmetric face-diagonal split cannot cover the sphere with 45x45
// fields (cube-edge midpoints fall ~0.5 deg outside every tile); this triple
// was selected by a worst-case scan and leaves a +0.27 deg margin everywhere.
constexpr double kCube24TiltDeg = 31.25;
constexpr double kCube24TiltAzimuthDeg = 55.3;
constexpr double kCube24RollDeg = 9.9;

SensorTile make_tile(int id, const Quat& q, double fov_deg, int cols, int rows) {
  SensorTile t;
  t.tile_id = id;
  t.boresight = q.normalized();
  t.fov_x_deg = fov_deg;
  t.fov_y_deg = fov_deg;
  t.fpa_cols = cols;
  t.fpa_rows = rows;
  t.pixels_per_rad = (cols / 2.0) / (deg2rad(fov_deg) / 2.0);
  return t;
}

}  // namespace

SensorArray build_tiling(LayoutId layout_id, int fpa_cols, int fpa_rows) {
  SensorArray array;
  array.layout_id = layout_id;
  const auto& faces = face_orientations();
  if (layout_id == LayoutId::Cube6) {
    for (int f = 0; f < 6; ++f)
      array.tiles.push_back(make_tile(f, faces[f], 90.0, fpa_cols, fpa_rows));
    return array;
  }
  const double tilt = deg2rad(kCube24TiltDeg);
  const double roll = deg2rad(kCube24RollDeg);
  int id = 0;
  for (int f = 0; f < 6; ++f) {
    for (int k = 0; k < 4; ++k) {
      const double psi = deg2rad(kCube24TiltAzimuthDeg) + k * kPi / 2;
      const Vec3 axis(-std::sin(psi), std::cos(psi), 0.0);  // normal to the tilt azimuth
      const Quat offset(Eigen::AngleAxisd(tilt, axis) *
                        Eigen::AngleAxisd(roll, Vec3::UnitZ()));
      array.tiles.push_back(make_tile(id++, faces[f] * offset, 45.0, fpa_cols, fpa_rows));
    }
  }
  return array;
}

std::optional<PixelCoord> direction_to_pixel(const SensorTile& tile, const Vec3& dir_body) {
  if (std::abs(dir_body.norm() - 1.0) > 1e-6)
    throw RuntimeError("direction_to_pixel requires a unit direction");
  const Vec3 d = tile.boresight.conjugate() * dir_body;
  const double theta = std::atan2(std::hypot(d.x(), d.y()), d.z());
  double tx = 0.0, ty = 0.0;
  const double s = std::hypot(d.x(), d.y());
  if (s > 0.0) {
    tx = theta * d.x() / s;
    ty = theta * d.y() / s;
  }
  // boundary membership to floating-point precision
  constexpr double tol = 1e-12;
  if (std::abs(tx) > tile.half_fov_x_rad() + tol ||
      std::abs(ty) > tile.half_fov_y_rad() + tol)
    return std::nullopt;
  return PixelCoord{tile.fpa_cols / 2.0 + tile.pixels_per_rad * tx,
                    tile.fpa_rows / 2.0 + tile.pixels_per_rad * ty};
}

Vec3 pixel_to_direction(const SensorTile& tile, const PixelCoord& px) {
  constexpr double tol = 1e-9;
  if (px.u < -tol || px.u > tile.fpa_cols + tol || px.v < -tol ||
      px.v > tile.fpa_rows + tol)
    throw RuntimeError("pixel outside active area");
  const double tx = (px.u - tile.fpa_cols / 2.0) / tile.pixels_per_rad;
  const double ty = (px.v - tile.fpa_rows / 2.0) / tile.pixels_per_rad;
  const double theta = std::hypot(tx, ty);
  Vec3 d(0, 0, 1);
  if (theta > 0.0) {
    const double st = std::sin(theta);
    d = Vec3(st * tx / theta, st * ty / theta, std::cos(theta));
  }
  return tile.boresight * d;
}

int owning_tile(const SensorArray& array, const Vec3& dir_body) {
  for (const auto& tile : array.tiles)
    if (direction_to_pixel(tile, dir_body)) return tile.tile_id;
  return -1;
}

CoverageStats coverage(const SensorArray& array, std::size_t n_samples, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  CoverageStats stats;
  stats.n_samples = n_samples;
  std::size_t overlapped = 0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    Vec3 d(n01(rng), n01(rng), n01(rng));
    while (d.norm() < 1e-12) d = Vec3(n01(rng), n01(rng), n01(rng));
    d.normalize();
    int hits = 0;
    for (const auto& tile : array.tiles) {
      if (direction_to_pixel(tile, d)) {
        if (++hits >= 2) break;
      }
    }
    if (hits == 0) ++stats.n_missed;
    if (hits >= 2) ++overlapped;
  }
  stats.covered_fraction = 1.0 - double(stats.n_missed) / double(n_samples);
  stats.overlap_fraction = double(overlapped) / double(n_samples);
  return stats;
}

double ftheta_deviation(const std::function<double(double)>& radius_of_theta,
                        double theta_max_rad, int n_samples) {
  if (!(theta_max_rad > 0.0) || n_samples < 2)
    throw RuntimeError("ftheta_deviation needs theta_max > 0 and >= 2 samples");
  std::vector<double> th(n_samples), rr(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    th[i] = theta_max_rad * i / (n_samples - 1);
    rr[i] = radius_of_theta(th[i]);
  }
  long double num = 0.0L, den = 0.0L;
  for (int i = 0; i < n_samples; ++i) {
    const long double w = (i == 0 || i == n_samples - 1) ? 0.5L : 1.0L;
    num += w * (long double)th[i] * (long double)rr[i];
    den += w * (long double)th[i] * (long double)th[i];
  }
  const double k_fit = double(num / den);

  // If some representable slope reproduces every sample bit-exactly the data
  // is f-theta to double precision; the least-squares slope is within an ulp
  // of it, so scan its immediate neighborhood.
  const double inf = std::numeric_limits<double>::infinity();
  for (double c : {k_fit, std::nextafter(k_fit, inf), std::nextafter(k_fit, -inf),
                   std::nextafter(std::nextafter(k_fit, inf), inf),
                   std::nextafter(std::nextafter(k_fit, -inf), -inf)}) {
    bool exact = true;
    for (int i = 0; i < n_samples && exact; ++i) exact = (c * th[i] == rr[i]);
    if (exact) return 0.0;
  }

  double dev = 0.0;
  for (int i = 0; i < n_samples; ++i)
    dev = std::max(dev, std::abs(rr[i] - k_fit * th[i]));
  return dev / (k_fit * theta_max_rad);
}

ImageExtentClass classify_image_extent(int extent_px) {
  if (extent_px < 1) throw RuntimeError("image extent must be >= 1 pixel");
  if (extent_px <= 4) return ImageExtentClass::Multipoint;
  if (extent_px <= 11) return ImageExtentClass::Pseudoimage;
  return ImageExtentClass::FullImage;
}

Measurement synthesize_measurement(const scene::CarrierState& carrier,
                                   const scene::KinematicState& target,
                                   const SensorArray& array, const NoiseParams& noise,
                                   std::mt19937_64& rng, const geodesy::Environment* env,
                                   const SynthesisOptions& opts,
                                   const std::string& carrier_id) {
  const Vec3 baseline = target.position_m - carrier.position_m;
  const double range = baseline.norm();
  if (range == 0.0) throw RuntimeError("undefined line of sight");
  const Vec3 d_true = baseline / range;

  std::normal_distribution<double> n01(0.0, 1.0);
  Measurement m;
  m.t_s = carrier.time_s;
  m.carrier_id = carrier_id;
  m.carrier_mode = carrier.mode;
  m.tac_situation = opts.tac_situation;

  m.carrier_pos_meas_m = carrier.position_m;
  if (noise.pos_std_m > 0.0)
    m.carrier_pos_meas_m += noise.pos_std_m * Vec3(n01(rng), n01(rng), n01(rng));

  Vec3 d = d_true;
  if (noise.bearing_std_rad > 0.0) {
    Vec3 e1, e2;
    tangent_basis(d_true, e1, e2);
    d = (d_true + noise.bearing_std_rad * (n01(rng) * e1 + n01(rng) * e2)).normalized();
  }

  const Vec3 d_body = carrier.attitude.conjugate() * d;
  const int tile_id = owning_tile(array, d_body);
  if (tile_id >= 0) {
    const auto& tile = array.tiles[tile_id];
    const auto px = direction_to_pixel(tile, d_body);
    m.tile_id = tile_id;
    m.pixel_ix = std::min(int(px->u), tile.fpa_cols - 1);
    m.pixel_iy = std::min(int(px->v), tile.fpa_rows - 1);
    if (opts.quantize_to_pixel) {
      const PixelCoord center{m.pixel_ix + 0.5, m.pixel_iy + 0.5};
      d = carrier.attitude * pixel_to_direction(tile, center);
    }
  }
  m.los_dir_meas = d;

  if (env != nullptr) {
    m.obs_extinction = geodesy::path_extinction(env->atmosphere, env->ellipsoid,
                                                carrier.position_m, target.position_m);
    const auto g = geodesy::ecef_to_geodetic(
        geodesy::EcefVector::from(target.position_m), env->ellipsoid);
    m.obs_radiance = env->atmosphere.radiance_at(g.altitude_m, g.latitude_rad,
                                                 g.longitude_rad, target.time_s);
  }
  return m;
}

ObservationSet assemble_observation_set(std::vector<Measurement> measurements,
                                        std::optional<std::pair<double, double>> window) {
  if (window) {
    std::erase_if(measurements, [&](const Measurement& m) {
      return m.t_s < window->first || m.t_s > window->second;
    });
  }
  std::stable_sort(measurements.begin(), measurements.end(),
                   [](const Measurement& a, const Measurement& b) {
                     return a.t_s != b.t_s ? a.t_s < b.t_s : a.carrier_id < b.carrier_id;
                   });
  std::map<std::string, double> last_t;
  for (const auto& m : measurements) {
    auto it = last_t.find(m.carrier_id);
    if (it != last_t.end() && it->second == m.t_s)
      throw RuntimeError("duplicate timestamp from carrier " + m.carrier_id);
    last_t[m.carrier_id] = m.t_s;
  }
  return ObservationSet{std::move(measurements)};
}

}  // namespace neos::sensor
