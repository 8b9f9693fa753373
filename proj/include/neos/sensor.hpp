#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "neos/scene.hpp"

namespace neos::sensor {

/// One staring sensor of the conformal array. The field of view is square in
/// the equidistant (f-theta) image plane: a body direction at off-boresight
/// angle theta and azimuth az is inside the tile iff both components of
/// theta*(cos az, sin az) are within +-fov/2.
struct SensorTile {
  int tile_id = 0;
  Quat boresight = Quat::Identity();  // tile frame -> carrier body frame
  double fov_x_deg = 90.0;            // full extent per axis
  double fov_y_deg = 90.0;
  int fpa_cols = 1024;
  int fpa_rows = 1024;
  double pixels_per_rad = 0.0;  // f-theta radial scale k

  double half_fov_x_rad() const { return deg2rad(fov_x_deg) / 2.0; }
  double half_fov_y_rad() const { return deg2rad(fov_y_deg) / 2.0; }
};

enum class LayoutId { Cube6, Cube24 };

LayoutId layout_from_string(const std::string& s);
std::string to_string(LayoutId id);

struct SensorArray {
  LayoutId layout_id = LayoutId::Cube6;
  std::vector<SensorTile> tiles;
};

/// Continuous focal-plane coordinates; the principal point is at the image
/// center (cols/2, rows/2).
struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

enum class ImageExtentClass { Multipoint, Pseudoimage, FullImage };

std::string to_string(ImageExtentClass c);

/// One time-stamped bearings-only observation with its context vectors.
struct Measurement {
  double t_s = 0.0;
  std::string carrier_id;
  Vec3 carrier_pos_meas_m = Vec3::Zero();
  Vec3 los_dir_meas = Vec3::UnitX();  // unit, rectangular frame
  int carrier_mode = 1;
  double obs_extinction = 0.0;  // integrated extinction along the path
  double obs_radiance = 0.0;    // background radiance at the object
  std::vector<double> tac_situation;  // opaque pass-through tags
  int tile_id = -1;
  int pixel_ix = -1;
  int pixel_iy = -1;
};

struct ObservationSet {
  std::vector<Measurement> measurements;  // strictly increasing t_s

  std::size_t size() const { return measurements.size(); }
  const Measurement& operator[](std::size_t k) const { return measurements[k]; }
};

struct NoiseParams {
  double pos_std_m = 0.0;
  double bearing_std_rad = 0.0;
};

SensorArray build_tiling(LayoutId layout_id, int fpa_cols = 1024, int fpa_rows = 1024);

/// f-theta projection into the tile's focal plane, or nullopt when the
/// direction falls outside the tile FOV. Throws on non-unit input.
std::optional<PixelCoord> direction_to_pixel(const SensorTile& tile, const Vec3& dir_body);

/// Inverse projection; throws for pixels outside the active area.
Vec3 pixel_to_direction(const SensorTile& tile, const PixelCoord& px);

/// Index of the first tile containing the direction (lowest id wins), -1 if none.
int owning_tile(const SensorArray& array, const Vec3& dir_body);

/// Monte Carlo sphere coverage: fraction of uniformly random directions seen
/// by at least one tile, and fraction seen by two or more.
struct CoverageStats {
  std::size_t n_samples = 0;
  std::size_t n_missed = 0;
  double covered_fraction = 0.0;
  double overlap_fraction = 0.0;
};
CoverageStats coverage(const SensorArray& array, std::size_t n_samples, std::uint64_t seed);

/// Maximum relative deviation of a radial projection from the best-fit
/// f-theta line: max |r(theta) - k_fit*theta| / (k_fit*theta_max) with the
/// least-squares slope k_fit, sampled on a dense trapezoid-weighted grid.
/// Data that is exactly proportional under double evaluation reports 0.
double ftheta_deviation(const std::function<double(double)>& radius_of_theta,
                        double theta_max_rad, int n_samples = (1 << 20) + 1);

/// The distortion bound the array design is held to.
inline constexpr double kFThetaMaxDeviation = 0.05;
inline bool meets_ftheta_bound(double deviation) { return deviation <= kFThetaMaxDeviation; }

/// Partition of image extents: 1..4 multipoint, 5..11 pseudoimage, >=12 full.
ImageExtentClass classify_image_extent(int extent_px);

struct SynthesisOptions {
  bool quantize_to_pixel = false;
  std::vector<double> tac_situation;
};

/// Eq-style measurement synthesis: true line of sight, Gaussian carrier
/// position error, small-angle tangent-plane bearing error, optional pixel
/// quantization in the owning tile.
Measurement synthesize_measurement(const scene::CarrierState& carrier,
                                   const scene::KinematicState& target,
                                   const SensorArray& array, const NoiseParams& noise,
                                   std::mt19937_64& rng,
                                   const geodesy::Environment* env = nullptr,
                                   const SynthesisOptions& opts = {},
                                   const std::string& carrier_id = "carrier");

/// Sorts and validates a set of measurements into the consecutive observation
/// record. Throws on duplicate timestamps from one carrier.
ObservationSet assemble_observation_set(std::vector<Measurement> measurements,
                                        std::optional<std::pair<double, double>> window = {});

}  // namespace neos::sensor
