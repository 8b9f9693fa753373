#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace neos {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat9 = Eigen::Matrix<double, 9, 9>;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;
using Quat = Eigen::Quaterniond;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Runtime failure inside a simulation or estimation component.
class RuntimeError : public std::runtime_error {
 public:
  explicit RuntimeError(const std::string& what) : std::runtime_error(what) {}
};

/// Scenario file violates the schema (missing field, bad type, bad value).
class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(const std::string& what) : std::runtime_error(what) {}
};

// splitmix64; used to derive independent, order-invariant RNG stream seeds
// from (master seed, stream tags).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag_a,
                              std::uint64_t tag_b = 0, std::uint64_t tag_c = 0) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ tag_a);
  h = splitmix64(h ^ tag_b);
  h = splitmix64(h ^ tag_c);
  return h;
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

/// Deterministic orthonormal basis of the plane normal to a unit vector.
/// The pair (e1, e2, n) is right-handed.
inline void tangent_basis(const Vec3& n, Vec3& e1, Vec3& e2) {
  const Vec3 ref = std::abs(n.z()) < 0.9 ? Vec3(0, 0, 1) : Vec3(1, 0, 0);
  e1 = ref.cross(n).normalized();
  e2 = n.cross(e1);
}

}  // namespace neos
