#include <doctest.h>

#include <random>

#include "neos/geodesy.hpp"

using namespace neos;
using namespace neos::geodesy;

namespace {

// independently coded conversion used as a cross-check oracle
Vec3 reference_geodetic_to_ecef(double alt, double lat, double lon,
                                const EllipsoidModel& e) {
  const double a = e.semi_major_axis_m;
  const double b = a * (1.0 - e.flattening);
  const double e2 = 1.0 - (b * b) / (a * a);
  const double n = a / std::sqrt(1.0 - e2 * std::sin(lat) * std::sin(lat));
  return Vec3((n + alt) * std::cos(lat) * std::cos(lon),
              (n + alt) * std::cos(lat) * std::sin(lon),
              (n * (1.0 - e2) + alt) * std::sin(lat));
}

}  // namespace

TEST_CASE("geodetic_to_ecef reference points") {
  const auto e = wgs84();

  const auto equator = geodetic_to_ecef({0.0, 0.0, 0.0}, e);
  CHECK(equator.x_m == doctest::Approx(6378137.0).epsilon(1e-12));
  CHECK(equator.y_m == doctest::Approx(0.0).scale(1.0));
  CHECK(equator.z_m == doctest::Approx(0.0).scale(1.0));

  const auto pole = geodetic_to_ecef({0.0, kPi / 2, 0.7}, e);
  const double b = e.semi_minor_axis_m();
  CHECK(std::hypot(pole.x_m, pole.y_m) < 1e-6);
  CHECK(pole.z_m == doctest::Approx(b).epsilon(1e-12));

  const GeodeticCoord g{1000.0, deg2rad(45.0), deg2rad(45.0)};
  const auto r = geodetic_to_ecef(g, e);
  const Vec3 ref = reference_geodetic_to_ecef(g.altitude_m, g.latitude_rad,
                                              g.longitude_rad, e);
  CHECK((r.vec() - ref).norm() < 1e-9);
  const auto back = ecef_to_geodetic(r, e);
  const auto r2 = geodetic_to_ecef(back, e);
  CHECK((r.vec() - r2.vec()).norm() < 1e-6);
}

TEST_CASE("ecef_to_geodetic inverse reference points") {
  const auto e = wgs84();

  const auto g0 = ecef_to_geodetic({6378137.0, 0.0, 0.0}, e);
  CHECK(std::abs(g0.altitude_m) < 1e-9);
  CHECK(std::abs(g0.latitude_rad) < 1e-12);
  CHECK(std::abs(g0.longitude_rad) < 1e-12);

  const auto gp = ecef_to_geodetic({0.0, 0.0, e.semi_minor_axis_m()}, e);
  CHECK(gp.latitude_rad == doctest::Approx(kPi / 2).epsilon(1e-12));
  CHECK(std::abs(gp.altitude_m) < 1e-9);

  CHECK_THROWS_AS(ecef_to_geodetic({0.0, 0.0, 0.0}, e), RuntimeError);
}

TEST_CASE("geodetic <-> ecef round trip over random sample") {
  const auto e = wgs84();
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> alt(-1000.0, 100000.0);
  std::uniform_real_distribution<double> lat(-kPi / 2, kPi / 2);
  std::uniform_real_distribution<double> lon(-kPi, kPi);
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const GeodeticCoord g{alt(rng), lat(rng), lon(rng)};
    const auto r = geodetic_to_ecef(g, e);
    const auto back = ecef_to_geodetic(r, e);
    const auto r2 = geodetic_to_ecef(back, e);
    worst = std::max(worst, (r.vec() - r2.vec()).norm());
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("terrain bilinear interpolation") {
  TerrainMap m;
  m.lat_rad = {0.0, 0.1, 0.2};
  m.lon_rad = {0.0, 0.1};
  m.heights_m = {10.0, 20.0, 30.0, 40.0, 50.0, 60.0};

  SUBCASE("exact at nodes") {
    CHECK(terrain_height_at(m, 0.0, 0.0) == 10.0);
    CHECK(terrain_height_at(m, 0.1, 0.1) == 40.0);
    CHECK(terrain_height_at(m, 0.2, 0.0) == 50.0);
  }
  SUBCASE("constant cell") {
    TerrainMap flat = TerrainMap::flat(7.0);
    CHECK(terrain_height_at(flat, 0.3, 0.4) == doctest::Approx(7.0));
  }
  SUBCASE("hand-evaluated cell center") {
    TerrainMap c;
    c.lat_rad = {0.0, 1.0};
    c.lon_rad = {0.0, 1.0};
    c.heights_m = {0.0, 100.0, 100.0, 200.0};
    CHECK(terrain_height_at(c, 0.5, 0.5) == doctest::Approx(100.0).epsilon(1e-12));
  }
  SUBCASE("outside hull") {
    CHECK_THROWS_WITH_AS(terrain_height_at(m, -0.01, 0.0), "outside map coverage",
                         RuntimeError);
    CHECK_THROWS_AS(terrain_height_at(m, 0.0, 0.2), RuntimeError);
  }
  SUBCASE("continuous across the shared edge") {
    for (double lon : {0.0, 0.03, 0.07, 0.1}) {
      const double lo = terrain_height_at(m, std::nextafter(0.1, 0.0), lon);
      const double hi = terrain_height_at(m, std::nextafter(0.1, 1.0), lon);
      CHECK(std::abs(lo - hi) < 1e-9);
    }
  }
}

TEST_CASE("local ENU frame") {
  const auto e = wgs84();

  const auto f0 = local_enu_frame({0.0, 0.0, 0.0}, e);
  CHECK((f0.east - Vec3(0, 1, 0)).norm() < 1e-15);
  CHECK((f0.north - Vec3(0, 0, 1)).norm() < 1e-15);
  CHECK((f0.up - Vec3(1, 0, 0)).norm() < 1e-15);

  const auto f1 = local_enu_frame({0.0, deg2rad(45.0), deg2rad(90.0)}, e);
  CHECK((f1.up - Vec3(0, std::cos(deg2rad(45.0)), std::sin(deg2rad(45.0)))).norm() < 1e-12);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lat(-kPi / 2, kPi / 2);
  std::uniform_real_distribution<double> lon(-kPi, kPi);
  for (int i = 0; i < 1000; ++i) {
    const auto f = local_enu_frame({0.0, lat(rng), lon(rng)}, e);
    CHECK(std::abs(f.east.dot(f.north)) < 1e-12);
    CHECK(std::abs(f.east.dot(f.up)) < 1e-12);
    CHECK(std::abs(f.north.dot(f.up)) < 1e-12);
    CHECK(std::abs(f.east.norm() - 1.0) < 1e-12);
    Mat3 m;
    m.col(0) = f.east;
    m.col(1) = f.north;
    m.col(2) = f.up;
    CHECK(m.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("atmosphere point queries and path extinction") {
  AtmosphereModel atm;
  atm.extinction_per_km = 0.1;
  atm.scale_height_m = 8000.0;
  atm.background_radiance = 2.0;
  CHECK(atm.extinction_at(0.0) == doctest::Approx(0.1));
  CHECK(atm.extinction_at(8000.0) == doctest::Approx(0.1 / std::exp(1.0)));
  CHECK(atm.radiance_at(1234.0) == 2.0);

  const auto e = wgs84();
  const Vec3 p0(6378137.0, 0, 0);
  const Vec3 p1(6378137.0, 10000.0, 0);
  const double ext = path_extinction(atm, e, p0, p1);
  CHECK(ext > 0.0);
  CHECK(ext == doctest::Approx(0.1 * 10.0).epsilon(0.05));
}
