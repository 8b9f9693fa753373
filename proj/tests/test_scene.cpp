#include <doctest.h>

#include "neos/scene.hpp"

using namespace neos;
using namespace neos::scene;

namespace {

ObjectClassCatalog two_state_catalog() {
  ObjectClassCatalog catalog;
  ObjectClass c;
  c.class_id = 1;
  c.name = "demo";
  ObjectState cv;
  cv.state_id = 1;
  cv.model.kind = MotionKind::ConstantVelocity;
  cv.model.bounds.speed_max_mps = 500.0;
  ObjectState ca;
  ca.state_id = 2;
  ca.model.kind = MotionKind::ConstantAcceleration;
  ca.model.nominal_accel_mps2 = Vec3(0, 0, -9.8);
  ca.model.bounds.speed_max_mps = 500.0;
  ca.model.bounds.accel_max_mps2 = 20.0;
  c.states = {cv, ca};
  c.transition_rates_per_s = MatX::Zero(2, 2);
  catalog.classes.push_back(c);
  return catalog;
}

// RK4 on the turn dynamics dv/dt = omega x v, used as the fine-step oracle
KinematicState integrate_turn(const KinematicState& s, const MotionModel& m,
                              double dt, int substeps) {
  const Vec3 w = m.turn_rate_radps * m.turn_axis.normalized();
  Vec3 r = s.position_m, v = s.velocity_mps;
  const double h = dt / substeps;
  for (int i = 0; i < substeps; ++i) {
    const Vec3 k1r = v, k1v = w.cross(v);
    const Vec3 k2r = v + 0.5 * h * k1v, k2v = w.cross(v + 0.5 * h * k1v);
    const Vec3 k3r = v + 0.5 * h * k2v, k3v = w.cross(v + 0.5 * h * k2v);
    const Vec3 k4r = v + h * k3v, k4v = w.cross(v + h * k3v);
    r += h / 6.0 * (k1r + 2 * k2r + 2 * k3r + k4r);
    v += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
  }
  KinematicState out;
  out.time_s = s.time_s + dt;
  out.position_m = r;
  out.velocity_mps = v;
  return out;
}

}  // namespace

TEST_CASE("propagate: exact zero-noise kinematics") {
  std::mt19937_64 rng(1);

  SUBCASE("constant velocity") {
    KinematicState s;
    s.velocity_mps = Vec3(100, 0, 0);
    MotionModel m;
    m.kind = MotionKind::ConstantVelocity;
    const auto out = propagate(s, m, 1.0, rng);
    CHECK(out.position_m == Vec3(100, 0, 0));
    CHECK(out.velocity_mps == Vec3(100, 0, 0));
  }
  SUBCASE("constant acceleration") {
    KinematicState s;
    s.acceleration_mps2 = Vec3(0, 0, -9.8);
    MotionModel m;
    m.kind = MotionKind::ConstantAcceleration;
    const auto out = propagate(s, m, 2.0, rng);
    CHECK(out.position_m.z() == doctest::Approx(-19.6).epsilon(1e-12));
    CHECK(out.velocity_mps.z() == doctest::Approx(-19.6).epsilon(1e-12));
  }
  SUBCASE("coordinated turn vs fine-step integrator") {
    KinematicState s;
    s.position_m = Vec3(10, -5, 3);
    s.velocity_mps = Vec3(120, 40, 5);
    MotionModel m;
    m.kind = MotionKind::CoordinatedTurn;
    m.turn_rate_radps = 0.15;
    m.turn_axis = Vec3(0, 0, 1);
    const double dt = 2.0;
    const auto closed = propagate(s, m, dt, rng);
    const auto fine = integrate_turn(s, m, dt, 200);
    CHECK((closed.position_m - fine.position_m).norm() < 1e-6);
    CHECK((closed.velocity_mps - fine.velocity_mps).norm() < 1e-6);
    // heading rotated by omega*dt
    const Vec3 v0(s.velocity_mps.x(), s.velocity_mps.y(), 0);
    const Vec3 v1(closed.velocity_mps.x(), closed.velocity_mps.y(), 0);
    const double angle = std::atan2(v0.cross(v1).z(), v0.dot(v1));
    CHECK(angle == doctest::Approx(m.turn_rate_radps * dt).epsilon(1e-9));
  }
  SUBCASE("dt must be positive") {
    KinematicState s;
    MotionModel m;
    CHECK_THROWS_AS(propagate(s, m, 0.0, rng), RuntimeError);
  }
}

TEST_CASE("propagate: zero-noise closed form over random states") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int i = 0; i < 200; ++i) {
    KinematicState s;
    s.position_m = Vec3(u(rng), u(rng), u(rng));
    s.velocity_mps = Vec3(u(rng), u(rng), u(rng));
    s.acceleration_mps2 = Vec3(u(rng), u(rng), u(rng));
    const double dt = 0.25;
    MotionModel m;
    m.kind = MotionKind::ConstantAcceleration;
    const auto out = propagate(s, m, dt, rng);
    const Vec3 expect =
        s.position_m + s.velocity_mps * dt + 0.5 * s.acceleration_mps2 * dt * dt;
    CHECK((out.position_m - expect).norm() <= 1e-9 * (1.0 + expect.norm()));
  }
}

TEST_CASE("simulate_trajectory") {
  const auto catalog = two_state_catalog();

  SUBCASE("single CV state gives a straight constant-speed line") {
    KinematicState init;
    init.velocity_mps = Vec3(50, 0, 0);
    StateSchedule sched{{{1, 0.0}}};
    const auto traj = simulate_trajectory(init, 1, sched, catalog, 1.0, 10, 7);
    REQUIRE(traj.size() == 11);
    for (std::size_t k = 0; k < traj.size(); ++k) {
      CHECK(traj.at(k).position_m.x() == doctest::Approx(50.0 * k).epsilon(1e-12));
      CHECK(traj.at(k).velocity_mps.norm() == doctest::Approx(50.0));
    }
  }
  SUBCASE("determinism: same seed, same bytes") {
    KinematicState init;
    init.velocity_mps = Vec3(50, 10, 0);
    StateSchedule sched{{{1, 0.0}, {2, 5.0}}};
    ObjectClassCatalog noisy = catalog;
    noisy.classes[0].states[0].model.noise_intensity = 0.5;
    noisy.classes[0].states[1].model.noise_intensity = 0.5;
    const auto a = simulate_trajectory(init, 1, sched, noisy, 0.5, 20, 99);
    const auto b = simulate_trajectory(init, 1, sched, noisy, 0.5, 20, 99);
    CHECK(serialize(a) == serialize(b));
    const auto c = simulate_trajectory(init, 1, sched, noisy, 0.5, 20, 100);
    CHECK(serialize(a) != serialize(c));
  }
  SUBCASE("CV->CA switch keeps velocity continuous, steps acceleration") {
    KinematicState init;
    init.velocity_mps = Vec3(100, 0, 0);
    StateSchedule sched{{{1, 0.0}, {2, 5.0}}};
    const auto traj = simulate_trajectory(init, 1, sched, catalog, 1.0, 10, 7);
    REQUIRE(traj.size() == 11);
    CHECK(traj.state_ids[4] == 1);
    CHECK(traj.state_ids[6] == 2);
    CHECK(traj.at(5).velocity_mps.x() == doctest::Approx(100.0));  // continuous
    CHECK(traj.at(4).acceleration_mps2.norm() == 0.0);
    CHECK(traj.at(6).acceleration_mps2.z() == doctest::Approx(-9.8));
    // post-switch samples follow the CA propagation oracle
    const Vec3 expect = traj.at(5).position_m + traj.at(5).velocity_mps * 1.0 +
                        0.5 * Vec3(0, 0, -9.8) * 1.0;
    CHECK((traj.at(6).position_m - expect).norm() < 1e-9);
  }
  SUBCASE("unknown state in schedule") {
    KinematicState init;
    StateSchedule sched{{{9, 0.0}}};
    CHECK_THROWS_AS(simulate_trajectory(init, 1, sched, catalog, 1.0, 5, 1), RuntimeError);
  }
  SUBCASE("speed bound respected under process noise, clips logged") {
    ObjectClassCatalog tight = catalog;
    tight.classes[0].states[0].model.noise_intensity = 200.0;
    tight.classes[0].states[0].model.bounds.speed_max_mps = 60.0;
    KinematicState init;
    init.velocity_mps = Vec3(59, 0, 0);
    StateSchedule sched{{{1, 0.0}}};
    const auto traj = simulate_trajectory(init, 1, sched, tight, 0.5, 100, 11);
    for (const auto& s : traj.samples) CHECK(s.velocity_mps.norm() <= 60.0 + 1e-9);
    CHECK(!traj.clip_events.empty());
  }
}

TEST_CASE("carrier path and catalog lookups") {
  CarrierState c;
  c.position_m = Vec3(1000, 0, 0);
  c.velocity_mps = Vec3(0, 10, 0);
  const auto path = carrier_path(c, 0.5, 4);
  REQUIRE(path.size() == 5);
  CHECK(path[4].position_m.y() == doctest::Approx(20.0));
  CHECK(carrier_state_at(c, 3.0).position_m.y() == doctest::Approx(30.0));

  CarrierCatalog cat;
  cat.modes["c1"] = {CarrierModeParams{1, 5e-4, 10.0, 1e3, 5e4}};
  CHECK(cat.lookup("c1", 1).frame_rate_hz == 10.0);
  CHECK_THROWS_AS(cat.lookup("c2", 1), RuntimeError);
  CHECK_THROWS_AS(cat.lookup("c1", 2), RuntimeError);
}
