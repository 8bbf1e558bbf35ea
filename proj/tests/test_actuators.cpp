#include <doctest.h>

#include <cmath>

#include "pneumahand/actuators.hpp"
#include "pneumahand/errors.hpp"
#include "pneumahand/hand.hpp"

using namespace pneumahand;

namespace {

TwoCompartmentFingerSpec finger(double lb, double lt) {
  TwoCompartmentFingerSpec f;
  f.base.arc_length = lb;
  f.tip.arc_length = lt;
  f.tip_stiffness = calibrate_tip_stiffness(f);
  return f;
}

}  // namespace

// Reference values from tests/oracles/arc_composition.py (numerical
// integration of the backbone tangent).
TEST_CASE("two-arc tip pose matches the quadrature oracle") {
  struct Case {
    double lb, lt, bb, bt, x, y, tangent;
  };
  const double q = kPi / 2.0;
  const Case cases[] = {
      {0.05, 0.04, q, q, 0.006366197723890, 0.057295779513412, kPi},
      {0.05, 0.04, q, 0.0, 0.031830988618507, 0.071830988618535, q},
      {0.05, 0.04, 0.0, q, 0.075464790894853, 0.025464790894760, q},
      {0.045, 0.045, deg2rad(30), deg2rad(70), 0.060828759142471, 0.049808566573179, 1.745329251987138},
  };
  for (const auto& c : cases) {
    const auto pose = finger_pose_from_bends(finger(c.lb, c.lt), c.bb, c.bt);
    CHECK(pose.position.x() == doctest::Approx(c.x).epsilon(1e-9));
    CHECK(pose.position.y() == doctest::Approx(c.y).epsilon(1e-9));
    CHECK(pose.tangent == doctest::Approx(c.tangent).epsilon(1e-9));
  }
}

TEST_CASE("arc end is continuous through zero bend") {
  const auto straight = arc_end(0.05, 0.0);
  CHECK(straight.position.x() == doctest::Approx(0.05));
  CHECK(straight.position.y() == 0.0);
  const auto tiny = arc_end(0.05, 1e-9);
  CHECK(tiny.position.x() == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(tiny.position.y() == doctest::Approx(0.05 * 1e-9 / 2.0).epsilon(1e-6));
}

TEST_CASE("free pose rejects pressures outside the compartment range") {
  const auto f = finger(0.045, 0.045);
  CHECK_NOTHROW(finger_free_pose(f, 0.0, 250e3));
  CHECK_THROWS_AS(finger_free_pose(f, -1.0, 0.0), DomainError);
  CHECK_THROWS_AS(finger_free_pose(f, 0.0, 250e3 + 1.0), DomainError);
}

TEST_CASE("tip force anchors: full force when held extended, none at the free pose") {
  const auto f = finger(0.045, 0.045);
  const Eigen::Vector2d extended = finger_free_pose(f, 0.0, 0.0).position;
  CHECK(fingertip_force(f, 250e3, 250e3, extended).norm() == doctest::Approx(8.3).epsilon(1e-12));
  const Eigen::Vector2d flexed = finger_free_pose(f, 250e3, 250e3).position;
  CHECK(fingertip_force(f, 250e3, 250e3, flexed).norm() == 0.0);
  // Force never exceeds the clamp.
  for (double pb : {0.0, 100e3, 250e3})
    for (double pt : {0.0, 100e3, 250e3})
      CHECK(fingertip_force(f, pb, pt, extended).norm() <= 8.3 + 1e-12);
}

TEST_CASE("moment arm interpolation is piecewise linear and clamped") {
  BellowSpec b = default_hand_model().thumb_proximal.bellow;
  CHECK(b.effective_arm(deg2rad(20)) == doctest::Approx(0.0200));
  CHECK(b.effective_arm(deg2rad(30)) == doctest::Approx(0.0186));
  CHECK(b.effective_arm(deg2rad(-5)) == doctest::Approx(b.moment_arm_table.front().arm));
  CHECK(b.effective_arm(deg2rad(150)) == doctest::Approx(b.moment_arm_table.back().arm));
}

TEST_CASE("bellow torque is proportional to pressure and range checked") {
  const BellowSpec b = default_hand_model().thumb_middle.bellow;
  const double a = deg2rad(40);
  CHECK(bellow_torque(b, 0.0, a) == 0.0);
  CHECK(bellow_torque(b, 200e3, a) == doctest::Approx(2.0 * bellow_torque(b, 100e3, a)));
  CHECK(bellow_torque(b, 250e3, deg2rad(20)) == doctest::Approx(3.2));
  CHECK_THROWS_AS(bellow_torque(b, -1.0, a), DomainError);
  CHECK_THROWS_AS(bellow_torque(b, b.max_pressure * 1.01, a), DomainError);
  CHECK_THROWS_AS(bellow_torque(b, 1e5, b.max_opening + 0.01), DomainError);
}

TEST_CASE("moment arm fit recovers a proportional table") {
  BellowSpec b = default_hand_model().thumb_distal.bellow;
  CalibrationTable t;
  for (int ia = 1; ia <= 5; ++ia)
    for (int ip = 1; ip <= 5; ++ip) {
      const double angle = deg2rad(20.0 * ia), p = 50e3 * ip;
      t.samples.push_back({angle, p, bellow_torque(b, p, angle)});
    }
  const auto arms = fit_moment_arm(t, b);
  REQUIRE(arms.size() == 5);
  for (const auto& a : arms) CHECK(a.arm == doctest::Approx(b.effective_arm(a.angle)).epsilon(1e-12));
}

TEST_CASE("moment arm fit rejects degenerate and non-physical tables") {
  BellowSpec b = default_hand_model().thumb_distal.bellow;
  CalibrationTable one_angle;
  for (int ip = 1; ip <= 3; ++ip) one_angle.samples.push_back({deg2rad(20), 50e3 * ip, 0.1 * ip});
  CHECK_THROWS_AS(fit_moment_arm(one_angle, b), FitError);

  CalibrationTable rising;
  for (int ia = 1; ia <= 3; ++ia)
    for (int ip = 1; ip <= 3; ++ip) {
      const double angle = deg2rad(20.0 * ia), p = 50e3 * ip;
      // Arm grows 20% per step: violates the monotone-within-5% rule at 40 and 60 deg.
      rising.samples.push_back({angle, p, p * b.pouch_area * 0.01 * std::pow(1.2, ia)});
    }
  try {
    fit_moment_arm(rising, b);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("40") != std::string::npos);
  }

  CalibrationTable negative;
  for (int ia = 1; ia <= 2; ++ia)
    for (int ip = 1; ip <= 2; ++ip) negative.samples.push_back({deg2rad(20.0 * ia), 50e3 * ip, -1.0});
  CHECK_THROWS_AS(fit_moment_arm(negative, b), ValidationError);
}

TEST_CASE("calibration table must be a rectangular grid without duplicates") {
  CalibrationTable t;
  t.samples = {{0.1, 1e5, 1.0}, {0.1, 2e5, 2.0}, {0.2, 1e5, 1.0}};
  CHECK_THROWS_AS(t.validate(), ValidationError);
  t.samples.push_back({0.2, 2e5, 2.0});
  CHECK_NOTHROW(t.validate());
  t.samples.push_back({0.2, 2e5, 2.0});
  CHECK_THROWS_AS(t.validate(), ValidationError);
}

TEST_CASE("compartment volume grows with bend") {
  PneuFlexCompartmentSpec c;
  CHECK(compartment_volume(c, 0.0) == doctest::Approx(c.rest_volume));
  CHECK(compartment_volume(c, 1.0) > compartment_volume(c, 0.5));
}
