#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "pneumahand/errors.hpp"
#include "pneumahand/hand.hpp"

using namespace pneumahand;

TEST_CASE("channel map has 16 stable codes") {
  CHECK(kChannelCount == 16);
  CHECK(static_cast<int>(ChannelId::IndexBase) == 0);
  CHECK(static_cast<int>(ChannelId::ThumbProximal) == 8);
  CHECK(static_cast<int>(ChannelId::PalmBellow) == 12);
  CHECK(static_cast<int>(ChannelId::AbductionRingLittle) == 15);
  std::set<std::string_view> names;
  for (auto ch : kAllChannels) {
    names.insert(channel_name(ch));
    CHECK(channel_from_name(channel_name(ch)) == ch);
    CHECK(channel_from_code(static_cast<int>(ch)) == ch);
  }
  CHECK(names.size() == 16);
  CHECK_FALSE(channel_from_code(16).has_value());
  CHECK_FALSE(channel_from_name("Wrist").has_value());
  int compartments = 0;
  for (auto ch : kAllChannels) compartments += is_compartment(ch) ? 1 : 0;
  CHECK(compartments == 9);
}

TEST_CASE("default model carries the published mounting angles and limits") {
  const auto m = default_hand_model();
  CHECK(m.thumb.proximal_mount == doctest::Approx(deg2rad(30)));
  CHECK(m.thumb.middle_mount == doctest::Approx(deg2rad(90)));
  CHECK(m.thumb.distal_mount == doctest::Approx(deg2rad(45)));
  CHECK(m.joint_limit(ChannelId::PalmBellow) == doctest::Approx(deg2rad(30)));
  for (const auto& a : m.abduction) CHECK(a.bellow.pouch_count == 2);
  const double little = m.finger(Digit::Little).spec.total_length();
  for (auto d : {Digit::Index, Digit::Middle, Digit::Ring}) CHECK(little < m.finger(d).spec.total_length());
  CHECK_NOTHROW(m.validate());

  auto bad = m;
  bad.fingers[3].spec.base.arc_length = 0.06;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("forward kinematics rejects joints beyond their limits") {
  const auto m = default_hand_model();
  JointVector q{};
  CHECK_NOTHROW(forward_kinematics(m, q));
  q[index(ChannelId::PalmBellow)] = deg2rad(31);
  CHECK_THROWS_AS(forward_kinematics(m, q), DomainError);
  q[index(ChannelId::PalmBellow)] = -0.01;
  CHECK_THROWS_AS(forward_kinematics(m, q), DomainError);
}

TEST_CASE("flat hand: fingers point distally, Kapandji targets are distinct") {
  const auto m = default_hand_model();
  const auto pose = forward_kinematics(m, JointVector{});
  for (auto d : {Digit::Index, Digit::Middle, Digit::Ring, Digit::Little}) {
    const auto& f = m.finger(d);
    const Eigen::Vector3d expect = f.base + Eigen::Vector3d::UnitZ() * f.spec.total_length();
    CHECK((pose.tip(d).translation() - expect).norm() < 1e-12);
  }
  for (int i = 0; i < 10; ++i)
    for (int j = i + 1; j < 10; ++j) CHECK((pose.kapandji[i] - pose.kapandji[j]).norm() > 0.005);
}

TEST_CASE("palm bellow moves the ulnar side only") {
  const auto m = default_hand_model();
  JointVector q{};
  const auto flat = forward_kinematics(m, q);
  q[index(ChannelId::PalmBellow)] = deg2rad(25);
  const auto cupped = forward_kinematics(m, q);
  CHECK((flat.tip(Digit::Index).translation() - cupped.tip(Digit::Index).translation()).norm() < 1e-12);
  CHECK((flat.tip(Digit::Little).translation() - cupped.tip(Digit::Little).translation()).norm() > 0.005);
  CHECK((flat.kapandji[9] - cupped.kapandji[9]).norm() > 0.001);
}

TEST_CASE("free inflation opens each thumb bellow to its design angle") {
  const auto m = default_hand_model();
  const GasConditions gas;
  for (auto ch : {ChannelId::ThumbProximal, ChannelId::ThumbMiddle, ChannelId::ThumbDistal}) {
    // Mass that gives 250 kPa gauge at 90 deg.
    const double theta = deg2rad(90);
    const double m90 = chamber_mass(gas.atmosphere + 250e3, m.chamber_volume(ch, theta), gas.temperature);
    const auto eq = joint_equilibrium(m, ch, m90, 0.0, gas);
    CHECK(eq.joint == doctest::Approx(theta).epsilon(1e-9));
    CHECK(eq.pressure - gas.atmosphere == doctest::Approx(250e3).epsilon(1e-6));
  }
}

TEST_CASE("mass_for_joint inverts joint_equilibrium") {
  const auto m = default_hand_model();
  for (auto ch : kAllChannels) {
    const double target = 0.5 * m.joint_limit(ch);
    for (double load : {0.0, 0.05}) {
      const double mass = mass_for_joint(m, ch, target, load);
      CHECK(joint_equilibrium(m, ch, mass, load).joint == doctest::Approx(target).epsilon(1e-9));
    }
  }
}

TEST_CASE("opposing load reduces the joint at fixed air mass") {
  const auto m = default_hand_model();
  const auto ch = ChannelId::ThumbMiddle;
  const double mass = mass_for_joint(m, ch, deg2rad(60));
  const auto free = joint_equilibrium(m, ch, mass, 0.0);
  const auto loaded = joint_equilibrium(m, ch, mass, 0.5);
  CHECK(loaded.joint < free.joint);
  // Same air, smaller volume: higher pressure.
  CHECK(loaded.pressure > free.pressure);
  CHECK(std::abs(loaded.residual) < 1e-9);
}

TEST_CASE("equilibrium matches a brute-force residual grid") {
  const auto m = default_hand_model();
  const GasConditions gas;
  std::mt19937_64 rng(20240611);
  for (auto ch : kAllChannels) {
    if (!is_bellow(ch)) continue;
    const double lo = atmospheric_mass(m, ch, gas);
    const double hi = max_masses(m, gas)[index(ch)];
    std::uniform_real_distribution<double> mass_d(lo, hi), load_d(-0.1, 0.3);
    const double limit = m.joint_limit(ch);
    constexpr int kGrid = 40000;
    for (int s = 0; s < 100; ++s) {
      const double mass = mass_d(rng), load = load_d(rng);
      double best = 0.0, best_r = INFINITY;
      for (int k = 0; k <= kGrid; ++k) {
        const double th = limit * k / kGrid;
        const double r = std::abs(equilibrium_residual(m, ch, mass, th, load, gas));
        if (r < best_r) best_r = r, best = th;
      }
      const auto eq = joint_equilibrium(m, ch, mass, load, gas);
      CHECK(std::abs(eq.joint - best) < 1e-4);
    }
  }
}

TEST_CASE("hand equilibrium names the failing channel") {
  const auto m = default_hand_model();
  auto masses = rest_masses(m);
  masses[index(ChannelId::RingTip)] = -1.0;
  try {
    hand_equilibrium(m, masses);
    FAIL("expected DomainError");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("RingTip") != std::string::npos);
  }
}
