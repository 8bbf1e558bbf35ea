#pragma once

// 16-channel hand assembly: geometry, forward kinematics, quasi-static
// per-channel equilibrium and Kapandji target placement.
//
// Palm frame: origin at the wrist, +z distal along the extended fingers,
// +y palmar (out of the palm surface), +x radial (toward the thumb).

#include <array>
#include <optional>
#include <string_view>

#include <Eigen/Geometry>

#include "pneumahand/actuators.hpp"
#include "pneumahand/channels.hpp"
#include "pneumahand/pneumatics.hpp"

namespace pneumahand {

enum class Digit { Index = 0, Middle = 1, Ring = 2, Little = 3, Thumb = 4 };
inline constexpr std::size_t kDigitCount = 5;
std::string_view digit_name(Digit d);

struct BellowJoint {
  BellowSpec bellow;
  double hinge_stiffness = 1.0;  // N m/rad
};

struct FingerMount {
  TwoCompartmentFingerSpec spec;
  Eigen::Vector3d base = Eigen::Vector3d::Zero();  // MCP point on its scaffold
};

struct ThumbGeometry {
  Eigen::Vector3d base{0.008, 0.020, 0.010};  // proximal hinge, on the thenar pad
  double proximal_mount = deg2rad(30.0);    // hinge axis toward radial, palm plane
  double middle_mount = deg2rad(90.0);      // pouch plane toward dorsal
  double distal_mount = deg2rad(45.0);      // about the thumb axis toward palmar
  double proximal_link = 0.032;             // m, proximal -> middle hinge
  double middle_link = 0.049;               // m, middle -> distal hinge
  double distal_link = 0.036;               // m, distal hinge -> tip actuator
};

struct HandModel {
  std::array<FingerMount, 4> fingers;  // index, middle, ring, little
  ThumbGeometry thumb;
  BellowJoint thumb_proximal;
  BellowJoint thumb_middle;
  BellowJoint thumb_distal;
  PneuFlexCompartmentSpec thumb_tip;
  BellowJoint palm;
  std::array<BellowJoint, 3> abduction;  // index-middle, middle-ring, ring-little

  double palm_axis_x = 0.0;  // ulnar scaffold hinge line, parallel to +z
  Eigen::Vector3d distal_palmar_crease{-0.018, 0.0, 0.078};  // on the ulnar scaffold
  double digit_half_width = 0.009;      // m, radial offset of side targets
  double digit_half_thickness = 0.008;  // m, palmar offset of crease targets
  double contact_tolerance = 0.005;     // m

  const FingerMount& finger(Digit d) const { return fingers.at(static_cast<std::size_t>(d)); }
  const BellowJoint& bellow(ChannelId ch) const;
  BellowJoint& bellow(ChannelId ch);
  const PneuFlexCompartmentSpec& compartment(ChannelId ch) const;
  PneuFlexCompartmentSpec& compartment(ChannelId ch);

  // Upper joint limit; the lower limit is 0 for every channel.
  double joint_limit(ChannelId ch) const;
  double chamber_volume(ChannelId ch, double joint) const;
  // Torque-like stiffness opposing the joint (N m/rad).
  double joint_stiffness(ChannelId ch) const;

  void validate() const;
};

// Adult-hand-scale geometry with the thumb torque anchors built into the
// bellow areas. Tip stiffnesses and hinge stiffnesses are derived here.
HandModel default_hand_model();

// Hinge stiffness that lets a bellow open to `angle` under free inflation at
// `gauge_pressure`.
double hinge_stiffness_for(const BellowSpec& bellow, double gauge_pressure, double angle);

using JointVector = PerChannel<double>;

struct KapandjiTarget {
  int number;  // 1..10
  std::string_view label;
  Eigen::Vector3d point;
};

struct HandPose {
  JointVector joints{};
  std::array<Eigen::Isometry3d, kDigitCount> tips;
  std::array<Eigen::Vector3d, 10> kapandji;
  double timestamp = 0.0;

  const Eigen::Isometry3d& tip(Digit d) const { return tips[static_cast<std::size_t>(d)]; }
};

std::string_view kapandji_label(int number);

// Throws DomainError if any joint lies outside [0, joint_limit].
HandPose forward_kinematics(const HandModel& model, const JointVector& joints);

// Finger backbone point in the palm frame at arc length s, for a posed hand.
Eigen::Vector3d finger_point(const HandModel& model, const JointVector& joints, Digit finger,
                             double s, double palmar_offset = 0.0, double radial_offset = 0.0);

// Thumb tip frame, composed through the three mounted bellow hinges and the
// tip arc.
Eigen::Isometry3d thumb_tip_frame(const HandModel& model, const JointVector& joints);

// Targets at the flat pose.
std::array<KapandjiTarget, 10> kapandji_targets(const HandModel& model);
std::array<KapandjiTarget, 10> kapandji_targets(const HandPose& pose);

struct GasConditions {
  double temperature = kRoomTemperature;
  double atmosphere = kAtmosphericPressure;
};

struct ExternalLoad {
  PerChannel<double> torque{};  // N m opposing each joint
  // Optional constrained tip positions for the four fingers, in each finger's
  // bending plane (same frame as finger_free_pose).
  std::array<std::optional<Eigen::Vector2d>, 4> tip_constraint{};

  void validate() const;
};

struct JointEquilibrium {
  double joint = 0.0;      // rad
  double pressure = 0.0;   // Pa absolute
  double volume = 0.0;     // m^3
  double residual = 0.0;   // N m
};

// Quasi-static balance of one channel with a fixed air mass: actuator torque
// equals hinge spring plus load. Bisection on [0, joint_limit]; boundary with
// the smaller residual when there is no sign change.
JointEquilibrium joint_equilibrium(const HandModel& model, ChannelId ch, double air_mass,
                                   double load_torque = 0.0, const GasConditions& gas = {});

// Net torque balance at `joint` (actuator minus spring minus load).
double equilibrium_residual(const HandModel& model, ChannelId ch, double air_mass, double joint,
                            double load_torque = 0.0, const GasConditions& gas = {});

// Air mass that holds `ch` at `joint` against `load_torque`; the inverse of
// joint_equilibrium for interior joints.
double mass_for_joint(const HandModel& model, ChannelId ch, double joint, double load_torque = 0.0,
                      const GasConditions& gas = {});

double atmospheric_mass(const HandModel& model, ChannelId ch, const GasConditions& gas = {});
PerChannel<double> rest_masses(const HandModel& model, const GasConditions& gas = {});
PerChannel<double> max_masses(const HandModel& model, const GasConditions& gas = {});

struct HandState {
  HandPose pose;
  PerChannel<double> pressure{};  // Pa absolute
  PerChannel<double> volume{};
  PerChannel<double> residual{};
  std::array<Eigen::Vector2d, 4> tip_force{};  // in-plane; zero when unconstrained
};

// Applies joint_equilibrium per channel. Errors are rethrown naming the
// channel.
HandState hand_equilibrium(const HandModel& model, const PerChannel<double>& masses,
                           const ExternalLoad& load = {}, const GasConditions& gas = {});

}  // namespace pneumahand
