#pragma once

// Quasi-static models of PneuFlex bending compartments and fabric bellows.
// Pressures passed to these functions are gauge pressures.

#include <string>
#include <vector>

#include <Eigen/Core>

namespace pneumahand {

inline constexpr double kPi = 3.14159265358979323846;
constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

struct PneuFlexCompartmentSpec {
  double arc_length = 0.045;                              // m
  double max_pressure = 250e3;                            // Pa
  double pressure_to_bend_gain = deg2rad(90.0) / 250e3;   // rad/Pa
  double bend_stiffness = 0.05;                           // N m/rad
  double rest_volume = 1.5e-5;                            // m^3
  double volume_per_bend = 5e-6;                          // m^3/rad

  double max_free_bend() const { return pressure_to_bend_gain * max_pressure; }
  void validate() const;
};

struct TwoCompartmentFingerSpec {
  PneuFlexCompartmentSpec base;
  PneuFlexCompartmentSpec tip;
  double tip_stiffness = 0.0;  // N/m; see calibrate_tip_stiffness
  double max_tip_force = 8.3;  // N

  double total_length() const { return base.arc_length + tip.arc_length; }
  void validate() const;
};

// Planar pose in the bending plane: x along the extended finger, y toward the
// palmar (flexion) side, tangent measured from +x toward +y.
struct PlanarPose {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double tangent = 0.0;
};

// End of a single constant-curvature arc of given length and total bend,
// starting at the origin tangent to +x.
PlanarPose arc_end(double length, double bend);

// Point at arc length `s` along the two-arc backbone with the given bends.
// s is clamped to [0, total_length].
PlanarPose finger_backbone(const TwoCompartmentFingerSpec& spec, double base_bend,
                           double tip_bend, double s);

double compartment_bend(const PneuFlexCompartmentSpec& spec, double gauge_pressure);

PlanarPose finger_pose_from_bends(const TwoCompartmentFingerSpec& spec, double base_bend,
                                  double tip_bend);

// Free (contact-less) tip pose. Throws DomainError if either pressure lies
// outside [0, max_pressure] of its compartment.
PlanarPose finger_free_pose(const TwoCompartmentFingerSpec& spec, double p_base, double p_tip);

// Linear Cartesian spring between the free pose and the constrained tip, with
// the magnitude clamped to max_tip_force. Points from the constraint toward
// the free pose.
Eigen::Vector2d fingertip_force(const TwoCompartmentFingerSpec& spec, double p_base, double p_tip,
                                const Eigen::Vector2d& constrained_tip);

// Same spring law for an already-known free tip position.
Eigen::Vector2d tip_spring_force(const TwoCompartmentFingerSpec& spec,
                                 const Eigen::Vector2d& free_tip,
                                 const Eigen::Vector2d& constrained_tip);

// Stiffness that makes the fully inflated finger push with exactly
// max_tip_force when held at its extended (unpressurised) tip position.
double calibrate_tip_stiffness(const TwoCompartmentFingerSpec& spec);

double compartment_volume(const PneuFlexCompartmentSpec& spec, double bend);

struct MomentArmPoint {
  double angle;  // rad
  double arm;    // m
};

struct BellowSpec {
  double pouch_area = 8.8e-4;  // m^2
  int pouch_count = 2;
  double max_pressure = 300e3;  // Pa
  std::vector<MomentArmPoint> moment_arm_table;
  double max_opening = deg2rad(100.0);  // rad
  double deflated_thickness = 0.002;    // m
  double volume_per_rad = 1.76e-5;      // m^3/rad

  // Piecewise-linear interpolation, clamped to the end values.
  double effective_arm(double angle) const;
  double rest_volume() const { return pouch_area * deflated_thickness * pouch_count; }
  void validate() const;
};

// tau = p * A * arm(angle). Throws DomainError for p outside
// [0, max_pressure] or angle outside [0, max_opening].
double bellow_torque(const BellowSpec& spec, double gauge_pressure, double opening_angle);

// Unchecked variant used by the equilibrium solver, where transient states may
// sit below ambient or past a limit.
double bellow_torque_unchecked(const BellowSpec& spec, double gauge_pressure,
                               double opening_angle);

double bellow_volume(const BellowSpec& spec, double opening_angle);

struct CalibrationSample {
  double angle;     // rad
  double pressure;  // Pa gauge
  double torque;    // N m
};

struct CalibrationTable {
  std::vector<CalibrationSample> samples;
  std::string provenance;

  std::vector<double> angles() const;     // sorted, unique
  std::vector<double> pressures() const;  // sorted, unique
  // Throws ValidationError if the grid is not rectangular or has duplicates.
  void validate() const;
};

// Regression of torque against p*A through the origin, one slope per angle.
// Throws FitError for a degenerate table and ValidationError if a fitted arm
// is non-positive or exceeds the previous angle's arm by more than 5%.
std::vector<MomentArmPoint> fit_moment_arm(const CalibrationTable& table, const BellowSpec& spec);

}  // namespace pneumahand
