#include "pneumahand/actuators.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <Eigen/Geometry>

#include "pneumahand/errors.hpp"

namespace pneumahand {

void PneuFlexCompartmentSpec::validate() const {
  if (!(arc_length > 0.0)) throw ValidationError("compartment arc_length must be positive");
  if (!(max_pressure > 0.0)) throw ValidationError("compartment max_pressure must be positive");
  if (pressure_to_bend_gain < 0.0 || bend_stiffness < 0.0 || volume_per_bend < 0.0)
    throw ValidationError("compartment gains must be non-negative");
  if (!(rest_volume > 0.0)) throw ValidationError("compartment rest_volume must be positive");
}

void TwoCompartmentFingerSpec::validate() const {
  base.validate();
  tip.validate();
  if (tip_stiffness < 0.0) throw ValidationError("tip_stiffness must be non-negative");
  if (!(max_tip_force > 0.0)) throw ValidationError("max_tip_force must be positive");
}

PlanarPose arc_end(double length, double bend) {
  // sin(b)/b and (1 - cos b)/b, with series near zero.
  double c1, c2;
  if (std::abs(bend) < 1e-6) {
    c1 = 1.0 - bend * bend / 6.0;
    c2 = bend / 2.0;
  } else {
    const double h = std::sin(bend / 2.0);
    c1 = std::sin(bend) / bend;
    c2 = 2.0 * h * h / bend;
  }
  return {{length * c1, length * c2}, bend};
}

PlanarPose finger_backbone(const TwoCompartmentFingerSpec& spec, double base_bend,
                           double tip_bend, double s) {
  const double lb = spec.base.arc_length;
  const double lt = spec.tip.arc_length;
  s = std::clamp(s, 0.0, lb + lt);
  if (s <= lb) return arc_end(s, base_bend * s / lb);
  const PlanarPose joint = arc_end(lb, base_bend);
  const PlanarPose distal = arc_end(s - lb, tip_bend * (s - lb) / lt);
  return {joint.position + Eigen::Rotation2Dd(joint.tangent) * distal.position,
          joint.tangent + distal.tangent};
}

double compartment_bend(const PneuFlexCompartmentSpec& spec, double gauge_pressure) {
  return spec.pressure_to_bend_gain * gauge_pressure;
}

PlanarPose finger_pose_from_bends(const TwoCompartmentFingerSpec& spec, double base_bend,
                                  double tip_bend) {
  return finger_backbone(spec, base_bend, tip_bend, spec.total_length());
}

PlanarPose finger_free_pose(const TwoCompartmentFingerSpec& spec, double p_base, double p_tip) {
  if (!(p_base >= 0.0 && p_base <= spec.base.max_pressure))
    throw DomainError("base compartment pressure out of range");
  if (!(p_tip >= 0.0 && p_tip <= spec.tip.max_pressure))
    throw DomainError("tip compartment pressure out of range");
  return finger_pose_from_bends(spec, compartment_bend(spec.base, p_base),
                                compartment_bend(spec.tip, p_tip));
}

Eigen::Vector2d tip_spring_force(const TwoCompartmentFingerSpec& spec,
                                 const Eigen::Vector2d& free_tip,
                                 const Eigen::Vector2d& constrained_tip) {
  Eigen::Vector2d f = spec.tip_stiffness * (free_tip - constrained_tip);
  const double mag = f.norm();
  if (mag > spec.max_tip_force) f *= spec.max_tip_force / mag;
  return f;
}

Eigen::Vector2d fingertip_force(const TwoCompartmentFingerSpec& spec, double p_base, double p_tip,
                                const Eigen::Vector2d& constrained_tip) {
  return tip_spring_force(spec, finger_free_pose(spec, p_base, p_tip).position, constrained_tip);
}

double calibrate_tip_stiffness(const TwoCompartmentFingerSpec& spec) {
  const auto extended = finger_free_pose(spec, 0.0, 0.0).position;
  const auto flexed = finger_free_pose(spec, spec.base.max_pressure, spec.tip.max_pressure).position;
  const double reach = (flexed - extended).norm();
  if (!(reach > 0.0)) throw ValidationError("finger does not move under full inflation");
  return spec.max_tip_force / reach;
}

double compartment_volume(const PneuFlexCompartmentSpec& spec, double bend) {
  return spec.rest_volume + spec.volume_per_bend * bend;
}

double BellowSpec::effective_arm(double angle) const {
  const auto& t = moment_arm_table;
  if (t.empty()) throw ValidationError("bellow has an empty moment-arm table");
  if (angle <= t.front().angle) return t.front().arm;
  if (angle >= t.back().angle) return t.back().arm;
  const auto hi = std::upper_bound(t.begin(), t.end(), angle,
                                   [](double a, const MomentArmPoint& p) { return a < p.angle; });
  const auto lo = hi - 1;
  const double w = (angle - lo->angle) / (hi->angle - lo->angle);
  return lo->arm + w * (hi->arm - lo->arm);
}

void BellowSpec::validate() const {
  if (!(pouch_area > 0.0)) throw ValidationError("bellow pouch_area must be positive");
  if (pouch_count < 1) throw ValidationError("bellow pouch_count must be at least 1");
  if (!(max_pressure > 0.0)) throw ValidationError("bellow max_pressure must be positive");
  if (!(max_opening > 0.0)) throw ValidationError("bellow max_opening must be positive");
  if (!(deflated_thickness > 0.0)) throw ValidationError("bellow deflated_thickness must be positive");
  if (volume_per_rad < 0.0) throw ValidationError("bellow volume_per_rad must be non-negative");
  if (moment_arm_table.empty()) throw ValidationError("bellow moment_arm_table is empty");
  for (std::size_t i = 0; i < moment_arm_table.size(); ++i) {
    if (!(moment_arm_table[i].arm > 0.0))
      throw ValidationError("bellow moment arms must be positive");
    if (i > 0) {
      if (!(moment_arm_table[i].angle > moment_arm_table[i - 1].angle))
        throw ValidationError("bellow moment-arm angles must be strictly increasing");
      if (moment_arm_table[i].arm > moment_arm_table[i - 1].arm)
        throw ValidationError("bellow moment arms must be non-increasing in angle");
    }
  }
}

double bellow_torque_unchecked(const BellowSpec& spec, double gauge_pressure,
                               double opening_angle) {
  return gauge_pressure * spec.pouch_area * spec.effective_arm(opening_angle);
}

double bellow_torque(const BellowSpec& spec, double gauge_pressure, double opening_angle) {
  if (!(gauge_pressure >= 0.0 && gauge_pressure <= spec.max_pressure))
    throw DomainError("bellow pressure out of range");
  if (!(opening_angle >= 0.0 && opening_angle <= spec.max_opening))
    throw DomainError("bellow opening angle out of range");
  return bellow_torque_unchecked(spec, gauge_pressure, opening_angle);
}

double bellow_volume(const BellowSpec& spec, double opening_angle) {
  return spec.rest_volume() + spec.volume_per_rad * std::max(0.0, opening_angle);
}

std::vector<double> CalibrationTable::angles() const {
  std::set<double> s;
  for (const auto& c : samples) s.insert(c.angle);
  return {s.begin(), s.end()};
}

std::vector<double> CalibrationTable::pressures() const {
  std::set<double> s;
  for (const auto& c : samples) s.insert(c.pressure);
  return {s.begin(), s.end()};
}

void CalibrationTable::validate() const {
  std::set<std::pair<double, double>> keys;
  for (const auto& c : samples) {
    if (!std::isfinite(c.angle) || !std::isfinite(c.pressure) || !std::isfinite(c.torque))
      throw ValidationError("calibration table contains non-finite values");
    if (!keys.emplace(c.angle, c.pressure).second) {
      std::ostringstream msg;
      msg << "calibration table has duplicate key (" << rad2deg(c.angle) << " deg, "
          << c.pressure / 1e3 << " kPa)";
      throw ValidationError(msg.str());
    }
  }
  if (keys.size() != angles().size() * pressures().size())
    throw ValidationError("calibration table grid is not rectangular");
}

std::vector<MomentArmPoint> fit_moment_arm(const CalibrationTable& table, const BellowSpec& spec) {
  table.validate();
  const auto angles = table.angles();
  if (angles.size() < 2) throw FitError("moment-arm fit needs at least two angles");
  if (table.pressures().size() < 2) throw FitError("moment-arm fit needs at least two pressures");

  std::map<double, std::pair<double, double>> sums;  // angle -> (sum x*y, sum x*x)
  for (const auto& c : table.samples) {
    const double x = c.pressure * spec.pouch_area;
    auto& [sxy, sxx] = sums[c.angle];
    sxy += x * c.torque;
    sxx += x * x;
  }

  std::vector<MomentArmPoint> arms;
  for (const auto& [angle, s] : sums) {
    if (!(s.second > 0.0)) throw FitError("moment-arm fit has no non-zero pressure at an angle");
    arms.push_back({angle, s.first / s.second});
  }

  std::ostringstream bad;
  for (std::size_t i = 0; i < arms.size(); ++i) {
    if (!(arms[i].arm > 0.0)) bad << ' ' << rad2deg(arms[i].angle) << "deg(non-positive)";
    if (i > 0 && arms[i].arm > 1.05 * arms[i - 1].arm)
      bad << ' ' << rad2deg(arms[i].angle) << "deg(increasing)";
  }
  if (!bad.str().empty())
    throw ValidationError("fitted moment arm violates monotonicity at" + bad.str());
  return arms;
}

}  // namespace pneumahand
