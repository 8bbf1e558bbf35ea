#include "pneumahand/hand.hpp"

#include <cmath>
#include <string>

#include "pneumahand/errors.hpp"

namespace pneumahand {

namespace {

constexpr std::array<std::string_view, kChannelCount> kChannelNames = {
    "IndexBase",     "IndexTip",    "MiddleBase",  "MiddleTip",
    "RingBase",      "RingTip",     "LittleBase",  "LittleTip",
    "ThumbProximal", "ThumbMiddle", "ThumbDistal", "ThumbTip",
    "PalmBellow",    "AbductionIndexMiddle", "AbductionMiddleRing", "AbductionRingLittle",
};

constexpr std::array<std::string_view, 10> kKapandjiLabels = {
    "index proximal phalanx, radial side",
    "index middle phalanx, radial side",
    "index tip",
    "middle tip",
    "ring tip",
    "little tip",
    "little distal crease",
    "little middle crease",
    "little base",
    "distal palmar crease",
};

constexpr std::array<ChannelId, 4> kBaseChannel = {ChannelId::IndexBase, ChannelId::MiddleBase,
                                                   ChannelId::RingBase, ChannelId::LittleBase};
constexpr std::array<ChannelId, 4> kTipChannel = {ChannelId::IndexTip, ChannelId::MiddleTip,
                                                  ChannelId::RingTip, ChannelId::LittleTip};

std::vector<MomentArmPoint> default_arm_table() {
  return {{deg2rad(0), 0.0215},  {deg2rad(20), 0.0200}, {deg2rad(40), 0.0172},
          {deg2rad(60), 0.0142}, {deg2rad(80), 0.0112}, {deg2rad(100), 0.0082}};
}

BellowJoint make_bellow(double area, int pouches, double max_opening, double design_pressure,
                        double design_angle) {
  BellowJoint j;
  j.bellow.pouch_area = area;
  j.bellow.pouch_count = pouches;
  j.bellow.moment_arm_table = default_arm_table();
  j.bellow.max_opening = max_opening;
  j.bellow.volume_per_rad = area * 0.02;
  j.hinge_stiffness = hinge_stiffness_for(j.bellow, design_pressure, design_angle);
  return j;
}

PneuFlexCompartmentSpec make_compartment(double length, double max_bend_deg, double rest_volume,
                                         double volume_per_bend, double stiffness) {
  PneuFlexCompartmentSpec c;
  c.arc_length = length;
  c.pressure_to_bend_gain = deg2rad(max_bend_deg) / c.max_pressure;
  c.rest_volume = rest_volume;
  c.volume_per_bend = volume_per_bend;
  c.bend_stiffness = stiffness;
  return c;
}

FingerMount make_finger(double base_len, double tip_len, Eigen::Vector3d base) {
  FingerMount f;
  f.spec.base = make_compartment(base_len, 90.0, 1.5e-5 * base_len / 0.045, 5e-6, 0.05);
  f.spec.tip = make_compartment(tip_len, 110.0, 1.2e-5 * tip_len / 0.045, 4e-6, 0.04);
  f.spec.max_tip_force = 8.3;
  f.spec.tip_stiffness = calibrate_tip_stiffness(f.spec);
  f.base = base;
  return f;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError(std::string(what) + " must be finite");
}

struct FingerFrame {
  Eigen::Vector3d origin;
  Eigen::Vector3d dir;     // extended finger direction
  Eigen::Vector3d normal;  // flexion direction
  Eigen::Vector3d radial;  // bending-plane normal, toward the radial side
};

Eigen::Matrix3d palm_rotation(double palm_angle) {
  // Ulnar scaffold hinges about a line parallel to +z; positive flexion lifts
  // the ulnar edge (x < axis) toward palmar.
  return Eigen::AngleAxisd(-palm_angle, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

Eigen::Vector3d ulnar_transform(const HandModel& m, double palm_angle, const Eigen::Vector3d& p) {
  const Eigen::Vector3d axis_point(m.palm_axis_x, 0.0, 0.0);
  return axis_point + palm_rotation(palm_angle) * (p - axis_point);
}

FingerFrame finger_frame(const HandModel& m, const JointVector& q, Digit d) {
  const auto i = static_cast<std::size_t>(d);
  double spread = 0.0;
  switch (d) {
    case Digit::Index: spread = q[index(ChannelId::AbductionIndexMiddle)]; break;
    case Digit::Middle: spread = 0.0; break;
    case Digit::Ring: spread = -q[index(ChannelId::AbductionMiddleRing)]; break;
    case Digit::Little:
      spread = -q[index(ChannelId::AbductionMiddleRing)] - q[index(ChannelId::AbductionRingLittle)];
      break;
    case Digit::Thumb: throw DomainError("thumb has no finger frame");
  }
  const Eigen::Matrix3d spread_rot =
      Eigen::AngleAxisd(spread, Eigen::Vector3d::UnitY()).toRotationMatrix();
  FingerFrame f{m.fingers[i].base, spread_rot * Eigen::Vector3d::UnitZ(), Eigen::Vector3d::UnitY(),
                spread_rot * Eigen::Vector3d::UnitX()};
  if (d == Digit::Ring || d == Digit::Little) {
    const double palm = q[index(ChannelId::PalmBellow)];
    const Eigen::Matrix3d r = palm_rotation(palm);
    f.origin = ulnar_transform(m, palm, f.origin);
    f.dir = r * f.dir;
    f.normal = r * f.normal;
    f.radial = r * f.radial;
  }
  return f;
}

void check_joints(const HandModel& m, const JointVector& q) {
  for (auto ch : kAllChannels) {
    const double v = q[index(ch)];
    if (!(v >= 0.0 && v <= m.joint_limit(ch)))
      throw DomainError("joint " + std::string(channel_name(ch)) + " outside [0, limit]");
  }
}

}  // namespace

std::string_view channel_name(ChannelId id) { return kChannelNames[index(id)]; }

std::optional<ChannelId> channel_from_name(std::string_view name) {
  for (auto ch : kAllChannels)
    if (kChannelNames[index(ch)] == name) return ch;
  return std::nullopt;
}

std::optional<ChannelId> channel_from_code(int code) {
  if (code < 0 || code >= static_cast<int>(kChannelCount)) return std::nullopt;
  return static_cast<ChannelId>(code);
}

std::string_view digit_name(Digit d) {
  constexpr std::array<std::string_view, kDigitCount> names = {"index", "middle", "ring",
                                                               "little", "thumb"};
  return names[static_cast<std::size_t>(d)];
}

std::string_view kapandji_label(int number) {
  if (number < 1 || number > 10) throw DomainError("Kapandji target number must be 1..10");
  return kKapandjiLabels[static_cast<std::size_t>(number - 1)];
}

double hinge_stiffness_for(const BellowSpec& bellow, double gauge_pressure, double angle) {
  return bellow_torque_unchecked(bellow, gauge_pressure, angle) / angle;
}

const BellowJoint& HandModel::bellow(ChannelId ch) const {
  switch (ch) {
    case ChannelId::ThumbProximal: return thumb_proximal;
    case ChannelId::ThumbMiddle: return thumb_middle;
    case ChannelId::ThumbDistal: return thumb_distal;
    case ChannelId::PalmBellow: return palm;
    case ChannelId::AbductionIndexMiddle: return abduction[0];
    case ChannelId::AbductionMiddleRing: return abduction[1];
    case ChannelId::AbductionRingLittle: return abduction[2];
    default: throw DomainError(std::string(channel_name(ch)) + " is not a bellow channel");
  }
}

BellowJoint& HandModel::bellow(ChannelId ch) {
  return const_cast<BellowJoint&>(std::as_const(*this).bellow(ch));
}

const PneuFlexCompartmentSpec& HandModel::compartment(ChannelId ch) const {
  if (ch == ChannelId::ThumbTip) return thumb_tip;
  for (std::size_t i = 0; i < 4; ++i) {
    if (kBaseChannel[i] == ch) return fingers[i].spec.base;
    if (kTipChannel[i] == ch) return fingers[i].spec.tip;
  }
  throw DomainError(std::string(channel_name(ch)) + " is not a compartment channel");
}

PneuFlexCompartmentSpec& HandModel::compartment(ChannelId ch) {
  return const_cast<PneuFlexCompartmentSpec&>(std::as_const(*this).compartment(ch));
}

double HandModel::joint_limit(ChannelId ch) const {
  return is_compartment(ch) ? compartment(ch).max_free_bend() : bellow(ch).bellow.max_opening;
}

double HandModel::chamber_volume(ChannelId ch, double joint) const {
  return is_compartment(ch) ? compartment_volume(compartment(ch), joint)
                            : bellow_volume(bellow(ch).bellow, joint);
}

double HandModel::joint_stiffness(ChannelId ch) const {
  return is_compartment(ch) ? compartment(ch).bend_stiffness : bellow(ch).hinge_stiffness;
}

void HandModel::validate() const {
  for (const auto& f : fingers) f.spec.validate();
  thumb_tip.validate();
  for (auto ch : kAllChannels) {
    if (is_bellow(ch)) {
      bellow(ch).bellow.validate();
      if (!(bellow(ch).hinge_stiffness > 0.0))
        throw ValidationError(std::string(channel_name(ch)) + ": hinge_stiffness must be positive");
    } else if (!(compartment(ch).bend_stiffness > 0.0)) {
      throw ValidationError(std::string(channel_name(ch)) + ": bend_stiffness must be positive");
    }
  }
  const double little = fingers[3].spec.total_length();
  for (std::size_t i = 0; i < 3; ++i)
    if (!(little < fingers[i].spec.total_length()))
      throw ValidationError("little finger must be shorter than the other fingers");
  if (!(contact_tolerance >= 0.0)) throw ValidationError("contact_tolerance must be non-negative");
}

HandModel default_hand_model() {
  HandModel m;
  m.fingers[0] = make_finger(0.045, 0.045, {0.033, 0.0, 0.095});
  m.fingers[1] = make_finger(0.050, 0.050, {0.011, 0.0, 0.098});
  m.fingers[2] = make_finger(0.047, 0.047, {-0.011, 0.0, 0.094});
  m.fingers[3] = make_finger(0.034, 0.032, {-0.031, 0.0, 0.086});

  // Pouch areas put 4.4 / 3.2 / 1.9 N m at 20 deg and 250 kPa on the shared
  // arm table (0.0200 m at 20 deg).
  constexpr double kAnchorPressure = 250e3;
  constexpr double kArm20 = 0.0200;
  const double thumb_open = deg2rad(90.0);
  m.thumb_proximal = make_bellow(4.4 / (kAnchorPressure * kArm20), 3, deg2rad(100.0),
                                 kAnchorPressure, thumb_open);
  m.thumb_middle = make_bellow(3.2 / (kAnchorPressure * kArm20), 3, deg2rad(100.0),
                               kAnchorPressure, thumb_open);
  m.thumb_distal = make_bellow(1.9 / (kAnchorPressure * kArm20), 2, deg2rad(100.0),
                               kAnchorPressure, thumb_open);
  m.thumb_tip = make_compartment(0.034, 90.0, 6e-6, 2e-6, 0.03);
  m.palm = make_bellow(6.0e-4, 2, deg2rad(30.0), kAnchorPressure, deg2rad(30.0));
  for (auto& a : m.abduction) a = make_bellow(2.0e-4, 2, deg2rad(20.0), kAnchorPressure, deg2rad(20.0));
  return m;
}

Eigen::Vector3d finger_point(const HandModel& model, const JointVector& joints, Digit finger,
                             double s, double palmar_offset, double radial_offset) {
  const auto i = static_cast<std::size_t>(finger);
  const auto f = finger_frame(model, joints, finger);
  const auto planar = finger_backbone(model.fingers[i].spec, joints[index(kBaseChannel[i])],
                                      joints[index(kTipChannel[i])], s);
  const Eigen::Vector2d n_local(-std::sin(planar.tangent), std::cos(planar.tangent));
  const Eigen::Vector2d p = planar.position + palmar_offset * n_local;
  return f.origin + p.x() * f.dir + p.y() * f.normal + radial_offset * f.radial;
}

Eigen::Isometry3d thumb_tip_frame(const HandModel& model, const JointVector& q) {
  const auto& g = model.thumb;
  const Eigen::Vector3d x = Eigen::Vector3d::UnitX();
  const Eigen::Vector3d proximal_axis(std::sin(g.proximal_mount), 0.0, std::cos(g.proximal_mount));
  const Eigen::Vector3d middle_axis = Eigen::AngleAxisd(g.middle_mount, x) * Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d distal_axis =
      Eigen::AngleAxisd(-g.distal_mount, x) * (-Eigen::Vector3d::UnitY());
  const Eigen::Vector3d bend_dir = distal_axis.cross(x);

  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.translate(g.base);
  t.rotate(Eigen::AngleAxisd(q[index(ChannelId::ThumbProximal)], proximal_axis));
  t.translate(g.proximal_link * x);
  t.rotate(Eigen::AngleAxisd(q[index(ChannelId::ThumbMiddle)], middle_axis));
  t.translate(g.middle_link * x);
  t.rotate(Eigen::AngleAxisd(q[index(ChannelId::ThumbDistal)], distal_axis));
  t.translate(g.distal_link * x);
  const double tip_bend = q[index(ChannelId::ThumbTip)];
  const auto arc = arc_end(model.thumb_tip.arc_length, tip_bend);
  t.translate(arc.position.x() * x + arc.position.y() * bend_dir);
  t.rotate(Eigen::AngleAxisd(tip_bend, distal_axis));
  // Tip frame: z along the thumb, y toward the pulp.
  Eigen::Matrix3d axes;
  axes.col(2) = x;
  axes.col(1) = bend_dir;
  axes.col(0) = bend_dir.cross(x);
  t.rotate(axes);
  return t;
}

HandPose forward_kinematics(const HandModel& model, const JointVector& joints) {
  check_joints(model, joints);
  HandPose pose;
  pose.joints = joints;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto d = static_cast<Digit>(i);
    const auto f = finger_frame(model, joints, d);
    const auto& spec = model.fingers[i].spec;
    const auto planar = finger_backbone(spec, joints[index(kBaseChannel[i])],
                                        joints[index(kTipChannel[i])], spec.total_length());
    const double c = std::cos(planar.tangent), s = std::sin(planar.tangent);
    Eigen::Matrix3d r;
    r.col(0) = f.radial;
    r.col(1) = -s * f.dir + c * f.normal;
    r.col(2) = c * f.dir + s * f.normal;
    Eigen::Isometry3d tip = Eigen::Isometry3d::Identity();
    tip.linear() = r;
    tip.translation() = f.origin + planar.position.x() * f.dir + planar.position.y() * f.normal;
    pose.tips[i] = tip;
  }
  pose.tips[static_cast<std::size_t>(Digit::Thumb)] = thumb_tip_frame(model, joints);

  const auto& index_spec = model.fingers[0].spec;
  const auto& little_spec = model.fingers[3].spec;
  const double w = model.digit_half_width;
  const double h = model.digit_half_thickness;
  pose.kapandji[0] = finger_point(model, joints, Digit::Index, 0.5 * index_spec.base.arc_length, 0.0, w);
  pose.kapandji[1] = finger_point(model, joints, Digit::Index,
                                  index_spec.base.arc_length + 0.5 * index_spec.tip.arc_length, 0.0, w);
  pose.kapandji[2] = pose.tips[0].translation();
  pose.kapandji[3] = pose.tips[1].translation();
  pose.kapandji[4] = pose.tips[2].translation();
  pose.kapandji[5] = pose.tips[3].translation();
  pose.kapandji[6] = finger_point(model, joints, Digit::Little,
                                  little_spec.base.arc_length + 0.5 * little_spec.tip.arc_length, h);
  pose.kapandji[7] = finger_point(model, joints, Digit::Little, little_spec.base.arc_length, h);
  pose.kapandji[8] = finger_point(model, joints, Digit::Little, 0.0, h);
  pose.kapandji[9] = ulnar_transform(model, joints[index(ChannelId::PalmBellow)],
                                     model.distal_palmar_crease + h * Eigen::Vector3d::UnitY());
  return pose;
}

std::array<KapandjiTarget, 10> kapandji_targets(const HandPose& pose) {
  std::array<KapandjiTarget, 10> out{};
  for (int i = 0; i < 10; ++i)
    out[static_cast<std::size_t>(i)] = {i + 1, kapandji_label(i + 1),
                                        pose.kapandji[static_cast<std::size_t>(i)]};
  return out;
}

std::array<KapandjiTarget, 10> kapandji_targets(const HandModel& model) {
  return kapandji_targets(forward_kinematics(model, JointVector{}));
}

void ExternalLoad::validate() const {
  for (double t : torque) check_finite(t, "load torque");
  for (const auto& c : tip_constraint)
    if (c) {
      check_finite(c->x(), "tip constraint");
      check_finite(c->y(), "tip constraint");
    }
}

double equilibrium_residual(const HandModel& model, ChannelId ch, double air_mass, double joint,
                            double load_torque, const GasConditions& gas) {
  const double volume = model.chamber_volume(ch, joint);
  const double gauge = chamber_pressure(air_mass, volume, gas.temperature) - gas.atmosphere;
  if (is_compartment(ch)) {
    const auto& c = model.compartment(ch);
    return c.bend_stiffness * (c.pressure_to_bend_gain * gauge - joint) - load_torque;
  }
  const auto& b = model.bellow(ch);
  return bellow_torque_unchecked(b.bellow, gauge, joint) - b.hinge_stiffness * joint - load_torque;
}

JointEquilibrium joint_equilibrium(const HandModel& model, ChannelId ch, double air_mass,
                                   double load_torque, const GasConditions& gas) {
  check_finite(load_torque, "load torque");
  if (!(air_mass >= 0.0)) throw DomainError("air mass must be non-negative");
  auto f = [&](double q) { return equilibrium_residual(model, ch, air_mass, q, load_torque, gas); };

  double lo = 0.0, hi = model.joint_limit(ch);
  double f_lo = f(lo), f_hi = f(hi);
  double q;
  if (f_lo <= 0.0 || f_hi >= 0.0) {
    // No interior sign change (the residual is decreasing in the joint).
    q = std::abs(f_lo) <= std::abs(f_hi) ? lo : hi;
  } else {
    for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double fm = f(mid);
      if (fm == 0.0) {
        lo = hi = mid;
        break;
      }
      (fm > 0.0 ? lo : hi) = mid;
    }
    q = 0.5 * (lo + hi);
  }
  const double volume = model.chamber_volume(ch, q);
  return {q, chamber_pressure(air_mass, volume, gas.temperature), volume, f(q)};
}

double mass_for_joint(const HandModel& model, ChannelId ch, double joint, double load_torque,
                      const GasConditions& gas) {
  if (!(joint >= 0.0 && joint <= model.joint_limit(ch)))
    throw DomainError("joint outside [0, limit]");
  double gauge;
  if (is_compartment(ch)) {
    const auto& c = model.compartment(ch);
    gauge = (joint + load_torque / c.bend_stiffness) / c.pressure_to_bend_gain;
  } else {
    const auto& b = model.bellow(ch);
    gauge = (b.hinge_stiffness * joint + load_torque) /
            (b.bellow.pouch_area * b.bellow.effective_arm(joint));
  }
  return chamber_mass(gauge + gas.atmosphere, model.chamber_volume(ch, joint), gas.temperature);
}

double atmospheric_mass(const HandModel& model, ChannelId ch, const GasConditions& gas) {
  return chamber_mass(gas.atmosphere, model.chamber_volume(ch, 0.0), gas.temperature);
}

PerChannel<double> rest_masses(const HandModel& model, const GasConditions& gas) {
  PerChannel<double> m{};
  for (auto ch : kAllChannels) m[index(ch)] = atmospheric_mass(model, ch, gas);
  return m;
}

PerChannel<double> max_masses(const HandModel& model, const GasConditions& gas) {
  PerChannel<double> m{};
  for (auto ch : kAllChannels) m[index(ch)] = mass_for_joint(model, ch, model.joint_limit(ch), 0.0, gas);
  return m;
}

HandState hand_equilibrium(const HandModel& model, const PerChannel<double>& masses,
                           const ExternalLoad& load, const GasConditions& gas) {
  HandState out;
  JointVector q{};
  for (auto ch : kAllChannels) {
    const auto i = index(ch);
    try {
      const auto eq = joint_equilibrium(model, ch, masses[i], load.torque[i], gas);
      q[i] = eq.joint;
      out.pressure[i] = eq.pressure;
      out.volume[i] = eq.volume;
      out.residual[i] = eq.residual;
    } catch (const DomainError& e) {
      throw DomainError(std::string(channel_name(ch)) + ": " + e.what());
    }
  }
  out.pose = forward_kinematics(model, q);
  for (std::size_t f = 0; f < 4; ++f) {
    out.tip_force[f] = Eigen::Vector2d::Zero();
    if (const auto& c = load.tip_constraint[f]) {
      const auto& spec = model.fingers[f].spec;
      const auto free_tip = finger_pose_from_bends(spec, q[index(kBaseChannel[f])],
                                                   q[index(kTipChannel[f])]).position;
      out.tip_force[f] = tip_spring_force(spec, free_tip, *c);
    }
  }
  return out;
}

}  // namespace pneumahand
