#include "pneumahand/posture_library.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>

#include <Eigen/Dense>

#include "pneumahand/errors.hpp"

namespace pneumahand {

namespace {

constexpr std::array<ChannelId, 4> kThumbChannels = {ChannelId::ThumbProximal, ChannelId::ThumbMiddle,
                                                     ChannelId::ThumbDistal, ChannelId::ThumbTip};

Eigen::Vector3d reach_error(const HandModel& model, const JointVector& q, int target) {
  const auto pose = forward_kinematics(model, q);
  return pose.tip(Digit::Thumb).translation() -
         pose.kapandji[static_cast<std::size_t>(target - 1)];
}

// Damped least squares on the free channels, clamped to [0, cap].
ReachSolution descend(const HandModel& model, JointVector q, int target,
                      std::span<const ChannelId> free, const std::vector<double>& cap) {
  const std::size_t n = free.size();
  constexpr double kStep = 1e-7;
  constexpr double kDamping = 1e-2;
  Eigen::Vector3d r = reach_error(model, q, target);
  for (int it = 0; it < 150 && r.norm() > 1e-8; ++it) {
    Eigen::MatrixXd jac(3, static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
      const auto i = index(free[k]);
      JointVector qp = q;
      const double h = q[i] + kStep <= cap[k] ? kStep : -kStep;
      qp[i] += h;
      jac.col(static_cast<Eigen::Index>(k)) = (reach_error(model, qp, target) - r) / h;
    }
    const Eigen::Matrix3d jjt = jac * jac.transpose() + kDamping * kDamping * Eigen::Matrix3d::Identity();
    const Eigen::VectorXd dq = jac.transpose() * jjt.ldlt().solve(-r);
    JointVector next = q;
    for (std::size_t k = 0; k < n; ++k) {
      const auto i = index(free[k]);
      next[i] = std::clamp(q[i] + dq(static_cast<Eigen::Index>(k)), 0.0, cap[k]);
    }
    const Eigen::Vector3d rn = reach_error(model, next, target);
    if (rn.norm() >= r.norm()) break;
    q = next;
    r = rn;
  }
  return {q, r.norm()};
}

}  // namespace

ReachSolution author_thumb_reach(const HandModel& model, const JointVector& seed_joints, int target,
                                 std::span<const ChannelId> free_channels, double limit_fraction) {
  if (target < 1 || target > 10) throw DomainError("Kapandji target must be 1..10");
  std::vector<double> cap;
  for (auto ch : free_channels) cap.push_back(limit_fraction * model.joint_limit(ch));

  constexpr std::array<double, 3> kStarts = {0.15, 0.5, 0.85};
  ReachSolution best{seed_joints, INFINITY};
  for (double a : kStarts)
    for (double b : kStarts)
      for (double c : kStarts)
        for (double d : kStarts) {
          JointVector q = seed_joints;
          const std::array<double, 4> frac = {a, b, c, d};
          for (std::size_t k = 0; k < 4; ++k) {
            const auto ch = kThumbChannels[k];
            q[index(ch)] = frac[k] * limit_fraction * model.joint_limit(ch);
          }
          const auto sol = descend(model, q, target, free_channels, cap);
          if (sol.distance < best.distance) best = sol;
          if (best.distance < 1e-7) return best;
        }
  return best;
}

}  // namespace pneumahand

namespace pneumahand {

namespace {

using C = ChannelId;

constexpr std::array<TaxonomyGrasp, 33> kTaxonomy = {{
    {1, "large_diameter"},    {2, "small_diameter"},       {3, "medium_wrap"},
    {4, "adducted_thumb"},    {5, "light_tool"},           {6, "prismatic_4_finger"},
    {7, "prismatic_3_finger"}, {8, "prismatic_2_finger"},  {9, "palmar_pinch"},
    {10, "power_disk"},       {11, "power_sphere"},        {12, "precision_disk"},
    {13, "precision_sphere"}, {14, "tripod"},              {15, "fixed_hook"},
    {16, "lateral"},          {17, "index_finger_extension"}, {18, "extension_type"},
    {19, "distal_type"},      {20, "writing_tripod"},      {21, "tripod_variation"},
    {22, "parallel_extension"}, {23, "adduction_grip"},    {24, "tip_pinch"},
    {25, "lateral_tripod"},   {26, "sphere_4_finger"},     {27, "quadpod"},
    {28, "sphere_3_finger"},  {29, "stick"},               {30, "palmar"},
    {31, "ring"},             {32, "ventral"},             {33, "inferior_pincer"},
}};

// Joint targets as fractions of each joint limit, in channel order:
// IB IT MB MT RB RT LB LT | TP TM TD TT | PB | A-IM A-MR A-RL
using Fractions = std::array<double, kChannelCount>;
constexpr std::array<Fractions, 33> kTaxonomyFractions = {{
    {.35, .30, .35, .30, .35, .30, .35, .30, .50, .60, .20, .10, .30, .20, .20, .20},
    {.70, .70, .70, .70, .70, .70, .70, .70, .60, .70, .40, .40, .50, .00, .00, .00},
    {.50, .50, .50, .50, .50, .50, .50, .50, .55, .65, .30, .25, .40, .10, .10, .10},
    {.60, .60, .60, .60, .60, .60, .60, .60, .10, .20, .10, .10, .30, .00, .00, .00},
    {.40, .30, .70, .70, .70, .70, .70, .70, .30, .40, .20, .10, .40, .05, .00, .00},
    {.20, .60, .20, .60, .20, .60, .20, .60, .70, .30, .50, .40, .10, .10, .10, .10},
    {.20, .60, .20, .60, .20, .60, .05, .10, .70, .30, .50, .40, .10, .10, .10, .05},
    {.20, .60, .20, .60, .05, .10, .05, .10, .70, .30, .50, .40, .05, .10, .05, .05},
    {.35, .35, .00, .00, .00, .00, .00, .00, .70, .40, .50, .30, .00, .00, .00, .00},
    {.45, .30, .45, .30, .45, .30, .45, .30, .60, .50, .30, .20, .60, .50, .50, .50},
    {.55, .45, .55, .45, .55, .45, .55, .45, .70, .60, .35, .25, .70, .40, .40, .40},
    {.30, .25, .30, .25, .30, .25, .30, .25, .70, .50, .40, .30, .30, .60, .60, .60},
    {.40, .35, .40, .35, .40, .35, .40, .35, .75, .50, .45, .35, .50, .45, .45, .45},
    {.40, .40, .40, .35, .60, .60, .60, .60, .70, .45, .50, .40, .20, .20, .10, .10},
    {.20, .80, .20, .80, .20, .80, .20, .80, .00, .00, .00, .00, .00, .00, .00, .00},
    {.60, .70, .60, .70, .60, .70, .60, .70, .05, .30, .20, .30, .10, .00, .00, .00},
    {.05, .05, .70, .70, .70, .70, .70, .70, .20, .30, .30, .20, .30, .00, .00, .00},
    {.15, .10, .15, .10, .15, .10, .15, .10, .80, .30, .30, .10, .20, .30, .30, .30},
    {.50, .50, .10, .10, .70, .70, .70, .70, .40, .60, .60, .50, .20, .70, .20, .20},
    {.45, .50, .55, .60, .75, .75, .75, .75, .55, .40, .45, .35, .30, .10, .00, .00},
    {.50, .55, .35, .30, .60, .60, .70, .70, .60, .50, .55, .25, .30, .20, .10, .00},
    {.35, .05, .35, .05, .35, .05, .35, .05, .80, .25, .20, .05, .15, .05, .05, .05},
    {.20, .10, .20, .10, .65, .70, .65, .70, .10, .10, .00, .00, .20, .00, .00, .00},
    {.50, .70, .10, .10, .10, .10, .10, .10, .75, .45, .55, .50, .10, .10, .00, .00},
    {.55, .60, .60, .60, .70, .70, .70, .70, .10, .35, .25, .20, .20, .00, .00, .00},
    {.45, .40, .45, .40, .45, .40, .45, .40, .70, .55, .40, .30, .40, .35, .35, .35},
    {.45, .45, .45, .45, .45, .45, .20, .20, .70, .50, .50, .35, .30, .30, .30, .10},
    {.45, .40, .45, .40, .45, .40, .80, .80, .70, .50, .45, .30, .35, .30, .20, .00},
    {.30, .20, .55, .55, .55, .55, .55, .55, .30, .20, .40, .30, .20, .00, .00, .00},
    {.15, .10, .15, .10, .15, .10, .15, .10, .40, .30, .20, .10, .20, .10, .10, .10},
    {.50, .50, .30, .25, .30, .25, .30, .25, .70, .40, .50, .45, .20, .30, .10, .10},
    {.05, .40, .60, .60, .70, .70, .70, .70, .20, .30, .20, .10, .30, .00, .00, .00},
    {.45, .35, .60, .60, .60, .60, .60, .60, .65, .55, .50, .10, .30, .10, .00, .00},
}};

JointVector joints_from_fractions(const HandModel& model, const Fractions& f) {
  JointVector q{};
  for (auto ch : kAllChannels) q[index(ch)] = f[index(ch)] * model.joint_limit(ch);
  return q;
}

struct KapandjiPlan {
  bool palm;  // ulnar targets need the palm bellow
  std::vector<ChannelId> fingers;
};

KapandjiPlan kapandji_plan(int target) {
  switch (target) {
    case 1: return {false, {}};
    case 2:
    case 3: return {false, {C::IndexBase, C::IndexTip}};
    case 4: return {false, {C::MiddleBase, C::MiddleTip}};
    case 5: return {true, {C::RingBase, C::RingTip}};
    case 6:
    case 7:
    case 8: return {true, {C::LittleBase, C::LittleTip}};
    default: return {true, {}};
  }
}

constexpr double kPalmOpposition = 0.85;  // fraction of the palm limit
constexpr double kAuthoringCap = 0.95;

std::map<std::string, std::string> library_metadata(std::string_view kind) {
  return {{"author", "scripted"}, {"kind", std::string(kind)}, {"created_at", "library-build"}};
}

MassTrajectory synergy(std::string name, const HandModel& model, const GasConditions& gas,
                       const JointVector& hold, std::span<const ChannelId> moving,
                       const std::vector<std::pair<double, double>>& lo_hi_fraction,
                       std::span<const double> phase, double period, int cycles, double step) {
  MassTrajectory t;
  t.name = std::move(name);
  const auto rest = rest_masses(model, gas);
  const auto hold_mass = masses_for_joints(model, hold, gas);
  // Close onto the hold posture, then oscillate the moving channels.
  const double ramp = 1.0;
  const int ramp_steps = static_cast<int>(std::lround(ramp / step));
  for (int k = 0; k < ramp_steps; ++k) {
    const double s = k * step;
    MassSample m{s, {}};
    for (std::size_t i = 0; i < kChannelCount; ++i)
      m.mass[i] = rest[i] + (hold_mass[i] - rest[i]) * (s / ramp);
    t.samples.push_back(m);
  }
  const int n = static_cast<int>(std::lround(period * cycles / step));
  for (int k = 0; k <= n; ++k) {
    const double s = ramp + k * step;
    JointVector q = hold;
    for (std::size_t c = 0; c < moving.size(); ++c) {
      const auto ch = moving[c];
      const double w = 0.5 - 0.5 * std::cos(2.0 * kPi * (k * step) / period + phase[c]);
      const auto [lo, hi] = lo_hi_fraction[c];
      q[index(ch)] = (lo + (hi - lo) * w) * model.joint_limit(ch);
    }
    t.samples.push_back({s, masses_for_joints(model, q, gas)});
  }
  t.metadata = library_metadata("in_hand_rotation");
  return t;
}

}  // namespace

const LibraryEntry* PostureLibrary::find(std::string_view name) const {
  for (const auto& e : entries)
    if (e.trajectory.name == name) return &e;
  return nullptr;
}

std::vector<const LibraryEntry*> PostureLibrary::of_kind(PostureKind kind) const {
  std::vector<const LibraryEntry*> out;
  for (const auto& e : entries)
    if (e.kind == kind) out.push_back(&e);
  return out;
}

std::span<const TaxonomyGrasp> taxonomy_grasps() { return kTaxonomy; }

std::string kapandji_posture_name(int target) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "kapandji_%02d", target);
  return buf;
}

std::string_view pullout_posture_name() { return "taxonomy_11_power_sphere"; }

PerChannel<double> masses_for_joints(const HandModel& model, const JointVector& joints,
                                     const GasConditions& gas) {
  PerChannel<double> m{};
  for (auto ch : kAllChannels) m[index(ch)] = mass_for_joint(model, ch, joints[index(ch)], 0.0, gas);
  return m;
}

MassTrajectory posture_trajectory(std::string name, const PerChannel<double>& rest,
                                  const PerChannel<double>& target, double ramp, double step) {
  if (!(ramp > 0.0 && step > 0.0)) throw DomainError("ramp and step must be positive");
  MassTrajectory t;
  t.name = std::move(name);
  const int n = static_cast<int>(std::lround(ramp / step));
  for (int k = 0; k <= n; ++k) {
    const double w = static_cast<double>(k) / n;
    MassSample s{k * step, {}};
    for (std::size_t i = 0; i < kChannelCount; ++i) s.mass[i] = rest[i] + (target[i] - rest[i]) * w;
    // The final sample carries the target bit-exactly.
    if (k == n) s.mass = target;
    t.samples.push_back(s);
  }
  return t;
}

std::vector<std::pair<std::string, JointVector>> taxonomy_joint_postures(const HandModel& model) {
  std::vector<std::pair<std::string, JointVector>> out;
  for (std::size_t k = 0; k < kTaxonomy.size(); ++k) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "taxonomy_%02d_%s", kTaxonomy[k].id,
                  std::string(kTaxonomy[k].name).c_str());
    out.emplace_back(buf, joints_from_fractions(model, kTaxonomyFractions[k]));
  }
  return out;
}

PostureLibrary default_posture_library(const HandModel& model, const GasConditions& gas) {
  PostureLibrary lib;
  const auto rest = rest_masses(model, gas);

  for (auto& [name, q] : taxonomy_joint_postures(model)) {
    auto t = posture_trajectory(name, rest, masses_for_joints(model, q, gas));
    t.metadata = library_metadata("taxonomy");
    lib.entries.push_back({PostureKind::Taxonomy, std::move(t)});
  }

  for (int target = 1; target <= 10; ++target) {
    const auto plan = kapandji_plan(target);
    JointVector seed{};
    if (plan.palm)
      seed[index(C::PalmBellow)] = kPalmOpposition * model.joint_limit(C::PalmBellow);
    std::vector<ChannelId> free = {C::ThumbProximal, C::ThumbMiddle, C::ThumbDistal, C::ThumbTip};
    free.insert(free.end(), plan.fingers.begin(), plan.fingers.end());
    const auto sol = author_thumb_reach(model, seed, target, free, kAuthoringCap);
    auto t = posture_trajectory(kapandji_posture_name(target), rest,
                                masses_for_joints(model, sol.joints, gas));
    t.metadata = library_metadata("kapandji");
    lib.entries.push_back({PostureKind::Kapandji, std::move(t)});
  }

  // In-hand rotations hold a precision-sphere closure and move a subset of
  // channels; the rest of the hand stays passive.
  const JointVector hold = joints_from_fractions(model, kTaxonomyFractions[12]);
  {
    const std::array<ChannelId, 4> moving = {C::IndexBase, C::IndexTip, C::LittleBase, C::LittleTip};
    const std::array<double, 4> phase = {0.0, 0.0, kPi, kPi};
    lib.entries.push_back({PostureKind::InHandRotation,
                           synergy("inhand_proximal_distal", model, gas, hold, moving,
                                   {{.2, .6}, {.2, .6}, {.2, .6}, {.2, .6}}, phase, 2.0, 2, 0.1)});
  }
  {
    const std::array<ChannelId, 4> moving = {C::IndexBase, C::IndexTip, C::MiddleBase, C::MiddleTip};
    const std::array<double, 4> phase = {0.0, kPi / 2, 0.0, kPi / 2};
    lib.entries.push_back({PostureKind::InHandRotation,
                           synergy("inhand_dorsal_palmar", model, gas, hold, moving,
                                   {{.2, .6}, {.2, .6}, {.2, .6}, {.2, .6}}, phase, 2.0, 2, 0.1)});
  }
  {
    const std::array<ChannelId, 6> moving = {C::ThumbTip,   C::ThumbMiddle, C::IndexBase,
                                             C::MiddleBase, C::RingBase,    C::LittleBase};
    const std::array<double, 6> phase = {0.0, kPi, 0.0, kPi / 3, 2 * kPi / 3, kPi};
    lib.entries.push_back(
        {PostureKind::InHandRotation,
         synergy("inhand_radial_ulnar", model, gas, hold, moving,
                 {{.2, .7}, {.3, .7}, {.2, .6}, {.2, .6}, {.2, .6}, {.2, .6}}, phase, 2.0, 2, 0.1)});
  }
  return lib;
}

}  // namespace pneumahand
