#pragma once

// Named air-mass postures and synergies shipped with the simulator: the
// 33 GRASP-taxonomy grasps, the ten Kapandji opposition postures and three
// in-hand rotation synergies.

#include <span>
#include <string>
#include <vector>

#include "pneumahand/control.hpp"
#include "pneumahand/hand.hpp"

namespace pneumahand {

enum class PostureKind { Taxonomy, Kapandji, InHandRotation, Recorded };

struct LibraryEntry {
  PostureKind kind;
  MassTrajectory trajectory;
};

struct PostureLibrary {
  std::vector<LibraryEntry> entries;

  const LibraryEntry* find(std::string_view name) const;
  std::vector<const LibraryEntry*> of_kind(PostureKind kind) const;
};

struct TaxonomyGrasp {
  int id;  // 1..33
  std::string_view name;
};
std::span<const TaxonomyGrasp> taxonomy_grasps();

std::string kapandji_posture_name(int target);

struct ReachSolution {
  JointVector joints{};
  double distance = 0.0;  // thumb tip to target, m
};

// Posture authoring: starting from `seed_joints`, adjusts `free_channels` to
// bring the thumb tip onto Kapandji target `target` (1..10). Damped least
// squares from a grid of thumb starts; joints stay within `limit_fraction`
// of their limits.
ReachSolution author_thumb_reach(const HandModel& model, const JointVector& seed_joints,
                                 int target, std::span<const ChannelId> free_channels,
                                 double limit_fraction = 0.9);

// Masses that hold `joints` at zero load (interior joints reproduce exactly
// under hand_equilibrium up to solver precision).
PerChannel<double> masses_for_joints(const HandModel& model, const JointVector& joints,
                                     const GasConditions& gas = {});

// Builds a posture trajectory: rest -> target masses linearly over
// `ramp` seconds, sampled every `step` seconds, then held.
MassTrajectory posture_trajectory(std::string name, const PerChannel<double>& rest,
                                  const PerChannel<double>& target, double ramp = 1.0,
                                  double step = 0.1);

// The shipped library, authored deterministically against `model`.
PostureLibrary default_posture_library(const HandModel& model, const GasConditions& gas = {});

// Joint vectors for the taxonomy postures (fractions of joint limits applied
// to `model`).
std::vector<std::pair<std::string, JointVector>> taxonomy_joint_postures(const HandModel& model);

// Power grasp around a 6 cm sphere used by the pull-out evaluation.
std::string_view pullout_posture_name();

}  // namespace pneumahand
