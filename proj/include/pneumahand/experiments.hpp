#pragma once

// Characterization protocols and hand-level evaluations run against the
// simulator, each producing an ExperimentReport.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pneumahand/control.hpp"
#include "pneumahand/posture_library.hpp"

namespace pneumahand {

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1)
};
Stat summarize(const std::vector<double>& values);

struct Verdict {
  std::string name;
  double value = 0.0;
  double anchor = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string note;
};

struct ReportRow {
  std::vector<double> keys;
  std::vector<Stat> metrics;
};

struct ExperimentReport {
  std::string experiment_id;
  std::vector<std::string> key_columns;
  std::vector<std::string> metric_columns;
  std::vector<ReportRow> rows;
  std::vector<Verdict> verdicts;
  std::vector<std::pair<std::string, double>> scalars;
  std::vector<std::pair<std::string, std::string>> notes;
  std::uint64_t seed = 0;
  std::string config_digest;
  int repetitions = 1;

  bool passed() const;
  std::optional<double> scalar(std::string_view name) const;
  const Verdict* verdict(std::string_view name) const;
  // Row whose key columns equal `keys` exactly.
  const ReportRow* row(const std::vector<double>& keys) const;
  std::size_t metric_index(std::string_view name) const;
};

enum class PullDirection { Distal = 0, Proximal, Palmar, Dorsal, Radial, Ulnar };
inline constexpr std::size_t kPullDirections = 6;
std::string_view pull_direction_name(PullDirection d);
Eigen::Vector3d pull_direction_vector(PullDirection d);

struct PulloutConfig {
  double sphere_diameter = 0.06;                              // m
  // Palm frame; unset places the sphere at the centroid of the free digit tips.
  std::optional<Eigen::Vector3d> sphere_center;
  double friction = 1.0;                                     // silicone on wood
  double thumb_stiffness = 300.0;                            // N/m
  double thumb_max_force = 15.0;                             // N
  // Measured means the gains are calibrated to; NaN = unanchored.
  std::array<double, kPullDirections> anchors = {39.0, NAN, 23.0, NAN, 30.0, 32.0};
  // Resistance gains; unset until calibrate_pullout runs.
  std::optional<std::array<double, kPullDirections>> gains;
};

struct ExperimentContext {
  RigConfig rig;
  PulloutConfig pullout;
  std::uint64_t seed = 0;
  std::string config_digest;
};

// Two-chamber finger sweep over 36 pressure pairs plus tip forces for the
// three maximum-inflation cases.
ExperimentReport run_finger_characterization(const ExperimentContext& ctx, int repetitions = 5,
                                             Digit finger = Digit::Index);

// Blocked-hinge torque grid, 20..100 deg x 50..250 kPa, torque read as force at
// a 5 cm radius. `bellow` must be a bellow channel.
ExperimentReport run_bellow_characterization(const ExperimentContext& ctx, ChannelId bellow,
                                             int repetitions = 5);

// Torque anchor at (20 deg, 250 kPa) for the thumb bellows, if any.
std::optional<double> bellow_torque_anchor(ChannelId bellow);

struct KapandjiResult {
  int score = 0;
  std::array<double, 10> distance{};  // m; +inf when the posture is missing
  std::array<bool, 10> reached{};
  ExperimentReport report;
};

struct KapandjiOptions {
  std::optional<double> tolerance;  // defaults to the hand model's contact tolerance
  // Channels forced to a fixed air mass during replay.
  std::vector<std::pair<ChannelId, double>> forced_masses;
};

KapandjiResult run_kapandji(const ExperimentContext& ctx, const PostureLibrary& library,
                            const KapandjiOptions& options = {});

struct DigitContact {
  Digit digit;
  Eigen::Vector3d force;  // on the object, N
};

// Digit forces on the sphere for a posture's final masses.
std::vector<DigitContact> grasp_contacts(const ExperimentContext& ctx,
                                         const PerChannel<double>& masses);

// Uncalibrated resistance per direction for a set of contacts.
std::array<double, kPullDirections> raw_pull_resistance(const std::vector<DigitContact>& contacts,
                                                        double friction);

// Gains mapping raw resistance onto the anchored means for `posture`;
// unanchored directions get the mean anchored gain.
std::array<double, kPullDirections> calibrate_pullout(const ExperimentContext& ctx,
                                                      const MassTrajectory& posture);

ExperimentReport run_pullout(const ExperimentContext& ctx, const MassTrajectory& posture,
                             int repetitions = 5);

struct LibraryValidation {
  ExperimentReport report;
  int entries = 0;
  int passed = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // name, reason
  std::vector<std::string> taxonomy_names;
  std::vector<std::vector<double>> taxonomy_distance;  // pairwise joint-space distance
  bool taxonomy_distinct = false;
};

LibraryValidation validate_library(const ExperimentContext& ctx, const PostureLibrary& library,
                                   int replays = 3, double settle = 1.0);

// 2-D convex hull (counter-clockwise) and its area.
std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> points);
double polygon_area(const std::vector<Eigen::Vector2d>& polygon);

}  // namespace pneumahand
