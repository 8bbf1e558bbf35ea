#include "pneumahand/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "pneumahand/errors.hpp"

namespace pneumahand {

namespace {

// Noise streams, one per protocol.
constexpr std::uint64_t kFingerStream = 0xF1;
constexpr std::uint64_t kBellowStream = 0xB0;
constexpr std::uint64_t kPulloutStream = 0x90;

constexpr double kTorqueRadius = 0.05;  // m, force sensor radius on the hinge rig

std::string fmt_num(double v) {
  std::ostringstream o;
  o << v;
  return o.str();
}

// Chamber pressure actually reached when a pressure loop regulates to
// `target` on a noisy sensor. Vented chambers (target 0) read ambient exactly.
double realized_pressure(double target, double max_pressure, double sigma, double draw) {
  if (target == 0.0) return 0.0;
  return std::clamp(target - sigma * draw, 0.0, max_pressure);
}

Verdict check_within(std::string name, double value, double anchor, double rel_tol) {
  const double tol = std::abs(anchor) * rel_tol;
  return {std::move(name), value, anchor, tol, std::abs(value - anchor) <= tol, ""};
}

Verdict check_at_most(std::string name, double value, double limit, std::string note = "") {
  return {std::move(name), value, limit, 0.0, value <= limit, std::move(note)};
}

Verdict check_below(std::string name, double value, double limit, std::string note = "") {
  return {std::move(name), value, limit, 0.0, value < limit, std::move(note)};
}

}  // namespace

Stat summarize(const std::vector<double>& values) {
  if (values.empty()) return {};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

bool ExperimentReport::passed() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

std::optional<double> ExperimentReport::scalar(std::string_view name) const {
  for (const auto& [k, v] : scalars)
    if (k == name) return v;
  return std::nullopt;
}

const Verdict* ExperimentReport::verdict(std::string_view name) const {
  for (const auto& v : verdicts)
    if (v.name == name) return &v;
  return nullptr;
}

const ReportRow* ExperimentReport::row(const std::vector<double>& keys) const {
  for (const auto& r : rows)
    if (r.keys == keys) return &r;
  return nullptr;
}

std::size_t ExperimentReport::metric_index(std::string_view name) const {
  for (std::size_t i = 0; i < metric_columns.size(); ++i)
    if (metric_columns[i] == name) return i;
  throw DomainError("report has no metric '" + std::string(name) + "'");
}

// ---------------------------------------------------------------- finger

ExperimentReport run_finger_characterization(const ExperimentContext& ctx, int repetitions,
                                             Digit finger) {
  if (repetitions < 1) throw DomainError("repetitions must be at least 1");
  if (finger == Digit::Thumb) throw DomainError("finger characterization needs a two-chamber finger");
  const auto& spec = ctx.rig.hand.finger(finger).spec;
  const double sigma = ctx.rig.sensor.sigma();
  const double top = 250e3;

  ExperimentReport rep;
  rep.experiment_id = "finger_characterization";
  rep.key_columns = {"p_base_kpa", "p_tip_kpa"};
  rep.metric_columns = {"tip_x_m",       "tip_y_m",       "force_base_n",  "force_tip_n",
                        "force_both_n",  "dir_base_deg",  "dir_tip_deg",   "dir_both_deg"};
  rep.seed = ctx.seed;
  rep.config_digest = ctx.config_digest;
  rep.repetitions = repetitions;
  rep.notes.emplace_back("finger", std::string(digit_name(finger)));

  auto draw = [&](int r, int cell, int code) {
    return keyed_normal(ctx.seed, kFingerStream, static_cast<std::uint64_t>(r),
                        static_cast<std::uint64_t>(cell * 16 + code));
  };

  std::vector<Eigen::Vector2d> mean_tips;
  int cell = 0;
  for (int ib = 0; ib <= 5; ++ib) {
    for (int it = 0; it <= 5; ++it, ++cell) {
      const double pb = 50e3 * ib, pt = 50e3 * it;
      std::array<std::vector<double>, 8> samples;
      for (int r = 0; r < repetitions; ++r) {
        const double pre_b = realized_pressure(pb, spec.base.max_pressure, sigma, draw(r, cell, 0));
        const double pre_t = realized_pressure(pt, spec.tip.max_pressure, sigma, draw(r, cell, 1));
        const Eigen::Vector2d held = finger_free_pose(spec, pre_b, pre_t).position;
        samples[0].push_back(held.x());
        samples[1].push_back(held.y());

        // A chamber already at the maximum level keeps its air; the others are
        // inflated to 250 kPa against the constraint.
        auto raise = [&](double level, double pre, double max_p, int code) {
          return level == top ? pre : realized_pressure(top, max_p, sigma, draw(r, cell, code));
        };
        const std::array<std::pair<double, double>, 3> cases = {{
            {raise(pb, pre_b, spec.base.max_pressure, 2), pre_t},
            {pre_b, raise(pt, pre_t, spec.tip.max_pressure, 3)},
            {raise(pb, pre_b, spec.base.max_pressure, 4), raise(pt, pre_t, spec.tip.max_pressure, 5)},
        }};
        for (std::size_t c = 0; c < 3; ++c) {
          const auto f = fingertip_force(spec, cases[c].first, cases[c].second, held);
          samples[2 + c].push_back(f.norm());
          samples[5 + c].push_back(rad2deg(std::atan2(f.y(), f.x())));
        }
      }
      ReportRow row{{pb / 1e3, pt / 1e3}, {}};
      for (const auto& s : samples) row.metrics.push_back(summarize(s));
      mean_tips.emplace_back(row.metrics[0].mean, row.metrics[1].mean);
      rep.rows.push_back(std::move(row));
    }
  }

  const auto hull = convex_hull(mean_tips);
  rep.scalars.emplace_back("cells", static_cast<double>(rep.rows.size()));
  rep.scalars.emplace_back("workspace_hull_area_m2", polygon_area(hull));
  rep.scalars.emplace_back("workspace_hull_vertices", static_cast<double>(hull.size()));

  double max_std = 0.0, mean_std = 0.0;
  int n_std = 0;
  for (const auto& row : rep.rows)
    for (std::size_t m = 2; m <= 4; ++m) {
      max_std = std::max(max_std, row.metrics[m].std);
      mean_std += row.metrics[m].std;
      ++n_std;
    }
  mean_std /= n_std;
  rep.scalars.emplace_back("max_force_std_n", max_std);
  rep.scalars.emplace_back("mean_force_std_n", mean_std);

  const auto both = rep.metric_index("force_both_n");
  rep.verdicts.push_back({"cells", static_cast<double>(rep.rows.size()), 36.0, 0.0,
                          rep.rows.size() == 36, ""});
  rep.verdicts.push_back(check_within("extended_constraint_force_n",
                                      rep.row({0.0, 0.0})->metrics[both].mean, spec.max_tip_force, 0.02));
  rep.verdicts.push_back({"free_pose_force_n", rep.row({250.0, 250.0})->metrics[both].mean, 0.0, 1e-9,
                          std::abs(rep.row({250.0, 250.0})->metrics[both].mean) <= 1e-9, ""});
  rep.verdicts.push_back(check_at_most("max_cell_force_std_n", max_std, 0.1));
  return rep;
}

// ---------------------------------------------------------------- bellow

std::optional<double> bellow_torque_anchor(ChannelId bellow) {
  switch (bellow) {
    case ChannelId::ThumbProximal: return 4.4;
    case ChannelId::ThumbMiddle: return 3.2;
    case ChannelId::ThumbDistal: return 1.9;
    default: return std::nullopt;
  }
}

ExperimentReport run_bellow_characterization(const ExperimentContext& ctx, ChannelId bellow,
                                             int repetitions) {
  if (!is_bellow(bellow)) throw DomainError(std::string(channel_name(bellow)) + " is not a bellow");
  if (repetitions < 1) throw DomainError("repetitions must be at least 1");
  const auto& spec = ctx.rig.hand.bellow(bellow).bellow;
  const double sigma = ctx.rig.sensor.sigma();

  ExperimentReport rep;
  rep.experiment_id = "bellow_characterization";
  rep.key_columns = {"angle_deg", "pressure_kpa"};
  rep.metric_columns = {"torque_nm", "force_at_radius_n"};
  rep.seed = ctx.seed;
  rep.config_digest = ctx.config_digest;
  rep.repetitions = repetitions;
  rep.notes.emplace_back("bellow", std::string(channel_name(bellow)));

  CalibrationTable samples;
  samples.provenance = "simulated blocked-hinge rig";
  std::vector<CalibrationSample> all_samples;
  for (int ia = 1; ia <= 5; ++ia) {
    const double angle_deg = 20.0 * ia;
    const double angle = deg2rad(angle_deg);
    // Rig cannot reach beyond the actuator's own opening limit.
    if (angle > spec.max_opening + 1e-12) continue;
    for (int ip = 1; ip <= 5; ++ip) {
      const double p = 50e3 * ip;
      std::vector<double> torque, force;
      for (int r = 0; r < repetitions; ++r) {
        const double draw = keyed_normal(ctx.seed, kBellowStream + index(bellow),
                                         static_cast<std::uint64_t>(r),
                                         static_cast<std::uint64_t>(ia * 8 + ip));
        const double p_real = realized_pressure(p, spec.max_pressure, sigma, draw);
        const double f = bellow_torque(spec, p_real, angle) / kTorqueRadius;
        force.push_back(f);
        torque.push_back(f * kTorqueRadius);
        all_samples.push_back({angle, p, f * kTorqueRadius});
      }
      rep.rows.push_back({{angle_deg, p / 1e3}, {summarize(torque), summarize(force)}});
    }
  }

  // Line fit of mean torque against pressure, per angle.
  double max_tau = 0.0, max_intercept = 0.0, max_std = 0.0;
  for (const auto& row : rep.rows) {
    max_tau = std::max(max_tau, row.metrics[0].mean);
    max_std = std::max(max_std, row.metrics[0].std);
  }
  for (int ia = 1; ia <= 5; ++ia) {
    const double angle_deg = 20.0 * ia;
    std::vector<std::pair<double, double>> pts;
    for (const auto& row : rep.rows)
      if (row.keys[0] == angle_deg) pts.emplace_back(row.keys[1] * 1e3, row.metrics[0].mean);
    if (pts.size() < 2) continue;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [x, y] : pts) {
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double n = static_cast<double>(pts.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / n;
    max_intercept = std::max(max_intercept, std::abs(intercept));
    rep.scalars.emplace_back("fit_slope_nm_per_kpa@" + fmt_num(angle_deg), slope * 1e3);
    rep.scalars.emplace_back("fit_intercept_nm@" + fmt_num(angle_deg), intercept);
  }

  // Torque against p * A through the origin gives the effective moment arm.
  samples.samples = std::move(all_samples);
  CalibrationTable means;
  means.provenance = samples.provenance;
  for (const auto& row : rep.rows)
    means.samples.push_back({deg2rad(row.keys[0]), row.keys[1] * 1e3, row.metrics[0].mean});
  if (means.angles().size() >= 2) {
    for (const auto& a : fit_moment_arm(means, spec))
      rep.scalars.emplace_back("fit_arm_m@" + fmt_num(std::round(rad2deg(a.angle))), a.arm);
  }
  rep.scalars.emplace_back("pouch_area_m2", spec.pouch_area);
  rep.scalars.emplace_back("cells", static_cast<double>(rep.rows.size()));

  if (const auto anchor = bellow_torque_anchor(bellow)) {
    rep.verdicts.push_back(check_within("torque_20deg_250kpa_nm", rep.row({20.0, 250.0})->metrics[0].mean,
                                        *anchor, 0.02));
  }
  rep.verdicts.push_back(check_below("max_cell_torque_std_nm", max_std, 0.1));
  rep.verdicts.push_back(check_below("max_fit_intercept_nm", max_intercept, 0.01 * max_tau,
                                     "limit is 1% of the largest mean torque"));
  return rep;
}

// ---------------------------------------------------------------- Kapandji

KapandjiResult run_kapandji(const ExperimentContext& ctx, const PostureLibrary& library,
                            const KapandjiOptions& options) {
  const auto& model = ctx.rig.hand;
  const double tol = options.tolerance.value_or(model.contact_tolerance);
  KapandjiResult out;
  auto& rep = out.report;
  rep.experiment_id = "kapandji";
  rep.key_columns = {"target"};
  rep.metric_columns = {"distance_m", "reached"};
  rep.seed = ctx.seed;
  rep.config_digest = ctx.config_digest;

  for (int k = 1; k <= 10; ++k) {
    const auto i = static_cast<std::size_t>(k - 1);
    const auto* entry = library.find(kapandji_posture_name(k));
    if (!entry || entry->trajectory.samples.empty()) {
      out.distance[i] = std::numeric_limits<double>::infinity();
      out.reached[i] = false;
      rep.notes.emplace_back("missing", kapandji_posture_name(k));
    } else {
      auto masses = entry->trajectory.samples.back().mass;
      for (const auto& [ch, m] : options.forced_masses) masses[index(ch)] = m;
      const auto state = hand_equilibrium(model, masses, {}, ctx.rig.gas());
      out.distance[i] = (state.pose.tip(Digit::Thumb).translation() - state.pose.kapandji[i]).norm();
      out.reached[i] = out.distance[i] <= tol;
    }
    if (out.reached[i]) ++out.score;
    rep.rows.push_back({{static_cast<double>(k)},
                        {{out.distance[i], 0.0}, {out.reached[i] ? 1.0 : 0.0, 0.0}}});
  }
  rep.scalars.emplace_back("score", out.score);
  rep.scalars.emplace_back("tolerance_m", tol);
  for (const auto& [ch, m] : options.forced_masses)
    rep.notes.emplace_back("forced_mass", std::string(channel_name(ch)) + "=" + fmt_num(m));
  rep.verdicts.push_back({"score", static_cast<double>(out.score), 10.0, 0.0, out.score == 10, ""});
  return out;
}

// ---------------------------------------------------------------- pull-out

std::string_view pull_direction_name(PullDirection d) {
  constexpr std::array<std::string_view, kPullDirections> names = {"distal", "proximal", "palmar",
                                                                   "dorsal", "radial",   "ulnar"};
  return names[static_cast<std::size_t>(d)];
}

Eigen::Vector3d pull_direction_vector(PullDirection d) {
  switch (d) {
    case PullDirection::Distal: return Eigen::Vector3d::UnitZ();
    case PullDirection::Proximal: return -Eigen::Vector3d::UnitZ();
    case PullDirection::Palmar: return Eigen::Vector3d::UnitY();
    case PullDirection::Dorsal: return -Eigen::Vector3d::UnitY();
    case PullDirection::Radial: return Eigen::Vector3d::UnitX();
    case PullDirection::Ulnar: return -Eigen::Vector3d::UnitX();
  }
  return Eigen::Vector3d::Zero();
}

std::vector<DigitContact> grasp_contacts(const ExperimentContext& ctx,
                                         const PerChannel<double>& masses) {
  const auto& model = ctx.rig.hand;
  const auto& cfg = ctx.pullout;
  const auto state = hand_equilibrium(model, masses, {}, ctx.rig.gas());
  const double radius = 0.5 * cfg.sphere_diameter;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  if (cfg.sphere_center) {
    center = *cfg.sphere_center;
  } else {
    for (std::size_t d = 0; d < kDigitCount; ++d) center += state.pose.tips[d].translation();
    center /= static_cast<double>(kDigitCount);
  }

  std::vector<DigitContact> contacts;
  for (std::size_t d = 0; d < kDigitCount; ++d) {
    const auto digit = static_cast<Digit>(d);
    const Eigen::Vector3d free_tip = state.pose.tip(digit).translation();
    const Eigen::Vector3d rel = free_tip - center;
    const double dist = rel.norm();
    if (!(dist < radius) || dist == 0.0) continue;
    // The sphere holds the tip on its surface; the digit pushes toward its
    // free position.
    const Eigen::Vector3d held = center + radius * rel / dist;
    Eigen::Vector3d f;
    double limit;
    if (digit == Digit::Thumb) {
      f = cfg.thumb_stiffness * (free_tip - held);
      limit = cfg.thumb_max_force;
    } else {
      const auto& spec = model.finger(digit).spec;
      f = spec.tip_stiffness * (free_tip - held);
      limit = spec.max_tip_force;
    }
    if (f.norm() > limit) f *= limit / f.norm();
    contacts.push_back({digit, f});
  }
  return contacts;
}

std::array<double, kPullDirections> raw_pull_resistance(const std::vector<DigitContact>& contacts,
                                                        double friction) {
  std::array<double, kPullDirections> out{};
  double normal_sum = 0.0;
  for (const auto& c : contacts) normal_sum += c.force.norm();
  for (std::size_t k = 0; k < kPullDirections; ++k) {
    const Eigen::Vector3d dir = pull_direction_vector(static_cast<PullDirection>(k));
    double barrier = 0.0;
    for (const auto& c : contacts) barrier += std::max(0.0, -c.force.dot(dir));
    out[k] = barrier > 0.0 ? barrier : friction * normal_sum;
  }
  return out;
}

std::array<double, kPullDirections> calibrate_pullout(const ExperimentContext& ctx,
                                                      const MassTrajectory& posture) {
  posture.validate();
  const auto contacts = grasp_contacts(ctx, posture.samples.back().mass);
  if (contacts.empty()) throw ValidationError("no grasp: posture makes no digit contact");
  const auto raw = raw_pull_resistance(contacts, ctx.pullout.friction);
  std::array<double, kPullDirections> gains{};
  double sum = 0.0;
  int n = 0;
  for (std::size_t k = 0; k < kPullDirections; ++k) {
    if (std::isnan(ctx.pullout.anchors[k])) continue;
    if (!(raw[k] > 0.0))
      throw ValidationError("pull-out calibration: no resistance in " +
                            std::string(pull_direction_name(static_cast<PullDirection>(k))));
    gains[k] = ctx.pullout.anchors[k] / raw[k];
    sum += gains[k];
    ++n;
  }
  for (std::size_t k = 0; k < kPullDirections; ++k)
    if (std::isnan(ctx.pullout.anchors[k])) gains[k] = n > 0 ? sum / n : 1.0;
  return gains;
}

ExperimentReport run_pullout(const ExperimentContext& ctx, const MassTrajectory& posture,
                             int repetitions) {
  if (repetitions < 1) throw DomainError("repetitions must be at least 1");
  posture.validate();
  const auto& model = ctx.rig.hand;
  const auto gains = ctx.pullout.gains.value_or(calibrate_pullout(ctx, posture));
  const auto target = posture.samples.back().mass;
  const auto nominal = hand_equilibrium(model, target, {}, ctx.rig.gas());
  const double sigma = ctx.rig.sensor.sigma();

  std::array<std::vector<double>, kPullDirections> samples;
  for (int r = 0; r < repetitions; ++r) {
    // Air masses are set from pressure-based estimates: each channel carries
    // the mass equivalent of one sensor error at its nominal volume.
    PerChannel<double> masses = target;
    for (std::size_t i = 0; i < kChannelCount; ++i) {
      const double dp = sigma * keyed_normal(ctx.seed, kPulloutStream, static_cast<std::uint64_t>(r), i);
      masses[i] = std::max(0.0, target[i] + dp * nominal.volume[i] /
                                                (kAirGasConstant * ctx.rig.plant.temperature));
    }
    const auto contacts = grasp_contacts(ctx, masses);
    if (contacts.empty()) throw ValidationError("no grasp: posture makes no digit contact");
    const auto raw = raw_pull_resistance(contacts, ctx.pullout.friction);
    for (std::size_t k = 0; k < kPullDirections; ++k) samples[k].push_back(gains[k] * raw[k]);
  }

  ExperimentReport rep;
  rep.experiment_id = "pullout";
  rep.key_columns = {"direction"};
  rep.metric_columns = {"force_n"};
  rep.seed = ctx.seed;
  rep.config_digest = ctx.config_digest;
  rep.repetitions = repetitions;
  rep.notes.emplace_back("posture", posture.name);
  rep.notes.emplace_back("direction_codes", "0 distal, 1 proximal, 2 palmar, 3 dorsal, 4 radial, 5 ulnar");
  std::array<Stat, kPullDirections> stats{};
  for (std::size_t k = 0; k < kPullDirections; ++k) {
    stats[k] = summarize(samples[k]);
    rep.rows.push_back({{static_cast<double>(k)}, {stats[k]}});
    rep.scalars.emplace_back(std::string(pull_direction_name(static_cast<PullDirection>(k))) + "_gain",
                             gains[k]);
    const auto dir = static_cast<PullDirection>(k);
    const std::string name(pull_direction_name(dir));
    if (!std::isnan(ctx.pullout.anchors[k])) {
      rep.verdicts.push_back(check_within(name + "_mean_n", stats[k].mean, ctx.pullout.anchors[k], 0.10));
    } else {
      rep.notes.emplace_back(name, "unanchored direction, extrapolated gain");
    }
    rep.verdicts.push_back(check_below(name + "_std_n", stats[k].std, 3.0));
  }
  const auto m = [&](PullDirection d) { return stats[static_cast<std::size_t>(d)].mean; };
  const bool ordered = m(PullDirection::Distal) > m(PullDirection::Ulnar) &&
                       m(PullDirection::Ulnar) > m(PullDirection::Radial) &&
                       m(PullDirection::Radial) > m(PullDirection::Palmar);
  rep.verdicts.push_back({"ordering_distal_ulnar_radial_palmar", ordered ? 1.0 : 0.0, 1.0, 0.0, ordered, ""});
  return rep;
}

// ---------------------------------------------------------------- library

LibraryValidation validate_library(const ExperimentContext& ctx, const PostureLibrary& library,
                                   int replays, double settle) {
  if (replays < 1) throw DomainError("replays must be at least 1");
  LibraryValidation out;
  auto& rep = out.report;
  rep.experiment_id = "library_validation";
  rep.key_columns = {"entry"};
  rep.metric_columns = {"pass", "final_joint_norm_rad"};
  rep.seed = ctx.seed;
  rep.config_digest = ctx.config_digest;
  rep.repetitions = replays;

  std::vector<JointVector> taxonomy_final;
  int k = 0;
  for (const auto& entry : library.entries) {
    ++out.entries;
    std::string failure;
    JointVector first{};
    try {
      entry.trajectory.validate();
      for (int r = 0; r < replays; ++r) {
        ControlLoop loop(ctx.rig);
        replay_closed_loop(loop, entry.trajectory, 1.0, settle);
        const auto& q = loop.hand().pose.joints;
        if (r == 0) {
          first = q;
        } else if (q != first) {
          failure = "replay " + std::to_string(r + 1) + " final pose differs from replay 1";
          break;
        }
      }
    } catch (const std::exception& e) {
      failure = e.what();
    }
    double norm = 0.0;
    for (double v : first) norm += v * v;
    if (failure.empty()) {
      ++out.passed;
    } else {
      out.failures.emplace_back(entry.trajectory.name, failure);
    }
    if (entry.kind == PostureKind::Taxonomy) {
      out.taxonomy_names.push_back(entry.trajectory.name);
      taxonomy_final.push_back(first);
    }
    rep.rows.push_back({{static_cast<double>(k++)}, {{failure.empty() ? 1.0 : 0.0, 0.0}, {std::sqrt(norm), 0.0}}});
    rep.notes.emplace_back(entry.trajectory.name, failure.empty() ? "pass" : failure);
  }

  const std::size_t n = taxonomy_final.size();
  out.taxonomy_distance.assign(n, std::vector<double>(n, 0.0));
  double min_distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < kChannelCount; ++c) {
        const double d = taxonomy_final[i][c] - taxonomy_final[j][c];
        s += d * d;
      }
      out.taxonomy_distance[i][j] = std::sqrt(s);
      if (i < j) {
        min_distance = std::min(min_distance, out.taxonomy_distance[i][j]);
        if (!(out.taxonomy_distance[i][j] > 1e-3))
          out.failures.emplace_back(out.taxonomy_names[i] + "," + out.taxonomy_names[j],
                                    "taxonomy postures are not distinct");
      }
    }
  out.taxonomy_distinct = n < 2 || min_distance > 1e-3;

  rep.scalars.emplace_back("entries", out.entries);
  rep.scalars.emplace_back("passed", out.passed);
  rep.scalars.emplace_back("taxonomy_postures", static_cast<double>(n));
  rep.scalars.emplace_back("min_taxonomy_distance_rad", n < 2 ? 0.0 : min_distance);
  rep.verdicts.push_back({"entries_passed", static_cast<double>(out.passed),
                          static_cast<double>(out.entries), 0.0, out.passed == out.entries, ""});
  rep.verdicts.push_back({"taxonomy_distinct", n < 2 ? 0.0 : min_distance, 1e-3, 0.0,
                          out.taxonomy_distinct, "minimum pairwise joint-space distance"});
  return out;
}

// ---------------------------------------------------------------- geometry

std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return (a - o).x() * (b - o).y() - (a - o).y() * (b - o).x();
  };
  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

double polygon_area(const std::vector<Eigen::Vector2d>& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * std::abs(a);
}

}  // namespace pneumahand
