#pragma once

// Versioned file formats. Line-oriented files start with a header carrying
// the format id, version, config digest and seed; readers reject an unknown
// major version. Parse failures throw FormatError with where() = "file:line".

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "pneumahand/experiments.hpp"

namespace pneumahand {

inline constexpr const char* kTrajectoryFormat = "pneumahand-trajectory";
inline constexpr const char* kTraceFormat = "pneumahand-trace";
inline constexpr const char* kReportFormat = "pneumahand-report";
inline constexpr const char* kCalibrationFormat = "pneumahand-calibration";
inline constexpr const char* kSessionFormat = "pneumahand-session";
inline constexpr const char* kWireFormat = "pneumahand-wire";
inline constexpr int kRecordsMajorVersion = 1;
inline constexpr const char* kRecordsVersion = "1.0";

struct RecordHeader {
  std::string format;
  std::string version = kRecordsVersion;
  std::string config_digest;
  std::uint64_t seed = 0;
};

// Throws FormatError unless `format` matches and the major version is known.
void check_header(const nlohmann::json& header, const std::string& expected_format,
                  const std::string& where);

// ---- mass trajectories (JSON Lines)

std::string write_trajectory(const MassTrajectory& traj, const RecordHeader& header = {});
MassTrajectory read_trajectory(const std::string& text, const std::string& source = "<trajectory>");
void save_trajectory(const std::filesystem::path& path, const MassTrajectory& traj,
                     const RecordHeader& header = {});
MassTrajectory load_trajectory(const std::filesystem::path& path);

// ---- experiment reports: CSV grid with a '#' header block, JSON summary

std::string report_csv(const ExperimentReport& report);
std::string report_summary_json(const ExperimentReport& report);
ExperimentReport read_report_summary(const std::string& text, const std::string& source = "<report>");
// Writes <dir>/<experiment_id>[_suffix].csv and .json; returns the two paths.
std::pair<std::filesystem::path, std::filesystem::path> save_report(
    const std::filesystem::path& dir, const ExperimentReport& report, const std::string& suffix = "");

// ---- calibration tables (CSV: angle_deg,pressure_kpa,torque_nm)

std::string write_calibration_table(const CalibrationTable& table);
CalibrationTable read_calibration_table(const std::string& text,
                                        const std::string& source = "<table>");
CalibrationTable load_calibration_table(const std::filesystem::path& path);

// ---- telemetry frames, shared by the wire protocol and simulation traces

struct KapandjiStatus {
  std::array<double, 10> distance{};
  std::array<bool, 10> reached{};
};
KapandjiStatus kapandji_status(const HandModel& model, const HandPose& pose);

struct TelemetryFrame {
  std::uint64_t tick = 0;
  double time = 0.0;
  std::string mode;
  PerChannel<double> mass{};       // plant, kg
  PerChannel<double> estimate{};   // controller, kg
  PerChannel<double> setpoint{};   // kg
  PerChannel<double> pressure{};   // measured gauge, Pa
  PerChannel<double> joint{};      // rad
  PerChannel<bool> recalibrating{};
  std::array<Eigen::Isometry3d, kDigitCount> tips;
  KapandjiStatus kapandji;
  int clients = 0;
  std::optional<std::uint64_t> operator_client;
  std::string replay_name;
  double replay_progress = 0.0;  // 0..1
};

TelemetryFrame telemetry_from_loop(const ControlLoop& loop, const std::string& mode);
nlohmann::json telemetry_to_json(const TelemetryFrame& frame);

// ---- session snapshot (JSON document)

struct SessionSnapshot {
  std::uint64_t tick = 0;
  PerChannel<double> true_mass{};
  PerChannel<double> estimated_mass{};
  PerChannel<double> setpoint{};
  PostureLibrary library;
  std::string config_digest;
};

std::string write_session(const SessionSnapshot& snap);
SessionSnapshot read_session(const std::string& text, const std::string& source = "<session>");
// Write to a temporary file then rename over `path`.
void save_session(const std::filesystem::path& path, const SessionSnapshot& snap);
SessionSnapshot load_session(const std::filesystem::path& path);

std::string posture_kind_name(PostureKind kind);
PostureKind posture_kind_from_name(const std::string& name);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace pneumahand
