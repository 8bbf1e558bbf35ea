#include "pneumahand/records.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pneumahand/errors.hpp"

namespace pneumahand {

using json = nlohmann::json;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string at(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line);
}

int major_of(const std::string& version) {
  int major = -1;
  const auto head = version.substr(0, version.find('.'));
  auto res = std::from_chars(head.data(), head.data() + head.size(), major);
  if (res.ec != std::errc() || res.ptr != head.data() + head.size() || head.empty()) return -1;
  return major;
}

json header_json(const RecordHeader& h, const std::string& format) {
  return {{"format", format},
          {"version", h.version.empty() ? kRecordsVersion : h.version},
          {"config_digest", h.config_digest},
          {"seed", h.seed}};
}

template <class T>
json per_channel(const PerChannel<T>& a) {
  json out = json::array();
  for (const auto& v : a) out.push_back(v);
  return out;
}

PerChannel<double> channel_array(const json& j, const std::string& where, const char* what) {
  if (!j.is_array() || j.size() != kChannelCount)
    throw FormatError(where, std::string(what) + " must hold " + std::to_string(kChannelCount) + " numbers");
  PerChannel<double> out{};
  for (std::size_t i = 0; i < kChannelCount; ++i) {
    if (!j[i].is_number()) throw FormatError(where, std::string(what) + " must hold numbers");
    out[i] = j[i].get<double>();
  }
  return out;
}

json parse_line(const std::string& line, const std::string& where) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(where, std::string("malformed JSON: ") + e.what());
  }
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

double parse_double(const std::string& s, const std::string& where, const std::string& what) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && *b == ' ') ++b;
  while (e > b && e[-1] == ' ') --e;
  auto res = std::from_chars(b, e, v);
  if (b == e || res.ec != std::errc() || res.ptr != e)
    throw FormatError(where, what + " is not a number: '" + s + "'");
  return v;
}

json trajectory_body(const MassTrajectory& t) {
  json samples = json::array();
  for (const auto& s : t.samples) {
    json row = json::array({s.t});
    for (double m : s.mass) row.push_back(m);
    samples.push_back(std::move(row));
  }
  return samples;
}

MassTrajectory trajectory_from_json(const json& j, const std::string& where) {
  MassTrajectory t;
  try {
    t.name = j.at("name").get<std::string>();
    if (j.contains("metadata")) t.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
    for (const auto& row : j.at("samples")) {
      if (!row.is_array() || row.size() != kChannelCount + 1)
        throw FormatError(where, "entry '" + t.name + "': sample must be [t, 16 masses]");
      MassSample s;
      s.t = row[0].get<double>();
      for (std::size_t i = 0; i < kChannelCount; ++i) s.mass[i] = row[i + 1].get<double>();
      t.samples.push_back(s);
    }
  } catch (const json::exception& e) {
    throw FormatError(where, std::string("bad trajectory entry: ") + e.what());
  }
  return t;
}

}  // namespace

void check_header(const json& header, const std::string& expected_format, const std::string& where) {
  if (!header.is_object() || !header.contains("format") || !header["format"].is_string())
    throw FormatError(where, "missing format header");
  if (header["format"] != expected_format)
    throw FormatError(where, "expected format '" + expected_format + "', got '" +
                                 header["format"].get<std::string>() + "'");
  if (!header.contains("version") || !header["version"].is_string())
    throw FormatError(where, "missing version");
  const auto version = header["version"].get<std::string>();
  if (major_of(version) != kRecordsMajorVersion)
    throw FormatError(where, "unsupported " + expected_format + " version '" + version + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string(), "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(path.string(), "cannot write file");
  out << text;
  if (!out) throw FormatError(path.string(), "write failed");
}

// ---------------------------------------------------------------- trajectories

std::string write_trajectory(const MassTrajectory& traj, const RecordHeader& header) {
  json h = header_json(header, kTrajectoryFormat);
  h["name"] = traj.name;
  h["metadata"] = traj.metadata;
  json channels = json::array();
  for (auto ch : kAllChannels) channels.push_back(channel_name(ch));
  h["channels"] = channels;
  std::string out = h.dump() + "\n";
  for (const auto& s : traj.samples) {
    json row = {{"t", s.t}, {"mass", per_channel(s.mass)}};
    out += row.dump() + "\n";
  }
  return out;
}

MassTrajectory read_trajectory(const std::string& text, const std::string& source) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw FormatError(at(source, 1), "empty trajectory file");
  const json h = parse_line(lines[0], at(source, 1));
  check_header(h, kTrajectoryFormat, at(source, 1));
  MassTrajectory t;
  try {
    t.name = h.at("name").get<std::string>();
    if (h.contains("metadata")) t.metadata = h["metadata"].get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw FormatError(at(source, 1), std::string("bad header: ") + e.what());
  }
  if (h.contains("channels")) {
    const auto& ch = h["channels"];
    bool ok = ch.is_array() && ch.size() == kChannelCount;
    for (std::size_t i = 0; ok && i < kChannelCount; ++i)
      ok = ch[i].is_string() && ch[i].get<std::string>() == channel_name(kAllChannels[i]);
    if (!ok) throw FormatError(at(source, 1), "channel list does not match the 16-channel map");
  }
  double prev = -INFINITY;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto where = at(source, i + 1);
    const json row = parse_line(lines[i], where);
    if (!row.is_object() || !row.contains("t") || !row["t"].is_number() || !row.contains("mass"))
      throw FormatError(where, "sample needs 't' and 'mass'");
    MassSample s;
    s.t = row["t"].get<double>();
    s.mass = channel_array(row["mass"], where, "mass");
    if (!(s.t > prev))
      throw FormatError(where, "entry '" + t.name + "': timestamps must strictly increase");
    prev = s.t;
    t.samples.push_back(s);
  }
  try {
    t.validate();
  } catch (const FormatError& e) {
    throw FormatError(source, e.what());
  } catch (const DomainError& e) {
    throw FormatError(source, std::string("entry '") + t.name + "': " + e.what());
  }
  return t;
}

void save_trajectory(const std::filesystem::path& path, const MassTrajectory& traj,
                     const RecordHeader& header) {
  write_text_file(path, write_trajectory(traj, header));
}

MassTrajectory load_trajectory(const std::filesystem::path& path) {
  return read_trajectory(read_text_file(path), path.string());
}

// ---------------------------------------------------------------- reports

std::string report_csv(const ExperimentReport& r) {
  std::ostringstream out;
  out << "# format: " << kReportFormat << "\n";
  out << "# version: " << kRecordsVersion << "\n";
  out << "# experiment: " << r.experiment_id << "\n";
  out << "# seed: " << r.seed << "\n";
  out << "# config_digest: " << r.config_digest << "\n";
  out << "# repetitions: " << r.repetitions << "\n";
  bool first = true;
  for (const auto& k : r.key_columns) {
    out << (first ? "" : ",") << k;
    first = false;
  }
  for (const auto& m : r.metric_columns) out << (first ? "" : ",") << m << "_mean," << m << "_std", first = false;
  out << "\n";
  for (const auto& row : r.rows) {
    first = true;
    for (double k : row.keys) {
      out << (first ? "" : ",") << num(k);
      first = false;
    }
    for (const auto& s : row.metrics) {
      out << (first ? "" : ",") << num(s.mean) << "," << num(s.std);
      first = false;
    }
    out << "\n";
  }
  return out.str();
}

std::string report_summary_json(const ExperimentReport& r) {
  RecordHeader h{kReportFormat, kRecordsVersion, r.config_digest, r.seed};
  json j = header_json(h, kReportFormat);
  j["experiment"] = r.experiment_id;
  j["repetitions"] = r.repetitions;
  j["passed"] = r.passed();
  json verdicts = json::array();
  for (const auto& v : r.verdicts)
    verdicts.push_back({{"name", v.name}, {"value", v.value}, {"anchor", v.anchor},
                        {"tolerance", v.tolerance}, {"pass", v.pass}, {"note", v.note}});
  j["verdicts"] = verdicts;
  json scalars = json::array();
  for (const auto& [k, v] : r.scalars) scalars.push_back({k, v});
  j["scalars"] = scalars;
  json notes = json::array();
  for (const auto& [k, v] : r.notes) notes.push_back({k, v});
  j["notes"] = notes;
  j["key_columns"] = r.key_columns;
  j["metric_columns"] = r.metric_columns;
  json rows = json::array();
  for (const auto& row : r.rows) {
    json mean = json::array(), sd = json::array();
    for (const auto& s : row.metrics) {
      mean.push_back(s.mean);
      sd.push_back(s.std);
    }
    rows.push_back({{"keys", row.keys}, {"mean", mean}, {"std", sd}});
  }
  j["rows"] = rows;
  return j.dump(2) + "\n";
}

ExperimentReport read_report_summary(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(source, std::string("malformed JSON: ") + e.what());
  }
  check_header(j, kReportFormat, source);
  ExperimentReport r;
  try {
    r.experiment_id = j.at("experiment").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_digest = j.at("config_digest").get<std::string>();
    r.repetitions = j.at("repetitions").get<int>();
    for (const auto& v : j.at("verdicts"))
      r.verdicts.push_back({v.at("name"), v.at("value"), v.at("anchor"), v.at("tolerance"),
                            v.at("pass"), v.at("note")});
    for (const auto& s : j.at("scalars"))
      r.scalars.emplace_back(s.at(0).get<std::string>(), s.at(1).is_null() ? NAN : s.at(1).get<double>());
    for (const auto& n : j.at("notes")) r.notes.emplace_back(n.at(0), n.at(1));
    r.key_columns = j.at("key_columns").get<std::vector<std::string>>();
    r.metric_columns = j.at("metric_columns").get<std::vector<std::string>>();
    for (const auto& row : j.at("rows")) {
      ReportRow rr;
      rr.keys = row.at("keys").get<std::vector<double>>();
      const auto& mean = row.at("mean");
      const auto& sd = row.at("std");
      for (std::size_t i = 0; i < mean.size(); ++i) rr.metrics.push_back({mean[i], sd.at(i)});
      r.rows.push_back(std::move(rr));
    }
  } catch (const json::exception& e) {
    throw FormatError(source, std::string("bad report summary: ") + e.what());
  }
  return r;
}

std::pair<std::filesystem::path, std::filesystem::path> save_report(const std::filesystem::path& dir,
                                                                    const ExperimentReport& report,
                                                                    const std::string& suffix) {
  const std::string stem = report.experiment_id + (suffix.empty() ? "" : "_" + suffix);
  const auto csv = dir / (stem + ".csv");
  const auto js = dir / (stem + ".json");
  write_text_file(csv, report_csv(report));
  write_text_file(js, report_summary_json(report));
  return {csv, js};
}

// ---------------------------------------------------------------- calibration tables

std::string write_calibration_table(const CalibrationTable& table) {
  std::ostringstream out;
  out << "# format: " << kCalibrationFormat << "\n";
  out << "# version: " << kRecordsVersion << "\n";
  if (!table.provenance.empty()) out << "# provenance: " << table.provenance << "\n";
  out << "angle_deg,pressure_kpa,torque_nm\n";
  for (const auto& s : table.samples)
    out << num(rad2deg(s.angle)) << "," << num(s.pressure / 1e3) << "," << num(s.torque) << "\n";
  return out.str();
}

CalibrationTable read_calibration_table(const std::string& text, const std::string& source) {
  const auto lines = split_lines(text);
  json header = json::object();
  CalibrationTable table;
  bool have_columns = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto where = at(source, i + 1);
    const auto& line = lines[i];
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      const auto key = trim(line.substr(1, colon - 1));
      const auto value = trim(line.substr(colon + 1));
      if (key == "provenance") table.provenance = value;
      else header[key] = value;
      continue;
    }
    if (!have_columns) {
      check_header(header, kCalibrationFormat, where);
      if (line != "angle_deg,pressure_kpa,torque_nm")
        throw FormatError(where, "expected columns angle_deg,pressure_kpa,torque_nm");
      have_columns = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (cells.size() != 3) throw FormatError(where, "expected 3 columns, got " + std::to_string(cells.size()));
    const double a = parse_double(cells[0], where, "angle_deg");
    const double p = parse_double(cells[1], where, "pressure_kpa");
    const double t = parse_double(cells[2], where, "torque_nm");
    if (!std::isfinite(a) || !std::isfinite(p) || !std::isfinite(t))
      throw FormatError(where, "values must be finite");
    table.samples.push_back({deg2rad(a), p * 1e3, t});
  }
  if (!have_columns) {
    check_header(header, kCalibrationFormat, at(source, lines.size()));
    throw FormatError(at(source, lines.size()), "missing column header");
  }
  return table;
}

CalibrationTable load_calibration_table(const std::filesystem::path& path) {
  return read_calibration_table(read_text_file(path), path.string());
}

// ---------------------------------------------------------------- telemetry

KapandjiStatus kapandji_status(const HandModel& model, const HandPose& pose) {
  KapandjiStatus s;
  const Eigen::Vector3d tip = pose.tip(Digit::Thumb).translation();
  for (std::size_t i = 0; i < 10; ++i) {
    s.distance[i] = (tip - pose.kapandji[i]).norm();
    s.reached[i] = s.distance[i] <= model.contact_tolerance;
  }
  return s;
}

TelemetryFrame telemetry_from_loop(const ControlLoop& loop, const std::string& mode) {
  TelemetryFrame f;
  f.tick = loop.tick();
  f.time = loop.time();
  f.mode = mode;
  f.mass = loop.true_masses();
  f.estimate = loop.estimator().estimated_mass;
  f.setpoint = loop.setpoints();
  const double atm = loop.config().plant.atmosphere.pressure;
  for (std::size_t i = 0; i < kChannelCount; ++i) {
    f.pressure[i] = loop.measured_pressure()[i] - atm;
    f.recalibrating[i] = loop.recalibrating(kAllChannels[i]);
  }
  f.joint = loop.hand().pose.joints;
  f.tips = loop.hand().pose.tips;
  f.kapandji = kapandji_status(loop.config().hand, loop.hand().pose);
  return f;
}

json telemetry_to_json(const TelemetryFrame& f) {
  json tips = json::array();
  for (std::size_t d = 0; d < kDigitCount; ++d) {
    const auto& t = f.tips[d];
    const Eigen::Quaterniond q(t.rotation());
    const Eigen::Vector3d p = t.translation();
    tips.push_back({{"digit", digit_name(static_cast<Digit>(d))},
                    {"position", {p.x(), p.y(), p.z()}},
                    {"quaternion", {q.w(), q.x(), q.y(), q.z()}}});
  }
  json kap = {{"distance_m", f.kapandji.distance}, {"reached", f.kapandji.reached}};
  json j = {{"type", "telemetry"},
            {"version", kRecordsVersion},
            {"tick", f.tick},
            {"time", f.time},
            {"mode", f.mode},
            {"mass", per_channel(f.mass)},
            {"estimate", per_channel(f.estimate)},
            {"setpoint", per_channel(f.setpoint)},
            {"pressure", per_channel(f.pressure)},
            {"joint", per_channel(f.joint)},
            {"recalibrating", per_channel(f.recalibrating)},
            {"tips", tips},
            {"kapandji", kap},
            {"clients", f.clients}};
  j["operator"] = f.operator_client ? json(*f.operator_client) : json(nullptr);
  if (!f.replay_name.empty()) j["replay"] = {{"name", f.replay_name}, {"progress", f.replay_progress}};
  return j;
}

// ---------------------------------------------------------------- sessions

std::string posture_kind_name(PostureKind kind) {
  switch (kind) {
    case PostureKind::Taxonomy: return "taxonomy";
    case PostureKind::Kapandji: return "kapandji";
    case PostureKind::InHandRotation: return "inhand";
    case PostureKind::Recorded: return "recorded";
  }
  return "recorded";
}

PostureKind posture_kind_from_name(const std::string& name) {
  for (auto k : {PostureKind::Taxonomy, PostureKind::Kapandji, PostureKind::InHandRotation,
                 PostureKind::Recorded})
    if (posture_kind_name(k) == name) return k;
  throw FormatError("unknown posture kind '" + name + "'");
}

std::string write_session(const SessionSnapshot& s) {
  RecordHeader h{kSessionFormat, kRecordsVersion, s.config_digest, 0};
  json j = header_json(h, kSessionFormat);
  j.erase("seed");
  j["tick"] = s.tick;
  j["true_mass"] = per_channel(s.true_mass);
  j["estimated_mass"] = per_channel(s.estimated_mass);
  j["setpoint"] = per_channel(s.setpoint);
  json lib = json::array();
  for (const auto& e : s.library.entries)
    lib.push_back({{"kind", posture_kind_name(e.kind)},
                   {"name", e.trajectory.name},
                   {"metadata", e.trajectory.metadata},
                   {"samples", trajectory_body(e.trajectory)}});
  j["library"] = lib;
  return j.dump() + "\n";
}

SessionSnapshot read_session(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(source, std::string("malformed JSON: ") + e.what());
  }
  check_header(j, kSessionFormat, source);
  SessionSnapshot s;
  try {
    s.config_digest = j.at("config_digest").get<std::string>();
    s.tick = j.at("tick").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw FormatError(source, std::string("bad session: ") + e.what());
  }
  s.true_mass = channel_array(j.value("true_mass", json()), source, "true_mass");
  s.estimated_mass = channel_array(j.value("estimated_mass", json()), source, "estimated_mass");
  s.setpoint = channel_array(j.value("setpoint", json()), source, "setpoint");
  if (!j.contains("library") || !j["library"].is_array()) throw FormatError(source, "missing library");
  for (const auto& e : j["library"]) {
    LibraryEntry entry{PostureKind::Recorded, trajectory_from_json(e, source)};
    entry.kind = posture_kind_from_name(e.value("kind", std::string("recorded")));
    try {
      entry.trajectory.validate();
    } catch (const std::exception& ex) {
      throw FormatError(source, std::string("entry '") + entry.trajectory.name + "': " + ex.what());
    }
    s.library.entries.push_back(std::move(entry));
  }
  return s;
}

void save_session(const std::filesystem::path& path, const SessionSnapshot& snap) {
  auto tmp = path;
  tmp += ".tmp";
  write_text_file(tmp, write_session(snap));
  std::filesystem::rename(tmp, path);
}

SessionSnapshot load_session(const std::filesystem::path& path) {
  return read_session(read_text_file(path), path.string());
}

}  // namespace pneumahand
