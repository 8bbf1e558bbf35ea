#include "pneumahand/session.hpp"

#include <algorithm>
#include <set>
#include <chrono>
#include <cmath>

#include "pneumahand/errors.hpp"

namespace pneumahand {

using json = nlohmann::json;

namespace {

// Command failure carrying a wire error code.
struct CommandError : std::runtime_error {
  CommandError(std::string c, const std::string& what) : std::runtime_error(what), code(std::move(c)) {}
  std::string code;
};

ChannelId channel_arg(const json& args) {
  if (!args.contains("channel")) throw CommandError("invalid_argument", "missing 'channel'");
  const auto& c = args["channel"];
  std::optional<ChannelId> ch;
  if (c.is_number_integer()) ch = channel_from_code(c.get<int>());
  else if (c.is_string()) ch = channel_from_name(c.get<std::string>());
  else throw CommandError("invalid_argument", "'channel' must be a name or integer code");
  if (!ch) throw CommandError("invalid_argument", "unknown channel " + c.dump());
  return *ch;
}

double number_arg(const json& args, const char* key, std::optional<double> fallback = {}) {
  if (!args.contains(key)) {
    if (fallback) return *fallback;
    throw CommandError("invalid_argument", std::string("missing '") + key + "'");
  }
  if (!args[key].is_number()) throw CommandError("invalid_argument", std::string("'") + key + "' must be a number");
  return args[key].get<double>();
}

std::string string_arg(const json& args, const char* key) {
  if (!args.contains(key) || !args[key].is_string())
    throw CommandError("invalid_argument", std::string("'") + key + "' must be a string");
  return args[key].get<std::string>();
}

}  // namespace

std::string_view session_mode_name(SessionMode m) {
  switch (m) {
    case SessionMode::Idle: return "idle";
    case SessionMode::Live: return "live";
    case SessionMode::Recording: return "recording";
    case SessionMode::Replaying: return "replaying";
    case SessionMode::Experiment: return "experiment";
  }
  return "idle";
}

// ---------------------------------------------------------------- queue

void CommandQueue::push(Inbound::Kind kind, ClientId client, std::string text) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    items_.push_back({kind, client, std::move(text), next_seq_++});
  }
  cv_.notify_one();
}

std::vector<Inbound> CommandQueue::drain() {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<Inbound> out(std::make_move_iterator(items_.begin()), std::make_move_iterator(items_.end()));
  items_.clear();
  return out;
}

bool CommandQueue::wait_for(double seconds) {
  std::unique_lock<std::mutex> lock(mu_);
  return cv_.wait_for(lock, std::chrono::duration<double>(seconds), [&] { return !items_.empty(); });
}

// ---------------------------------------------------------------- session

Session::Session(AppConfig cfg, std::optional<PostureLibrary> library)
    : cfg_(std::move(cfg)),
      loop_(cfg_.rig),
      library_(library ? std::move(*library) : default_posture_library(cfg_.rig.hand, cfg_.rig.gas())),
      decimation_(std::max<std::uint64_t>(
          1, static_cast<std::uint64_t>(std::llround(cfg_.rig.controller.tick_rate / cfg_.telemetry_rate)))) {}

void Session::send(std::optional<ClientId> to, const json& msg) { outbox_.push_back({to, msg.dump()}); }

std::vector<Outbound> Session::take_outbox() {
  std::vector<Outbound> out;
  out.swap(outbox_);
  return out;
}

void Session::emit_telemetry() {
  auto frame = telemetry_from_loop(loop_, std::string(session_mode_name(mode_)));
  frame.clients = client_count();
  frame.operator_client = operator_;
  if (replay_) {
    frame.replay_name = replay_->trajectory().name;
    const double elapsed = static_cast<double>(loop_.tick() - replay_start_) * cfg_.rig.controller.tick();
    frame.replay_progress = replay_->duration() > 0.0 ? std::min(1.0, elapsed / replay_->duration()) : 1.0;
  }
  send(std::nullopt, telemetry_to_json(frame));
  last_telemetry_tick_ = loop_.tick();
  telemetry_sent_ = true;
}

void Session::set_mode(SessionMode m) {
  if (m == mode_) return;
  mode_ = m;
  emit_telemetry();
}

void Session::tick(const std::vector<Inbound>& events) {
  for (const auto& e : events) apply(e);
  step();
}

void Session::apply(const Inbound& e) {
  switch (e.kind) {
    case Inbound::Kind::Connect: {
      clients_.push_back(e.client);
      json names = json::array();
      for (auto ch : kAllChannels) names.push_back(channel_name(ch));
      json lib = json::array();
      for (const auto& entry : library_.entries) lib.push_back(entry.trajectory.name);
      send(e.client, {{"type", "hello"},
                      {"version", kRecordsVersion},
                      {"format", kWireFormat},
                      {"client", e.client},
                      {"channels", names},
                      {"tick_rate_hz", cfg_.rig.controller.tick_rate},
                      {"telemetry_rate_hz", cfg_.telemetry_rate},
                      {"config_digest", config_digest(cfg_)},
                      {"library", lib}});
      break;
    }
    case Inbound::Kind::Disconnect:
      clients_.erase(std::remove(clients_.begin(), clients_.end(), e.client), clients_.end());
      if (operator_ == e.client) operator_.reset();
      break;
    case Inbound::Kind::Message:
      handle_message(e.client, e.text);
      break;
  }
}

void Session::handle_message(ClientId client, const std::string& text) {
  json msg;
  json id = nullptr;
  auto error = [&](const std::string& code, const std::string& detail) {
    send(client, {{"type", "error"}, {"version", kRecordsVersion}, {"id", id}, {"code", code}, {"detail", detail}});
  };
  try {
    msg = json::parse(text);
  } catch (const json::parse_error& e) {
    error("malformed", std::string("message is not valid JSON: ") + e.what());
    return;
  }
  if (!msg.is_object()) return error("malformed", "message must be a JSON object");
  if (msg.contains("id")) id = msg["id"];
  if (msg.contains("version")) {
    const auto& v = msg["version"];
    if (!v.is_string() || v.get<std::string>().substr(0, v.get<std::string>().find('.')) !=
                              std::to_string(kRecordsMajorVersion))
      return error("unsupported_version", "unsupported message version " + v.dump());
  }
  if (msg.value("type", std::string()) != "command") return error("malformed", "expected type 'command'");
  if (!msg.contains("command") || !msg["command"].is_string()) return error("malformed", "missing 'command'");
  const auto command = msg["command"].get<std::string>();
  const json args = msg.contains("args") ? msg["args"] : json::object();
  if (!args.is_object()) return error("malformed", "'args' must be an object");
  try {
    json detail = run_command(client, command, args);
    send(client, {{"type", "ack"},
                  {"version", kRecordsVersion},
                  {"id", id},
                  {"command", command},
                  {"status", "ok"},
                  {"tick", loop_.tick()},
                  {"detail", detail}});
  } catch (const CommandError& e) {
    error(e.code, e.what());
  } catch (const BusyError& e) {
    error("busy", e.what());
  } catch (const HardwareFault& e) {
    error("hardware_fault", e.what());
  } catch (const DomainError& e) {
    error("invalid_argument", e.what());
  } catch (const std::exception& e) {
    error("internal", e.what());
  }
}

void Session::require_operator(ClientId client) const {
  if (operator_ != client)
    throw CommandError("not_operator", operator_ ? "operator role is held by client " + std::to_string(*operator_)
                                                 : "claim the operator role first");
}

json Session::run_command(ClientId client, const std::string& command, const json& args) {
  if (command == "claim_operator") {
    if (operator_ && *operator_ != client)
      throw CommandError("role_conflict", "operator role is held by client " + std::to_string(*operator_));
    operator_ = client;
    return {{"operator", client}};
  }
  if (command == "release_operator") {
    if (operator_ != client) throw CommandError("not_operator", "client does not hold the operator role");
    operator_.reset();
    return json::object();
  }
  if (command == "list_library") {
    json out = json::array();
    for (const auto& e : library_.entries)
      out.push_back({{"name", e.trajectory.name},
                     {"kind", posture_kind_name(e.kind)},
                     {"duration_s", e.trajectory.duration()},
                     {"samples", e.trajectory.samples.size()}});
    return {{"entries", out}};
  }

  static const std::set<std::string> operator_commands = {
      "set_setpoint", "start_record", "stop_record", "replay", "stop_replay", "recalibrate", "run_experiment"};
  if (!operator_commands.count(command))
    throw CommandError("unknown_command", "unknown command '" + command + "'");
  require_operator(client);

  if (command == "set_setpoint") {
    if (mode_ == SessionMode::Replaying) throw BusyError("session is replaying");
    const auto ch = channel_arg(args);
    loop_.set_setpoint(ch, number_arg(args, "mass_kg"));
    if (mode_ == SessionMode::Idle) set_mode(SessionMode::Live);
    return {{"channel", channel_name(ch)}, {"mass_kg", loop_.setpoints()[index(ch)]}};
  }
  if (command == "start_record") {
    if (mode_ == SessionMode::Recording || mode_ == SessionMode::Replaying)
      throw BusyError(std::string("session is ") + std::string(session_mode_name(mode_)));
    const auto name = string_arg(args, "name");
    if (name.empty()) throw CommandError("invalid_argument", "'name' must not be empty");
    if (library_.find(name)) throw CommandError("name_exists", "library already has '" + name + "'");
    recorder_.emplace(name);
    record_start_ = loop_.tick();
    recorder_->sample(0.0, loop_.setpoints());
    set_mode(SessionMode::Recording);
    return {{"name", name}};
  }
  if (command == "stop_record") {
    if (mode_ != SessionMode::Recording || !recorder_)
      throw CommandError("not_recording", "no recording in progress");
    auto traj = recorder_->finish({{"author", "client " + std::to_string(client)},
                                   {"start_tick", std::to_string(record_start_)},
                                   {"config_digest", config_digest(cfg_)}});
    recorder_.reset();
    const json detail = {{"name", traj.name}, {"samples", traj.samples.size()}, {"duration_s", traj.duration()}};
    library_.entries.push_back({PostureKind::Recorded, std::move(traj)});
    dirty_library_ = true;
    set_mode(SessionMode::Live);
    persist();
    return detail;
  }
  if (command == "replay") {
    if (mode_ == SessionMode::Recording || mode_ == SessionMode::Replaying)
      throw BusyError(std::string("session is ") + std::string(session_mode_name(mode_)));
    const auto name = string_arg(args, "name");
    const auto* entry = library_.find(name);
    if (!entry) throw CommandError("not_found", "no library entry '" + name + "'");
    const double scale = number_arg(args, "scale", 1.0);
    if (!(scale > 0.0) || !std::isfinite(scale)) throw CommandError("invalid_argument", "'scale' must be positive");
    replay_.emplace(entry->trajectory, scale);
    replay_start_ = loop_.tick();
    loop_.set_setpoints(replay_->setpoint_at(0.0));
    set_mode(SessionMode::Replaying);
    return {{"name", name}, {"scale", scale}, {"duration_s", replay_->duration()}};
  }
  if (command == "stop_replay") {
    if (mode_ != SessionMode::Replaying) throw CommandError("not_replaying", "no replay in progress");
    replay_.reset();
    set_mode(SessionMode::Live);
    return json::object();
  }
  if (command == "recalibrate") {
    const auto ch = channel_arg(args);
    loop_.start_recalibration(ch);
    return {{"channel", channel_name(ch)}};
  }
  if (command == "run_experiment") {
    if (mode_ == SessionMode::Recording || mode_ == SessionMode::Replaying)
      throw BusyError(std::string("session is ") + std::string(session_mode_name(mode_)));
    const auto which = string_arg(args, "experiment");
    std::optional<std::uint64_t> seed;
    if (args.contains("seed")) {
      if (!args["seed"].is_number_unsigned()) throw CommandError("invalid_argument", "'seed' must be a non-negative integer");
      seed = args["seed"].get<std::uint64_t>();
    }
    const auto ctx = make_context(cfg_, seed);
    const auto previous = mode_;
    set_mode(SessionMode::Experiment);
    ExperimentReport report;
    try {
      if (which == "finger") {
        report = run_finger_characterization(ctx);
      } else if (which == "bellow") {
        const auto ch = args.contains("channel") ? channel_arg(args) : ChannelId::ThumbProximal;
        report = run_bellow_characterization(ctx, ch);
      } else if (which == "kapandji") {
        report = run_kapandji(ctx, library_).report;
      } else if (which == "pullout") {
        const auto* entry = library_.find(pullout_posture_name());
        if (!entry) throw CommandError("not_found", "pull-out posture missing from library");
        report = run_pullout(ctx, entry->trajectory);
      } else if (which == "library") {
        report = validate_library(ctx, library_).report;
      } else {
        throw CommandError("invalid_argument", "unknown experiment '" + which + "'");
      }
    } catch (...) {
      set_mode(previous);
      throw;
    }
    set_mode(previous);
    return json::parse(report_summary_json(report));
  }
  throw CommandError("unknown_command", "unknown command '" + command + "'");
}

void Session::step() {
  if (replay_) {
    const double elapsed = static_cast<double>(loop_.tick() - replay_start_) * cfg_.rig.controller.tick();
    loop_.set_setpoints(replay_->setpoint_at(elapsed));
    if (replay_->finished(elapsed)) {
      replay_.reset();
      set_mode(SessionMode::Live);
    }
  }
  if (recorder_) {
    const double elapsed = static_cast<double>(loop_.tick() - record_start_) * cfg_.rig.controller.tick();
    recorder_->sample(elapsed, loop_.setpoints());
  }
  const auto events_before = loop_.calibration_events().size();
  try {
    loop_.step();
  } catch (const HardwareFault& e) {
    send(std::nullopt, {{"type", "event"}, {"version", kRecordsVersion}, {"event", "hardware_fault"},
                        {"tick", loop_.tick()}, {"detail", e.what()}});
  }
  const auto& events = loop_.calibration_events();
  for (auto i = events_before; i < events.size(); ++i)
    send(std::nullopt, {{"type", "event"},
                        {"version", kRecordsVersion},
                        {"event", "recalibrated"},
                        {"tick", events[i].tick},
                        {"channel", channel_name(events[i].channel)},
                        {"estimate_before", events[i].estimate_before},
                        {"estimate_after", events[i].estimate_after}});
  if (!telemetry_sent_ || loop_.tick() - last_telemetry_tick_ >= decimation_) emit_telemetry();
  const auto per_second = static_cast<std::uint64_t>(std::llround(cfg_.rig.controller.tick_rate));
  if (loop_.tick() % per_second == 0) persist();
}

SessionSnapshot Session::snapshot() const {
  SessionSnapshot s;
  s.tick = loop_.tick();
  s.true_mass = loop_.true_masses();
  s.estimated_mass = loop_.estimator().estimated_mass;
  s.setpoint = loop_.setpoints();
  s.library = library_;
  s.config_digest = config_digest(cfg_);
  return s;
}

void Session::restore(const SessionSnapshot& snap) {
  if (snap.config_digest != config_digest(cfg_))
    throw ValidationError("session file was written under config " + snap.config_digest +
                          ", current config is " + config_digest(cfg_));
  loop_.restore(snap.tick, snap.true_mass, snap.estimated_mass, snap.setpoint);
  library_ = snap.library;
  mode_ = SessionMode::Idle;
  recorder_.reset();
  replay_.reset();
  telemetry_sent_ = false;
}

void Session::persist() const {
  if (!cfg_.session_file.empty()) save_session(cfg_.session_file, snapshot());
}

}  // namespace pneumahand
