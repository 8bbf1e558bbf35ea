#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <map>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "pneumahand/config.hpp"
#include "pneumahand/errors.hpp"
#include "pneumahand/records.hpp"
#include "pneumahand/server.hpp"
#include "pneumahand/session.hpp"

using namespace pneumahand;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("pneumahand_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string command(const std::string& cmd, json args = json::object(), json id = 1) {
  return json{{"type", "command"}, {"version", "1.0"}, {"id", id}, {"command", cmd}, {"args", args}}.dump();
}

std::vector<json> replies(Session& s, std::optional<ClientId> to) {
  std::vector<json> out;
  for (const auto& o : s.take_outbox())
    if (!to || o.client == to) out.push_back(json::parse(o.text));
  return out;
}

// Sends one message and returns the single ack/error addressed to `client`.
json call(Session& s, ClientId client, const std::string& text) {
  s.apply({Inbound::Kind::Message, client, text, 0});
  json reply;
  int n = 0;
  for (const auto& o : s.take_outbox()) {
    const auto j = json::parse(o.text);
    if (o.client == client && (j["type"] == "ack" || j["type"] == "error")) {
      reply = j;
      ++n;
    }
  }
  CHECK(n == 1);
  return reply;
}

std::vector<json> telemetry(const std::vector<Outbound>& out) {
  std::vector<json> frames;
  for (const auto& o : out) {
    auto j = json::parse(o.text);
    if (j["type"] == "telemetry") frames.push_back(std::move(j));
  }
  return frames;
}

Session connected_session(AppConfig cfg = default_config()) {
  Session s(std::move(cfg));
  s.apply({Inbound::Kind::Connect, 1, {}, 0});
  s.apply({Inbound::Kind::Connect, 2, {}, 1});
  s.take_outbox();
  return s;
}

}  // namespace

// ---------------------------------------------------------------- config

TEST_CASE("config dump parses back to the same dump") {
  const auto cfg = default_config();
  const auto text = dump_config(cfg);
  CHECK(dump_config(parse_config(text, "round.yaml")) == text);
  CHECK(config_digest(parse_config(text)) == config_digest(cfg));
  CHECK(config_digest(cfg).size() == 16);
}

TEST_CASE("shipped default config equals the built-in defaults") {
  const auto cfg = load_config(std::string(PNEUMAHAND_DATA_DIR) + "/default_config.yaml");
  CHECK(dump_config(cfg) == dump_config(default_config()));
}

TEST_CASE("config errors name the file and line") {
  const std::string text = "format: pneumahand-config\nversion: \"1.0\"\nhand:\n  bogus: 3\n";
  try {
    parse_config(text, "bad.yaml");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.where() == "bad.yaml:4");
    CHECK(std::string(e.what()).find("hand.bogus") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("format: pneumahand-config\nversion: \"2.0\"\n", "v2.yaml"), FormatError);
  CHECK_THROWS_AS(parse_config("format: pneumahand-config\nversion: \"1.0\"\ngas:\n  temperature_k: hot\n"), FormatError);
  CHECK_THROWS_AS(parse_config("format: pneumahand-config\nversion: \"1.0\"\ncontroller:\n  tick_rate_hz: 1000.0\n"), ValidationError);
}

TEST_CASE("partial configs override only the keys they set") {
  const auto cfg = parse_config("format: pneumahand-config\nversion: \"1.0\"\nsensor:\n  noise_seed: 12\n");
  CHECK(cfg.rig.sensor.noise_seed == 12);
  auto expected = default_config();
  expected.rig.sensor.noise_seed = 12;
  CHECK(dump_config(cfg) == dump_config(expected));
  CHECK(make_context(cfg, 99).seed == 99);
}

TEST_CASE("config path resolution prefers the explicit path over the environment") {
  ::unsetenv("PNEUMAHAND_CONFIG");
  CHECK_FALSE(resolve_config_path(""));
  ::setenv("PNEUMAHAND_CONFIG", "/tmp/from_env.yaml", 1);
  CHECK(resolve_config_path("").value() == "/tmp/from_env.yaml");
  CHECK(resolve_config_path("given.yaml").value() == "given.yaml");
  ::unsetenv("PNEUMAHAND_CONFIG");
}

// ---------------------------------------------------------------- files

TEST_CASE("trajectories round trip bit-exactly") {
  const auto cfg = default_config();
  const auto lib = default_posture_library(cfg.rig.hand, cfg.rig.gas());
  auto traj = lib.find("inhand_proximal_distal")->trajectory;
  traj.metadata = {{"author", "bench"}, {"created_at", "2026-01-01T00:00:00Z"}};
  const RecordHeader h{kTrajectoryFormat, kRecordsVersion, config_digest(cfg), 4};
  const auto text = write_trajectory(traj, h);
  const auto back = read_trajectory(text);
  CHECK(back.name == traj.name);
  CHECK(back.metadata == traj.metadata);
  REQUIRE(back.samples.size() == traj.samples.size());
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    CHECK(back.samples[k].t == traj.samples[k].t);
    CHECK(back.samples[k].mass == traj.samples[k].mass);
  }
  CHECK(write_trajectory(back, h) == text);
}

TEST_CASE("readers reject an unknown major version and corrupt timestamps") {
  MassTrajectory traj{"pinch", {{0.0, {}}, {0.5, {}}}, {}};
  auto text = write_trajectory(traj);
  const auto pos = text.find("\"1.0\"");
  REQUIRE(pos != std::string::npos);
  auto v2 = text;
  v2.replace(pos, 5, "\"2.0\"");
  CHECK_THROWS_AS(read_trajectory(v2), FormatError);

  traj.samples[1].t = 0.0;
  try {
    read_trajectory(write_trajectory(traj), "pinch.jsonl");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("pinch") != std::string::npos);
  }
}

TEST_CASE("report summary and CSV carry seed and digest") {
  const auto ctx = make_context(default_config(), 5);
  const auto r = run_finger_characterization(ctx, 2);
  const auto back = read_report_summary(report_summary_json(r));
  CHECK(back.experiment_id == r.experiment_id);
  CHECK(back.seed == 5);
  CHECK(back.config_digest == ctx.config_digest);
  REQUIRE(back.verdicts.size() == r.verdicts.size());
  for (std::size_t k = 0; k < r.verdicts.size(); ++k) {
    CHECK(back.verdicts[k].name == r.verdicts[k].name);
    CHECK(back.verdicts[k].value == r.verdicts[k].value);
    CHECK(back.verdicts[k].pass == r.verdicts[k].pass);
  }
  const auto csv = report_csv(r);
  CHECK(csv.rfind("# format: pneumahand-report", 0) == 0);
  CHECK(csv.find("# seed: 5") != std::string::npos);
  CHECK(csv.find(ctx.config_digest) != std::string::npos);

  const auto dir = scratch_dir("report");
  const auto [csv_path, json_path] = save_report(dir, r, "index");
  CHECK(csv_path.filename() == "finger_characterization_index.csv");
  CHECK(fs::exists(json_path));
}

TEST_CASE("calibration tables round trip and refit to the same torques") {
  const auto cfg = default_config();
  const auto& spec = cfg.rig.hand.bellow(ChannelId::ThumbMiddle).bellow;
  CalibrationTable t;
  t.provenance = "bench rig 2";
  for (double deg : {20.0, 40.0, 60.0, 80.0, 100.0})
    for (double kpa : {50.0, 100.0, 150.0, 200.0, 250.0})
      t.samples.push_back({deg2rad(deg), kpa * 1e3, bellow_torque(spec, kpa * 1e3, deg2rad(deg))});
  const auto text = write_calibration_table(t);
  CHECK(text.rfind("# format: pneumahand-calibration", 0) == 0);
  const auto back = read_calibration_table(text, "bench.csv");
  CHECK(back.provenance == t.provenance);
  REQUIRE(back.samples.size() == t.samples.size());
  for (std::size_t k = 0; k < t.samples.size(); ++k) {
    CHECK(back.samples[k].angle == doctest::Approx(t.samples[k].angle).epsilon(1e-14));
    CHECK(back.samples[k].torque == doctest::Approx(t.samples[k].torque).epsilon(1e-14));
  }

  auto fitted = cfg;
  fitted.rig.hand.bellow(ChannelId::ThumbMiddle).bellow.moment_arm_table = fit_moment_arm(back, spec);
  const auto fragment = dump_bellow_fragment(fitted, ChannelId::ThumbMiddle, "fitted");
  const auto merged = parse_config(fragment, "fragment.yaml");
  const auto& refit = merged.rig.hand.bellow(ChannelId::ThumbMiddle).bellow;
  for (const auto& s : t.samples)
    CHECK(std::abs(bellow_torque(refit, s.pressure, s.angle) - s.torque) < 1e-9);

  CHECK_THROWS_AS(read_calibration_table("# format: pneumahand-calibration\n# version: 2.0\n"
                                         "angle_deg,pressure_kpa,torque_nm\n20,50,1\n"),
                  FormatError);
  try {
    read_calibration_table("# format: pneumahand-calibration\n# version: 1.0\n"
                           "angle_deg,pressure_kpa,torque_nm\n20,fifty,1\n",
                           "t.csv");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.where() == "t.csv:4");
  }
}

TEST_CASE("session snapshots round trip") {
  Session s(default_config());
  for (int k = 0; k < 40; ++k) s.step();
  const auto snap = s.snapshot();
  const auto back = read_session(write_session(snap));
  CHECK(back.tick == snap.tick);
  CHECK(back.true_mass == snap.true_mass);
  CHECK(back.estimated_mass == snap.estimated_mass);
  CHECK(back.library.entries.size() == snap.library.entries.size());
  CHECK(back.config_digest == snap.config_digest);
}

// ---------------------------------------------------------------- session

TEST_CASE("hello lists channels and the library") {
  Session s(default_config());
  s.apply({Inbound::Kind::Connect, 7, {}, 0});
  const auto out = replies(s, 7);
  REQUIRE(out.size() == 1);
  CHECK(out[0]["type"] == "hello");
  CHECK(out[0]["channels"].size() == kChannelCount);
  CHECK(out[0]["library"].size() == s.library().entries.size());
}

TEST_CASE("setpoints are acknowledged and echoed in later telemetry") {
  auto s = connected_session();
  CHECK(call(s, 1, command("claim_operator"))["type"] == "ack");
  const double m = 1.3 * s.loop().setpoints()[index(ChannelId::IndexTip)];
  const auto ack = call(s, 1, command("set_setpoint", {{"channel", "IndexTip"}, {"mass_kg", m}}, "a7"));
  CHECK(ack["type"] == "ack");
  CHECK(ack["id"] == "a7");
  CHECK(ack["command"] == "set_setpoint");
  CHECK(s.mode() == SessionMode::Live);
  for (int k = 0; k < 30; ++k) s.step();
  const auto frames = telemetry(s.take_outbox());
  REQUIRE_FALSE(frames.empty());
  CHECK(frames.back()["setpoint"][index(ChannelId::IndexTip)].get<double>() == m);
  CHECK(frames.back()["mode"] == "live");
  CHECK(frames.size() == 3);
}

TEST_CASE("operator role is exclusive") {
  auto s = connected_session();
  CHECK(call(s, 1, command("claim_operator"))["type"] == "ack");
  auto err = call(s, 2, command("claim_operator"));
  CHECK(err["code"] == "role_conflict");
  err = call(s, 2, command("set_setpoint", {{"channel", "IndexTip"}, {"mass_kg", 1e-5}}));
  CHECK(err["code"] == "not_operator");
  CHECK(call(s, 2, command("list_library"))["type"] == "ack");
  s.apply({Inbound::Kind::Disconnect, 1, {}, 0});
  CHECK_FALSE(s.operator_client());
  CHECK(call(s, 2, command("claim_operator"))["type"] == "ack");
  CHECK(s.operator_client() == 2u);
}

TEST_CASE("bad messages get one error each and the client stays usable") {
  auto s = connected_session();
  CHECK(call(s, 1, "{not json")["code"] == "malformed");
  CHECK(call(s, 1, "[1,2]")["code"] == "malformed");
  CHECK(call(s, 1, R"({"type":"command","version":"2.0","id":3,"command":"list_library"})")["code"] ==
        "unsupported_version");
  CHECK(call(s, 1, command("fly"))["code"] == "unknown_command");
  CHECK(call(s, 1, command("claim_operator"))["type"] == "ack");
  CHECK(call(s, 1, command("set_setpoint", {{"channel", "Nope"}, {"mass_kg", 1e-5}}))["code"] ==
        "invalid_argument");
  CHECK(call(s, 1, command("set_setpoint", {{"channel", "IndexTip"}, {"mass_kg", -1.0}}))["code"] ==
        "invalid_argument");
  CHECK(call(s, 1, command("stop_record"))["code"] == "not_recording");
  CHECK(call(s, 1, command("stop_replay"))["code"] == "not_replaying");
  CHECK(call(s, 1, command("replay", {{"name", "missing"}}))["code"] == "not_found");
  CHECK(call(s, 1, command("recalibrate", {{"channel", "ThumbTip"}}))["type"] == "ack");
  CHECK(call(s, 1, command("recalibrate", {{"channel", "ThumbTip"}}))["code"] == "busy");
  CHECK(call(s, 1, command("list_library"))["type"] == "ack");
}

TEST_CASE("a batch of commands gets exactly one reply per id") {
  auto s = connected_session();
  std::vector<Inbound> batch;
  const std::vector<std::string> cmds = {"claim_operator", "list_library", "stop_replay", "fly", "release_operator"};
  for (std::size_t k = 0; k < cmds.size(); ++k)
    batch.push_back({Inbound::Kind::Message, 1, command(cmds[k], json::object(), k), k});
  s.tick(batch);
  std::map<int, int> count;
  for (const auto& j : replies(s, 1))
    if (j["type"] == "ack" || j["type"] == "error") ++count[j["id"].get<int>()];
  CHECK(count.size() == cmds.size());
  for (auto [id, n] : count) CHECK(n == 1);
}

TEST_CASE("every mode transition produces a telemetry frame") {
  auto s = connected_session();
  call(s, 1, command("claim_operator"));
  s.step();
  s.take_outbox();
  std::vector<std::string> modes;
  auto collect = [&] {
    for (const auto& f : telemetry(s.take_outbox()))
      if (modes.empty() || modes.back() != f["mode"]) modes.push_back(f["mode"]);
  };
  auto send = [&](const std::string& text) {
    s.apply({Inbound::Kind::Message, 1, text, 0});
    collect();
  };
  send(command("set_setpoint", {{"channel", "IndexBase"}, {"mass_kg", 3e-5}}));
  send(command("start_record", {{"name", "wave"}}));
  s.step();
  send(command("stop_record"));
  send(command("replay", {{"name", "wave"}, {"scale", 2.0}}));
  send(command("stop_replay"));
  CHECK(modes == std::vector<std::string>{"live", "recording", "live", "replaying", "live"});
}

TEST_CASE("recorded synergies replay through the session") {
  auto s = connected_session();
  call(s, 1, command("claim_operator"));
  CHECK(call(s, 1, command("start_record", {{"name", "reach"}}))["type"] == "ack");
  CHECK(call(s, 1, command("start_record", {{"name", "other"}}))["code"] == "busy");
  const auto ch = ChannelId::ThumbProximal;
  const double target = 2.0 * s.loop().setpoints()[index(ch)];
  for (int k = 0; k < 60; ++k) {
    if (k == 30) call(s, 1, command("set_setpoint", {{"channel", "ThumbProximal"}, {"mass_kg", target}}));
    s.step();
  }
  const auto ack = call(s, 1, command("stop_record"));
  CHECK(ack["detail"]["samples"] == 2);
  CHECK(call(s, 1, command("start_record", {{"name", "reach"}}))["code"] == "name_exists");
  const auto* entry = s.library().find("reach");
  REQUIRE(entry);
  CHECK(entry->kind == PostureKind::Recorded);

  call(s, 1, command("set_setpoint", {{"channel", "ThumbProximal"}, {"mass_kg", 0.5 * target}}));
  CHECK(call(s, 1, command("replay", {{"name", "reach"}}))["type"] == "ack");
  CHECK(call(s, 1, command("set_setpoint", {{"channel", "IndexTip"}, {"mass_kg", 1e-5}}))["code"] == "busy");
  CHECK(s.loop().setpoints()[index(ch)] == entry->trajectory.samples.front().mass[index(ch)]);
  bool progressed = false;
  while (s.mode() == SessionMode::Replaying) {
    s.step();
    for (const auto& f : telemetry(s.take_outbox()))
      if (f.contains("replay") && f["replay"]["name"] == "reach") progressed = true;
  }
  CHECK(progressed);
  CHECK(s.loop().setpoints()[index(ch)] == target);
}

TEST_CASE("a restarted session resumes its clock and library") {
  const auto dir = scratch_dir("persist");
  auto cfg = default_config();
  cfg.session_file = (dir / "session.json").string();
  std::uint64_t tick = 0;
  PerChannel<double> masses{};
  {
    auto s = connected_session(cfg);
    call(s, 1, command("claim_operator"));
    call(s, 1, command("start_record", {{"name", "kept"}}));
    for (int k = 0; k < 20; ++k) s.step();
    call(s, 1, command("set_setpoint", {{"channel", "RingBase"}, {"mass_kg", 3e-5}}));
    for (int k = 0; k < 20; ++k) s.step();
    call(s, 1, command("stop_record"));
    tick = s.loop().tick();
    masses = s.loop().true_masses();
  }
  Session again(cfg);
  again.restore(load_session(cfg.session_file));
  CHECK(again.loop().tick() == tick);
  CHECK(again.loop().true_masses() == masses);
  REQUIRE(again.library().find("kept"));
  CHECK(again.library().find("kept")->trajectory.samples.size() == 2);

  auto other = cfg;
  other.rig.sensor.noise_seed = 1;
  Session mismatched(other);
  CHECK_THROWS_AS(mismatched.restore(load_session(cfg.session_file)), ValidationError);
}

TEST_CASE("experiments run on request and report a summary") {
  auto s = connected_session();
  call(s, 1, command("claim_operator"));
  const auto ack = call(s, 1, command("run_experiment", {{"experiment", "kapandji"}, {"seed", 3}}));
  REQUIRE(ack["type"] == "ack");
  CHECK(ack["detail"]["experiment"] == "kapandji");
  CHECK(ack["detail"]["seed"] == 3);
  CHECK(call(s, 1, command("run_experiment", {{"experiment", "juggle"}}))["code"] == "invalid_argument");
  CHECK(s.mode() == SessionMode::Idle);
}

TEST_CASE("recalibration is reported as an event") {
  auto s = connected_session();
  call(s, 1, command("claim_operator"));
  call(s, 1, command("recalibrate", {{"channel", "LittleTip"}}));
  bool seen = false;
  for (int k = 0; k < 600 && !seen; ++k) {
    s.step();
    for (const auto& j : replies(s, std::nullopt))
      if (j["type"] == "event" && j["event"] == "recalibrated" && j["channel"] == "LittleTip") seen = true;
  }
  CHECK(seen);
}

// ---------------------------------------------------------------- server

TEST_CASE("websocket server answers a client") {
  namespace beast = boost::beast;
  namespace ws = beast::websocket;
  using boost::asio::ip::tcp;

  SessionServer server(default_config(), 0, false);
  server.start();
  boost::asio::io_context io;
  tcp::resolver resolver(io);
  ws::stream<tcp::socket> stream(io);
  boost::asio::connect(stream.next_layer(), resolver.resolve("127.0.0.1", std::to_string(server.port())));
  stream.handshake("127.0.0.1", "/");

  auto read = [&] {
    beast::flat_buffer buf;
    stream.read(buf);
    return json::parse(beast::buffers_to_string(buf.data()));
  };
  auto next_reply = [&] {
    for (int k = 0; k < 10000; ++k) {
      const auto j = read();
      if (j["type"] == "ack" || j["type"] == "error") return j;
    }
    return json();
  };
  CHECK(read()["type"] == "hello");
  stream.write(boost::asio::buffer(command("claim_operator", json::object(), 11)));
  const auto ack = next_reply();
  CHECK(ack["type"] == "ack");
  CHECK(ack["id"] == 11);
  stream.write(boost::asio::buffer(std::string("garbage")));
  CHECK(next_reply()["code"] == "malformed");
  stream.write(boost::asio::buffer(command("list_library", json::object(), 12)));
  CHECK(next_reply()["id"] == 12);
  json frame;
  do frame = read();
  while (frame["type"] != "telemetry");
  CHECK(frame["clients"] == 1);
  CHECK(frame["operator"].is_number());
  stream.close(ws::close_code::normal);
  server.stop();
  CHECK(server.tick() > 0);
}
