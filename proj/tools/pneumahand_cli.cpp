#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "pneumahand/config.hpp"
#include "pneumahand/errors.hpp"
#include "pneumahand/records.hpp"
#include "pneumahand/server.hpp"

namespace fs = std::filesystem;
using namespace pneumahand;

namespace {

AppConfig load(const std::string& path) {
  const auto resolved = resolve_config_path(path);
  return resolved ? load_config(*resolved) : default_config();
}

ChannelId parse_channel(const std::string& name) {
  if (auto ch = channel_from_name(name)) return *ch;
  throw DomainError("unknown channel '" + name + "'");
}

void print_verdicts(const ExperimentReport& r) {
  for (const auto& v : r.verdicts)
    std::cout << (v.pass ? "PASS " : "FAIL ") << r.experiment_id << " " << v.name << " = " << v.value
              << " (anchor " << v.anchor << ")\n";
}

void print_written(const std::pair<fs::path, fs::path>& files) {
  std::cout << "wrote " << files.first.string() << "\nwrote " << files.second.string() << "\n";
}

int simulate(const AppConfig& cfg, std::optional<std::uint64_t> seed, const std::string& synergy,
             const std::string& synergy_file, double scale, double settle, double rate,
             const fs::path& out) {
  const auto ctx = make_context(cfg, seed);
  MassTrajectory traj;
  if (!synergy_file.empty()) {
    traj = load_trajectory(synergy_file);
  } else {
    const auto lib = default_posture_library(ctx.rig.hand, ctx.rig.gas());
    const auto* e = lib.find(synergy);
    if (!e) throw DomainError("no synergy named '" + synergy + "' in the library");
    traj = e->trajectory;
  }
  if (!(scale > 0.0)) throw DomainError("--scale must be positive");
  ControlLoop loop(ctx.rig);
  const auto every = std::max<std::uint64_t>(
      1, static_cast<std::uint64_t>(std::llround(ctx.rig.controller.tick_rate / rate)));

  nlohmann::json header = {{"format", kTraceFormat},   {"version", kRecordsVersion},
                           {"config_digest", ctx.config_digest}, {"seed", ctx.seed},
                           {"synergy", traj.name},     {"scale", scale},
                           {"settle_s", settle},       {"frame_every_ticks", every}};
  std::string text = header.dump() + "\n";
  auto frame = [&](const ControlLoop& l) {
    text += telemetry_to_json(telemetry_from_loop(l, "replaying")).dump() + "\n";
  };
  frame(loop);
  replay_closed_loop(loop, traj, scale, settle, [&](const ControlLoop& l) {
    if (l.tick() % every == 0) frame(l);
  });
  if (loop.tick() % every != 0) frame(loop);
  const auto path = out / (traj.name + "_trace.jsonl");
  write_text_file(path, text);
  std::cout << "wrote " << path.string() << " (" << loop.tick() << " ticks)\n";
  return 0;
}

int fit_bellow(const AppConfig& cfg, const std::string& table_path, const std::string& channel,
               const fs::path& out) {
  const auto ch = parse_channel(channel);
  if (!is_bellow(ch)) throw DomainError(channel + " is not a bellow channel");
  const auto table = load_calibration_table(table_path);
  auto fitted = cfg;
  auto& joint = fitted.rig.hand.bellow(ch);
  joint.bellow.moment_arm_table = fit_moment_arm(table, joint.bellow);
  joint.bellow.validate();

  std::string comment = "fitted from " + table_path;
  if (!table.provenance.empty()) comment += " (" + table.provenance + ")";
  write_text_file(out, dump_bellow_fragment(fitted, ch, comment));
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pneumatic soft hand simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".";
  std::optional<std::uint64_t> seed;

  auto add_common = [&](CLI::App* sub, bool with_out = true) {
    sub->add_option("--config", config_path, "YAML config (default: $PNEUMAHAND_CONFIG or built-in)");
    sub->add_option("--seed", seed, "noise seed (overrides sensor.noise_seed)");
    if (with_out) sub->add_option("--out", out_dir, "output directory");
  };

  auto* sim = app.add_subcommand("simulate", "replay a synergy and write a telemetry trace");
  add_common(sim);
  std::string synergy, synergy_file;
  double scale = 1.0, settle = 1.0, rate = 30.0;
  auto* syn_opt = sim->add_option("--synergy", synergy, "library entry name");
  sim->add_option("--synergy-file", synergy_file, "trajectory file instead of a library entry")
      ->excludes(syn_opt);
  sim->add_option("--scale", scale, "time scale (2 = half speed)");
  sim->add_option("--settle", settle, "seconds to hold the final setpoints");
  sim->add_option("--rate", rate, "trace frame rate in Hz")->check(CLI::PositiveNumber);

  auto* chr = app.add_subcommand("characterize", "actuator characterization protocols");
  chr->require_subcommand(1);
  auto* chr_finger = chr->add_subcommand("finger", "two-chamber finger sweep");
  add_common(chr_finger);
  int reps = 5;
  std::string finger = "index";
  chr_finger->add_option("--repetitions", reps)->check(CLI::PositiveNumber);
  chr_finger->add_option("--finger", finger)->check(CLI::IsMember({"index", "middle", "ring", "little"}));
  auto* chr_bellow = chr->add_subcommand("bellow", "blocked-hinge torque grid");
  add_common(chr_bellow);
  std::vector<std::string> bellows;
  chr_bellow->add_option("--repetitions", reps)->check(CLI::PositiveNumber);
  chr_bellow->add_option("--channel", bellows, "bellow channel(s); default: the three thumb bellows");

  auto* ev = app.add_subcommand("evaluate", "hand-level evaluations");
  ev->require_subcommand(1);
  auto* ev_kap = ev->add_subcommand("kapandji", "thumb opposition score");
  add_common(ev_kap);
  bool palm_off = false;
  std::optional<double> tolerance;
  ev_kap->add_flag("--palm-off", palm_off, "force the palm bellow to zero air mass");
  ev_kap->add_option("--tolerance", tolerance, "contact tolerance in m");
  auto* ev_pull = ev->add_subcommand("pullout", "sphere pull-out forces");
  add_common(ev_pull);
  ev_pull->add_option("--repetitions", reps)->check(CLI::PositiveNumber);
  auto* ev_lib = ev->add_subcommand("library", "replay every library entry three times");
  add_common(ev_lib);
  int replays = 3;
  ev_lib->add_option("--replays", replays)->check(CLI::PositiveNumber);

  auto* srv = app.add_subcommand("serve", "run the WebSocket session service");
  add_common(srv, false);
  unsigned short port = 8765;
  bool fast = false;
  srv->add_option("--port", port);
  srv->add_flag("--no-realtime", fast, "tick as fast as possible");

  auto* cal = app.add_subcommand("calibrate", "calibration utilities");
  cal->require_subcommand(1);
  auto* cal_fit = cal->add_subcommand("fit-bellow", "fit a moment-arm table from a torque table");
  std::string table_path, fragment_out, fit_channel = "ThumbProximal";
  cal_fit->add_option("--config", config_path);
  cal_fit->add_option("--table", table_path)->required();
  cal_fit->add_option("--out", fragment_out)->required();
  cal_fit->add_option("--channel", fit_channel);

  auto* lib = app.add_subcommand("library", "posture library utilities");
  lib->require_subcommand(1);
  auto* lib_export = lib->add_subcommand("export", "write every entry as a trajectory file");
  add_common(lib_export);

  auto* cfg_cmd = app.add_subcommand("config", "print the effective config");
  cfg_cmd->add_option("--config", config_path);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = load(config_path);
    const fs::path out(out_dir);
    if (sim->parsed()) {
      if (synergy.empty() && synergy_file.empty()) throw DomainError("--synergy or --synergy-file is required");
      return simulate(cfg, seed, synergy, synergy_file, scale, settle, rate, out);
    }
    if (chr_finger->parsed()) {
      const auto d = finger == "index" ? Digit::Index : finger == "middle" ? Digit::Middle
                   : finger == "ring" ? Digit::Ring : Digit::Little;
      const auto r = run_finger_characterization(make_context(cfg, seed), reps, d);
      print_verdicts(r);
      print_written(save_report(out, r, finger == "index" ? "" : finger));
      return r.passed() ? 0 : 2;
    }
    if (chr_bellow->parsed()) {
      if (bellows.empty()) bellows = {"ThumbProximal", "ThumbMiddle", "ThumbDistal"};
      const auto ctx = make_context(cfg, seed);
      bool ok = true;
      for (const auto& name : bellows) {
        const auto ch = parse_channel(name);
        const auto r = run_bellow_characterization(ctx, ch, reps);
        print_verdicts(r);
        print_written(save_report(out, r, name));
        CalibrationTable table;
        table.provenance = "bellow_characterization " + name + " seed " + std::to_string(ctx.seed);
        for (const auto& row : r.rows)
          table.samples.push_back({deg2rad(row.keys[0]), row.keys[1] * 1e3, row.metrics[0].mean});
        const auto csv = out / ("calibration_" + name + ".csv");
        write_text_file(csv, write_calibration_table(table));
        std::cout << "wrote " << csv.string() << "\n";
        ok = ok && r.passed();
      }
      return ok ? 0 : 2;
    }
    if (ev_kap->parsed()) {
      const auto ctx = make_context(cfg, seed);
      const auto library = default_posture_library(ctx.rig.hand, ctx.rig.gas());
      KapandjiOptions opt;
      opt.tolerance = tolerance;
      if (palm_off) opt.forced_masses.emplace_back(ChannelId::PalmBellow, 0.0);
      const auto k = run_kapandji(ctx, library, opt);
      for (int i = 0; i < 10; ++i)
        std::cout << "target " << (i + 1) << " (" << kapandji_label(i + 1) << "): "
                  << k.distance[static_cast<std::size_t>(i)] * 1e3 << " mm"
                  << (k.reached[static_cast<std::size_t>(i)] ? " reached" : "") << "\n";
      std::cout << "score: " << k.score << "/10\n";
      print_written(save_report(out, k.report, palm_off ? "palm_off" : ""));
      return 0;
    }
    if (ev_pull->parsed()) {
      const auto ctx = make_context(cfg, seed);
      const auto library = default_posture_library(ctx.rig.hand, ctx.rig.gas());
      const auto* e = library.find(pullout_posture_name());
      const auto r = run_pullout(ctx, e->trajectory, reps);
      for (const auto& row : r.rows)
        std::cout << pull_direction_name(static_cast<PullDirection>(static_cast<int>(row.keys[0]))) << ": "
                  << row.metrics[0].mean << " N (std " << row.metrics[0].std << ")\n";
      print_verdicts(r);
      print_written(save_report(out, r));
      return r.passed() ? 0 : 2;
    }
    if (ev_lib->parsed()) {
      const auto ctx = make_context(cfg, seed);
      const auto library = default_posture_library(ctx.rig.hand, ctx.rig.gas());
      const auto v = validate_library(ctx, library, replays);
      std::cout << "entries: " << v.passed << "/" << v.entries << " passed\n";
      for (const auto& [name, why] : v.failures) std::cout << "failure " << name << ": " << why << "\n";
      print_written(save_report(out, v.report));
      std::ostringstream m;
      m << "name";
      for (const auto& n : v.taxonomy_names) m << "," << n;
      m << "\n";
      for (std::size_t i = 0; i < v.taxonomy_names.size(); ++i) {
        m << v.taxonomy_names[i];
        for (double d : v.taxonomy_distance[i]) m << "," << d;
        m << "\n";
      }
      write_text_file(out / "taxonomy_distance.csv", m.str());
      std::cout << "wrote " << (out / "taxonomy_distance.csv").string() << "\n";
      return v.report.passed() ? 0 : 2;
    }
    if (srv->parsed()) {
      SessionServer server(cfg, port, !fast);
      std::cout << "serving on ws://0.0.0.0:" << server.port() << std::endl;
      server.run();
      return 0;
    }
    if (cal_fit->parsed()) return fit_bellow(cfg, table_path, fit_channel, fragment_out);
    if (lib_export->parsed()) {
      const auto ctx = make_context(cfg, seed);
      const auto library = default_posture_library(ctx.rig.hand, ctx.rig.gas());
      RecordHeader h{kTrajectoryFormat, kRecordsVersion, ctx.config_digest, ctx.seed};
      for (const auto& e : library.entries) save_trajectory(out / (e.trajectory.name + ".jsonl"), e.trajectory, h);
      std::cout << "wrote " << library.entries.size() << " trajectories to " << out.string() << "\n";
      return 0;
    }
    if (cfg_cmd->parsed()) {
      std::cout << dump_config(cfg);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
