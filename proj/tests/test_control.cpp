#include <doctest.h>

#include <cmath>
#include <deque>

#include "pneumahand/control.hpp"
#include "pneumahand/errors.hpp"
#include "pneumahand/posture_library.hpp"
#include "support/cosim.hpp"

using namespace pneumahand;

namespace {

RigConfig noiseless() {
  RigConfig rig;
  rig.sensor.accuracy_fraction = 0.0;
  return rig;
}

}  // namespace

TEST_CASE("bang-bang deadband") {
  CHECK(bang_bang(0.0, 1e-5, 4e-6) == ValveCommand{true, false});
  CHECK(bang_bang(2e-5, 1e-5, 4e-6) == ValveCommand{false, true});
  CHECK(bang_bang(1.1e-5, 1e-5, 4e-6) == ValveCommand{false, false});
  CHECK(bang_bang(0.9e-5, 1e-5, 4e-6) == ValveCommand{false, false});
}

TEST_CASE("estimator integrates the linear valve model only while a valve is open") {
  ControllerConfig cfg;
  MassEstimatorState est;
  est.estimated_mass.fill(1e-5);
  PerChannel<double> p{};
  p.fill(kAtmosphericPressure + 100e3);
  PerChannel<ValveCommand> v{};
  v[0] = {true, false};
  v[1] = {false, true};
  const double dt = 1.0 / 300.0;
  const auto next = estimate_step(est, p, v, cfg, dt);
  CHECK(next.estimated_mass[0] == doctest::Approx(1e-5 + 1e-9 * 300e3 * dt));
  CHECK(next.estimated_mass[1] == doctest::Approx(1e-5 - 1e-9 * 100e3 * dt));
  CHECK(next.estimated_mass[2] == 1e-5);
  CHECK(next.inflate_open_time[0] == doctest::Approx(dt));
}

TEST_CASE("substepped estimator tracks the substepped plant") {
  RigConfig rig;
  const double V = 1.2e-5;
  PlantState plant;
  MassEstimatorState est;
  PerChannel<double> volumes{};
  for (std::size_t i = 0; i < kChannelCount; ++i) {
    plant.chambers[i] = ChamberState::vented(V);
    volumes[i] = V;
    est.estimated_mass[i] = plant.chambers[i].mass;
  }
  PerChannel<ValveCommand> v{};
  v[0] = {true, false};
  const double dt = rig.controller.tick();
  for (int k = 0; k < 100; ++k) {
    PerChannel<double> p{};
    for (std::size_t i = 0; i < kChannelCount; ++i) p[i] = plant.chambers[i].pressure();
    est = estimate_step(est, p, v, rig.controller, dt, rig.plant_substeps);
    for (int j = 0; j < rig.plant_substeps; ++j) plant = step_plant(plant, v, volumes, rig.plant, dt / rig.plant_substeps);
  }
  CHECK(est.estimated_mass[0] == doctest::Approx(plant.chambers[0].mass).epsilon(1e-12));
  CHECK(est.estimated_mass[1] == plant.chambers[1].mass);
}

TEST_CASE("plant step stays at or below 1 ms") {
  RigConfig rig;
  CHECK(rig.controller.tick() / rig.plant_substeps <= 1e-3);
  rig.plant_substeps = 1;
  CHECK_THROWS_AS(rig.validate(), ValidationError);
}

TEST_CASE("controller config rejects a tick faster than the valves") {
  ControllerConfig cfg;
  cfg.tick_rate = 600.0;
  CHECK_THROWS_AS(cfg.validate(300.0), ValidationError);
  cfg.tick_rate = 300.0;
  CHECK_NOTHROW(cfg.validate(300.0));
  cfg.hysteresis_band[3] = 0.0;
  CHECK_THROWS_AS(cfg.validate(300.0), ValidationError);
}

TEST_CASE("closed loop settles inside band plus one tick quantum") {
  const auto rig = noiseless();
  ControlLoop loop(rig);
  const auto& model = rig.hand;
  PerChannel<double> sp{};
  for (auto ch : kAllChannels) sp[index(ch)] = mass_for_joint(model, ch, 0.5 * model.joint_limit(ch));
  loop.set_setpoints(sp);
  PerChannel<bool> entered{};
  const int ticks = static_cast<int>(10.0 * rig.controller.tick_rate);
  for (int k = 0; k < ticks; ++k) {
    loop.step();
    const auto m = loop.true_masses();
    for (auto ch : kAllChannels) {
      const auto i = index(ch);
      const double err = std::abs(m[i] - sp[i]);
      const double bound = 0.5 * rig.controller.hysteresis_band[i] + testing::tick_quantum(rig, ch);
      if (err <= 0.5 * rig.controller.hysteresis_band[i]) entered[i] = true;
      if (entered[i]) CHECK(err <= bound);
    }
  }
  for (bool e : entered) CHECK(e);
}

TEST_CASE("valves never switch faster than the rate limit") {
  RigConfig rig;
  rig.sensor.noise_seed = 3;
  ControlLoop loop(rig);
  const auto lib = default_posture_library(rig.hand, rig.gas());
  PerChannel<double> last_in, last_vent;
  last_in.fill(-INFINITY);
  last_vent.fill(-INFINITY);
  PerChannel<std::deque<double>> window{};
  const double dwell = 1.0 / rig.valve_max_switch_rate;
  int checked = 0;
  auto watch = [&](const ControlLoop& l) {
    for (auto ch : kAllChannels) {
      const auto i = index(ch);
      for (auto [now, last] : {std::pair{l.valves().last_inflate_switch(ch), &last_in[i]},
                               std::pair{l.valves().last_vent_switch(ch), &last_vent[i]}}) {
        if (now == *last) continue;
        if (std::isfinite(*last)) CHECK(now - *last >= dwell * (1.0 - 1e-9));
        *last = now;
        window[i].push_back(now);
        while (window[i].front() <= now - 1.0) window[i].pop_front();
        CHECK(window[i].size() <= 2 * static_cast<std::size_t>(rig.valve_max_switch_rate));
        ++checked;
      }
    }
  };
  for (const char* name : {"inhand_proximal_distal", "taxonomy_01_large_diameter"})
    replay_closed_loop(loop, lib.find(name)->trajectory, 1.0, 0.5, watch);
  CHECK(checked > 0);
}

TEST_CASE("estimator drift grows with cycling and recalibration removes it") {
  std::vector<double> rms(3, 0.0);
  const int seeds = 6;
  for (int s = 1; s <= seeds; ++s) {
    RigConfig rig;
    rig.sensor.noise_seed = static_cast<std::uint64_t>(s);
    const auto d = testing::estimator_drift(rig, ChannelId::IndexBase, 2e-5, {10, 100, 1000});
    for (std::size_t k = 0; k < 3; ++k) rms[k] += d.drift[k] * d.drift[k] / seeds;
  }
  CHECK(rms[0] < rms[1]);
  CHECK(rms[1] < rms[2]);

  RigConfig rig;
  rig.sensor.noise_seed = 9;
  ControlLoop loop(rig);
  const auto ch = ChannelId::IndexBase;
  auto truth = loop.true_masses();
  const auto est = loop.estimator().estimated_mass;
  const double drift = 5.0 * std::sqrt(rms[2]);
  truth[index(ch)] += drift;
  loop.restore(0, truth, est, loop.setpoints());
  const auto event = loop.recalibrate(ch);
  CHECK(event.channel == ch);
  const double V = loop.plant().chambers[index(ch)].volume;
  const double threshold_mass = rig.recalibration_threshold * V / (kAirGasConstant * rig.plant.temperature);
  const double after = std::abs(loop.true_masses()[index(ch)] - loop.estimator().estimated_mass[index(ch)]);
  CHECK(after <= threshold_mass);
  CHECK(after < drift);
}

TEST_CASE("recalibration rejects overlap and times out on a blocked vent") {
  RigConfig rig;
  ControlLoop loop(rig);
  loop.start_recalibration(ChannelId::ThumbTip);
  CHECK(loop.recalibrating(ChannelId::ThumbTip));
  CHECK_THROWS_AS(loop.start_recalibration(ChannelId::ThumbTip), BusyError);

  rig.recalibration_threshold = -1e6;  // never satisfied
  rig.recalibration_timeout = 0.2;
  ControlLoop stuck(rig);
  CHECK_THROWS_AS(stuck.recalibrate(ChannelId::PalmBellow), HardwareFault);
}

TEST_CASE("closed valves keep air mass fixed when a load deforms the hand") {
  RigConfig rig;
  rig.sensor.noise_seed = 5;
  ControlLoop loop(rig);
  loop.run_for(0.2);
  const auto before = loop.true_masses();
  const auto joints_before = loop.hand().pose.joints;
  ExternalLoad load;
  load.torque[index(ChannelId::ThumbProximal)] = -0.3;
  load.torque[index(ChannelId::PalmBellow)] = -0.2;
  loop.set_load(load);
  loop.run_for(1.0);
  const auto after = loop.true_masses();
  for (std::size_t i = 0; i < kChannelCount; ++i) CHECK(after[i] == before[i]);
  CHECK(loop.hand().pose.joints[index(ChannelId::ThumbProximal)] >
        joints_before[index(ChannelId::ThumbProximal)]);
}

TEST_CASE("trajectory validation") {
  MassTrajectory t;
  t.name = "grip";
  CHECK_THROWS_AS(t.validate(), DomainError);
  t.samples = {{0.0, {}}, {0.5, {}}, {0.4, {}}};
  try {
    t.validate();
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("grip") != std::string::npos);
  }
  t.samples = {{0.0, {}}};
  t.samples[0].mass[2] = -1e-9;
  CHECK_THROWS_AS(t.validate(), DomainError);
}

TEST_CASE("recorder stores changes above threshold, replay holds and scales") {
  SynergyRecorder rec("demo", 1e-7);
  PerChannel<double> sp{};
  rec.sample(3.0, sp);  // first sample is rebased to t = 0
  rec.sample(3.1, sp);
  sp[4] = 5e-8;
  rec.sample(3.2, sp);  // below threshold
  sp[4] = 2e-6;
  rec.sample(3.5, sp);
  const auto traj = rec.finish({{"author", "test"}});
  REQUIRE(traj.samples.size() == 2);
  CHECK(traj.samples[0].t == 0.0);
  CHECK(traj.samples[1].t == doctest::Approx(0.5));
  CHECK(traj.metadata.at("author") == "test");

  SynergyReplay slow(traj, 2.0);
  CHECK(slow.duration() == doctest::Approx(1.0));
  CHECK(slow.setpoint_at(0.99)[4] == 0.0);
  CHECK(slow.setpoint_at(1.0)[4] == 2e-6);
  CHECK(slow.finished(1.0));
  const auto stream = replay(traj, 2.0);
  CHECK(stream[1].t == doctest::Approx(1.0));
  CHECK_THROWS_AS(SynergyReplay(traj, 0.0), DomainError);
}

TEST_CASE("replay of a recorded live session reproduces the live trace") {
  RigConfig rig;
  rig.sensor.noise_seed = 17;
  const auto lib_rest = rest_masses(rig.hand, rig.gas());
  ControlLoop live(rig);
  SynergyRecorder rec("live");
  std::vector<JointVector> live_trace;
  const int ticks = 600;
  for (int k = 0; k < ticks; ++k) {
    auto sp = live.setpoints();
    if (k == 30) sp[index(ChannelId::IndexBase)] = 1.5 * lib_rest[index(ChannelId::IndexBase)];
    if (k == 120) sp[index(ChannelId::ThumbMiddle)] = 2.0 * lib_rest[index(ChannelId::ThumbMiddle)];
    if (k == 300) sp[index(ChannelId::IndexBase)] = 1.2 * lib_rest[index(ChannelId::IndexBase)];
    live.set_setpoints(sp);
    rec.sample(live.time(), sp);
    live.step();
    live_trace.push_back(live.hand().pose.joints);
  }
  const auto traj = rec.finish();
  CHECK(traj.samples.size() == 4);

  ControlLoop again(rig);
  std::vector<JointVector> replay_trace;
  replay_closed_loop(again, traj, 1.0, (ticks - 1) / rig.controller.tick_rate - traj.duration() + 1e-9,
                     [&](const ControlLoop& l) { replay_trace.push_back(l.hand().pose.joints); });
  REQUIRE(replay_trace.size() >= live_trace.size());
  for (std::size_t k = 0; k < live_trace.size(); ++k) CHECK(replay_trace[k] == live_trace[k]);
}

TEST_CASE("closed loop is reproducible for a fixed seed") {
  RigConfig rig;
  rig.sensor.noise_seed = 21;
  const auto lib = default_posture_library(rig.hand, rig.gas());
  ControlLoop a(rig), b(rig);
  replay_closed_loop(a, lib.find("taxonomy_09_palmar_pinch")->trajectory, 1.0, 0.5);
  replay_closed_loop(b, lib.find("taxonomy_09_palmar_pinch")->trajectory, 1.0, 0.5);
  CHECK(a.true_masses() == b.true_masses());
  CHECK(a.hand().pose.joints == b.hand().pose.joints);
}
