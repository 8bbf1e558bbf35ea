#pragma once

// Air-mass control: pressure-based mass estimation through the linear valve
// model, deadband bang-bang valve switching, recalibration against ambient,
// and synergy recording / replay.

#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pneumahand/hand.hpp"
#include "pneumahand/pneumatics.hpp"

namespace pneumahand {

struct ControllerConfig {
  double tick_rate = 300.0;  // Hz
  PerChannel<double> hysteresis_band = filled(4e-6);  // kg, full band width
  PerChannel<ChannelFlow> flow{};                     // estimator's model of each valve
  double supply_pressure = kAtmosphericPressure + 400e3;
  double atmosphere_pressure = kAtmosphericPressure;

  double tick() const { return 1.0 / tick_rate; }
  // Throws ValidationError if tick_rate exceeds the valve limit or a band is
  // not positive.
  void validate(double valve_max_switch_rate) const;

  static PerChannel<double> filled(double v) {
    PerChannel<double> a{};
    a.fill(v);
    return a;
  }
};

struct MassEstimatorState {
  PerChannel<double> estimated_mass{};
  PerChannel<double> last_measured_pressure{};
  PerChannel<double> inflate_open_time{};
  PerChannel<double> vent_open_time{};
};

// Integrates the controller's linear valve model from the measured pressures
// in `substeps` Euler steps, matching the plant's integration.
MassEstimatorState estimate_step(const MassEstimatorState& est,
                                 const PerChannel<double>& measured_pressure,
                                 const PerChannel<ValveCommand>& valves,
                                 const ControllerConfig& cfg, double dt, int substeps = 1);

// Deadband decision for one channel, ignoring valve rate limits.
ValveCommand bang_bang(double estimate, double setpoint, double band);

// Per-channel deadband decision pushed through the valve bank's rate limit.
PerChannel<ValveCommand> control_step(const MassEstimatorState& est,
                                      const PerChannel<double>& setpoint,
                                      const ControllerConfig& cfg, ValveBank& valves, double now);

struct MassSample {
  double t = 0.0;  // s, relative to the start of the trajectory
  PerChannel<double> mass{};
};

struct MassTrajectory {
  std::string name;
  std::vector<MassSample> samples;
  std::map<std::string, std::string> metadata;  // author, created_at, ...

  double duration() const { return samples.empty() ? 0.0 : samples.back().t; }
  // Throws DomainError if empty, FormatError if timestamps do not strictly
  // increase, DomainError on negative or non-finite masses.
  void validate() const;
};

// Samples operator setpoints and stores one only when some channel moved by
// more than `threshold` kg since the last stored sample.
class SynergyRecorder {
public:
  explicit SynergyRecorder(std::string name, double threshold = 1e-7);

  void sample(double t, const PerChannel<double>& setpoints);
  std::size_t size() const { return traj_.samples.size(); }
  MassTrajectory finish(std::map<std::string, std::string> metadata = {});

private:
  MassTrajectory traj_;
  double threshold_;
  std::optional<double> t0_;
};

// Zero-order-hold playback with timestamps scaled by `time_scale`.
class SynergyReplay {
public:
  SynergyReplay(MassTrajectory traj, double time_scale);

  const PerChannel<double>& setpoint_at(double elapsed) const;
  double duration() const { return traj_.duration() * scale_; }
  bool finished(double elapsed) const { return elapsed >= duration(); }
  const MassTrajectory& trajectory() const { return traj_; }
  double time_scale() const { return scale_; }

private:
  MassTrajectory traj_;
  double scale_;
};

// Setpoint stream emitted by a replay: the scaled sample instants with their
// stored values.
std::vector<MassSample> replay(const MassTrajectory& traj, double time_scale);

struct RigConfig {
  PlantParams plant;
  PressureSensorModel sensor;
  ControllerConfig controller;
  HandModel hand = default_hand_model();
  double valve_max_switch_rate = 300.0;
  int plant_substeps = 4;  // Euler steps per tick; each must be <= 1 ms

  double recalibration_threshold = 500.0;  // Pa gauge, on the trailing mean
  double recalibration_hold = 0.5;         // s
  double recalibration_timeout = 10.0;     // s

  GasConditions gas() const { return {plant.temperature, plant.atmosphere.pressure}; }
  void validate() const;
};

struct CalibrationEvent {
  ChannelId channel;
  std::uint64_t tick;
  double estimate_before;
  double estimate_after;
};

// Closed-loop co-simulation of controller, valves, plant and hand at the
// controller tick. Single owner; not thread safe.
class ControlLoop {
public:
  explicit ControlLoop(RigConfig cfg);

  void step();
  void run_for(double seconds);

  std::uint64_t tick() const { return tick_; }
  double time() const { return static_cast<double>(tick_) * cfg_.controller.tick(); }

  void set_setpoint(ChannelId ch, double mass);
  void set_setpoints(const PerChannel<double>& masses);
  const PerChannel<double>& setpoints() const { return setpoint_; }

  void set_load(const ExternalLoad& load);
  const ExternalLoad& load() const { return load_; }

  // Starts venting `ch`; the estimate is reset to the ambient mass once the
  // trailing mean gauge reading stays below threshold for the hold time.
  // Throws BusyError if `ch` is already recalibrating.
  void start_recalibration(ChannelId ch);
  bool recalibrating(ChannelId ch) const { return recal_[index(ch)].has_value(); }
  // Runs ticks until `ch` finishes. Throws HardwareFault on timeout.
  CalibrationEvent recalibrate(ChannelId ch);
  const std::vector<CalibrationEvent>& calibration_events() const { return events_; }

  const RigConfig& config() const { return cfg_; }
  const PlantState& plant() const { return plant_; }
  const ValveBank& valves() const { return valves_; }
  const MassEstimatorState& estimator() const { return est_; }
  const HandState& hand() const { return hand_; }
  const PerChannel<double>& measured_pressure() const { return est_.last_measured_pressure; }
  PerChannel<double> true_masses() const;

  // Replaces plant masses and estimates (used to restore a snapshot).
  void restore(std::uint64_t tick, const PerChannel<double>& true_mass,
               const PerChannel<double>& estimated_mass, const PerChannel<double>& setpoints);

private:
  struct Recalibration {
    double started;
    std::deque<double> window;
    double window_sum = 0.0;
    double estimate_before;
  };

  void settle_hand();

  RigConfig cfg_;
  std::uint64_t tick_ = 0;
  PlantState plant_;
  ValveBank valves_;
  MassEstimatorState est_;
  PerChannel<double> setpoint_{};
  ExternalLoad load_;
  HandState hand_;
  PerChannel<std::optional<Recalibration>> recal_{};
  std::vector<CalibrationEvent> events_;
};

}  // namespace pneumahand

namespace pneumahand {

// Drives `loop` through `traj` (zero-order hold, scaled) and then holds the
// final setpoints for `settle` seconds. `on_tick` runs after every step.
template <typename OnTick>
void replay_closed_loop(ControlLoop& loop, const MassTrajectory& traj, double time_scale,
                        double settle, OnTick&& on_tick) {
  const SynergyReplay r(traj, time_scale);
  const double start = loop.time();
  const double dt = loop.config().controller.tick();
  const auto ticks = static_cast<std::uint64_t>(std::ceil((r.duration() + settle) / dt - 1e-9));
  for (std::uint64_t k = 0; k < ticks; ++k) {
    loop.set_setpoints(r.setpoint_at(loop.time() - start));
    loop.step();
    on_tick(loop);
  }
}

inline void replay_closed_loop(ControlLoop& loop, const MassTrajectory& traj, double time_scale,
                               double settle) {
  replay_closed_loop(loop, traj, time_scale, settle, [](const ControlLoop&) {});
}

}  // namespace pneumahand
