#include "pneumahand/control.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pneumahand/errors.hpp"

namespace pneumahand {

void ControllerConfig::validate(double valve_max_switch_rate) const {
  if (!(tick_rate > 0.0)) throw ValidationError("controller tick_rate must be positive");
  if (tick_rate > valve_max_switch_rate * (1.0 + 1e-12))
    throw ValidationError("controller tick_rate exceeds the valve switch rate");
  for (double b : hysteresis_band)
    if (!(b > 0.0)) throw ValidationError("hysteresis band must be positive");
  for (const auto& f : flow)
    if (!(f.inflate > 0.0 && f.vent > 0.0))
      throw ValidationError("estimator flow coefficients must be positive");
}

MassEstimatorState estimate_step(const MassEstimatorState& est,
                                 const PerChannel<double>& measured_pressure,
                                 const PerChannel<ValveCommand>& valves,
                                 const ControllerConfig& cfg, double dt, int substeps) {
  if (!(dt > 0.0)) throw DomainError("estimator step must be positive");
  if (substeps < 1) throw DomainError("estimator substeps must be at least 1");
  const double h = dt / substeps;
  MassEstimatorState next = est;
  for (std::size_t i = 0; i < kChannelCount; ++i) {
    const double p0 = measured_pressure[i];
    next.last_measured_pressure[i] = p0;
    const auto& v = valves[i];
    if (!v.inflate && !v.vent) continue;
    if (v.inflate) next.inflate_open_time[i] += dt;
    if (v.vent) next.vent_open_time[i] += dt;
    // Within the tick, pressure follows the estimated mass at the volume
    // implied by the measurement.
    const double m0 = est.estimated_mass[i];
    const double pa = m0 > 0.0 ? p0 / m0 : 0.0;
    double m = m0, p = p0;
    for (int k = 0; k < substeps; ++k) {
      double dm = 0.0;
      if (v.inflate) dm += valve_mass_flow(cfg.supply_pressure, p, cfg.flow[i].inflate);
      if (v.vent) dm += valve_mass_flow(cfg.atmosphere_pressure, p, cfg.flow[i].vent);
      m = std::max(0.0, m + dm * h);
      if (pa > 0.0) p = m * pa;
    }
    next.estimated_mass[i] = m;
  }
  return next;
}

ValveCommand bang_bang(double estimate, double setpoint, double band) {
  if (estimate < setpoint - 0.5 * band) return {true, false};
  if (estimate > setpoint + 0.5 * band) return {false, true};
  return {false, false};
}

PerChannel<ValveCommand> control_step(const MassEstimatorState& est,
                                      const PerChannel<double>& setpoint,
                                      const ControllerConfig& cfg, ValveBank& valves, double now) {
  PerChannel<ValveCommand> out{};
  for (auto ch : kAllChannels) {
    const auto i = index(ch);
    out[i] = valves.request(
        ch, bang_bang(est.estimated_mass[i], setpoint[i], cfg.hysteresis_band[i]), now);
  }
  return out;
}

void MassTrajectory::validate() const {
  if (samples.empty()) throw DomainError("trajectory '" + name + "' is empty");
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    if (!std::isfinite(s.t)) throw FormatError("trajectory '" + name + "' has a non-finite time");
    if (k > 0 && !(s.t > samples[k - 1].t))
      throw FormatError("trajectory '" + name + "' timestamps are not strictly increasing at sample " +
                        std::to_string(k));
    for (double m : s.mass)
      if (!(m >= 0.0) || !std::isfinite(m))
        throw DomainError("trajectory '" + name + "' has a negative or non-finite mass");
  }
}

SynergyRecorder::SynergyRecorder(std::string name, double threshold) : threshold_(threshold) {
  traj_.name = std::move(name);
}

void SynergyRecorder::sample(double t, const PerChannel<double>& setpoints) {
  if (!t0_) {
    t0_ = t;
    traj_.samples.push_back({0.0, setpoints});
    return;
  }
  const auto& last = traj_.samples.back().mass;
  bool changed = false;
  for (std::size_t i = 0; i < kChannelCount && !changed; ++i)
    changed = std::abs(setpoints[i] - last[i]) > threshold_;
  if (changed) traj_.samples.push_back({t - *t0_, setpoints});
}

MassTrajectory SynergyRecorder::finish(std::map<std::string, std::string> metadata) {
  MassTrajectory out = std::move(traj_);
  out.metadata = std::move(metadata);
  traj_ = MassTrajectory{out.name, {}, {}};
  t0_.reset();
  return out;
}

SynergyReplay::SynergyReplay(MassTrajectory traj, double time_scale)
    : traj_(std::move(traj)), scale_(time_scale) {
  if (!(time_scale > 0.0)) throw DomainError("replay time_scale must be positive");
  traj_.validate();
}

const PerChannel<double>& SynergyReplay::setpoint_at(double elapsed) const {
  const auto& s = traj_.samples;
  // Last sample whose scaled time is <= elapsed; hold the first before it.
  auto it = std::upper_bound(s.begin(), s.end(), elapsed,
                             [this](double e, const MassSample& m) { return e < m.t * scale_; });
  return it == s.begin() ? s.front().mass : std::prev(it)->mass;
}

std::vector<MassSample> replay(const MassTrajectory& traj, double time_scale) {
  const SynergyReplay r(traj, time_scale);
  std::vector<MassSample> out;
  out.reserve(traj.samples.size());
  for (const auto& s : r.trajectory().samples) out.push_back({s.t * time_scale, s.mass});
  return out;
}

void RigConfig::validate() const {
  hand.validate();
  controller.validate(valve_max_switch_rate);
  if (plant_substeps < 1) throw ValidationError("plant_substeps must be at least 1");
  if (controller.tick() / plant_substeps > 1e-3 * (1.0 + 1e-12))
    throw ValidationError("plant Euler step exceeds 1 ms; raise plant_substeps");
  if (!(plant.temperature > 0.0)) throw ValidationError("temperature must be positive");
  if (!(plant.supply.pressure > plant.atmosphere.pressure))
    throw ValidationError("supply pressure must exceed atmosphere");
  if (!(sensor.full_scale > 0.0) || sensor.accuracy_fraction < 0.0)
    throw ValidationError("invalid pressure sensor parameters");
  for (const auto& f : plant.flow)
    if (!(f.inflate > 0.0 && f.vent > 0.0))
      throw ValidationError("plant flow coefficients must be positive");
}

ControlLoop::ControlLoop(RigConfig cfg) : cfg_(std::move(cfg)), valves_(cfg_.valve_max_switch_rate) {
  cfg_.validate();
  const auto gas = cfg_.gas();
  const auto rest = rest_masses(cfg_.hand, gas);
  for (auto ch : kAllChannels) {
    const auto i = index(ch);
    plant_.chambers[i] = ChamberState::vented(cfg_.hand.chamber_volume(ch, 0.0),
                                              gas.temperature, gas.atmosphere);
    est_.estimated_mass[i] = rest[i];
    est_.last_measured_pressure[i] = gas.atmosphere;
  }
  setpoint_ = rest;
  settle_hand();
}

void ControlLoop::settle_hand() {
  PerChannel<double> masses{};
  for (std::size_t i = 0; i < kChannelCount; ++i) masses[i] = plant_.chambers[i].mass;
  hand_ = hand_equilibrium(cfg_.hand, masses, load_, cfg_.gas());
  for (std::size_t i = 0; i < kChannelCount; ++i) plant_.chambers[i].volume = hand_.volume[i];
  hand_.pose.timestamp = time();
}

PerChannel<double> ControlLoop::true_masses() const {
  PerChannel<double> m{};
  for (std::size_t i = 0; i < kChannelCount; ++i) m[i] = plant_.chambers[i].mass;
  return m;
}

void ControlLoop::set_setpoint(ChannelId ch, double mass) {
  if (!(mass >= 0.0) || !std::isfinite(mass)) throw DomainError("setpoint must be non-negative");
  setpoint_[index(ch)] = mass;
}

void ControlLoop::set_setpoints(const PerChannel<double>& masses) {
  for (auto ch : kAllChannels) set_setpoint(ch, masses[index(ch)]);
}

void ControlLoop::set_load(const ExternalLoad& load) {
  load.validate();
  load_ = load;
  settle_hand();
}

void ControlLoop::start_recalibration(ChannelId ch) {
  auto& r = recal_[index(ch)];
  if (r) throw BusyError("channel busy: " + std::string(channel_name(ch)) + " is recalibrating");
  r = Recalibration{time(), {}, 0.0, est_.estimated_mass[index(ch)]};
}

void ControlLoop::step() {
  const double dt = cfg_.controller.tick();
  const double now = time();

  PerChannel<double> measured{};
  for (std::size_t i = 0; i < kChannelCount; ++i)
    measured[i] = read_pressure(plant_.chambers[i].pressure(), cfg_.sensor, tick_,
                                static_cast<std::uint32_t>(i));

  for (auto ch : kAllChannels) {
    const auto i = index(ch);
    const auto desired = recal_[i] ? ValveCommand{false, true}
                                   : bang_bang(est_.estimated_mass[i], setpoint_[i],
                                               cfg_.controller.hysteresis_band[i]);
    valves_.request(ch, desired, now);
  }

  est_ = estimate_step(est_, measured, valves_.states(), cfg_.controller, dt, cfg_.plant_substeps);

  const double h = dt / cfg_.plant_substeps;
  for (int k = 0; k < cfg_.plant_substeps; ++k)
    plant_ = step_plant(plant_, valves_.states(), hand_.volume, cfg_.plant, h);
  ++tick_;
  settle_hand();

  const auto window_len =
      static_cast<std::size_t>(std::llround(cfg_.recalibration_hold / dt));
  for (auto ch : kAllChannels) {
    const auto i = index(ch);
    auto& r = recal_[i];
    if (!r) continue;
    const double gauge = measured[i] - cfg_.controller.atmosphere_pressure;
    r->window.push_back(gauge);
    r->window_sum += gauge;
    if (r->window.size() > window_len) {
      r->window_sum -= r->window.front();
      r->window.pop_front();
    }
    if (r->window.size() == window_len &&
        r->window_sum / static_cast<double>(window_len) < cfg_.recalibration_threshold) {
      const double ambient = chamber_mass(cfg_.controller.atmosphere_pressure,
                                          plant_.chambers[i].volume, cfg_.plant.temperature);
      events_.push_back({ch, tick_, r->estimate_before, ambient});
      est_.estimated_mass[i] = ambient;
      r.reset();
    } else if (time() - r->started > cfg_.recalibration_timeout) {
      r.reset();
      throw HardwareFault("recalibration of " + std::string(channel_name(ch)) +
                          " timed out before reaching ambient pressure");
    }
  }
}

void ControlLoop::run_for(double seconds) {
  const auto n = static_cast<std::uint64_t>(std::llround(seconds * cfg_.controller.tick_rate));
  for (std::uint64_t k = 0; k < n; ++k) step();
}

CalibrationEvent ControlLoop::recalibrate(ChannelId ch) {
  start_recalibration(ch);
  const auto before = events_.size();
  while (events_.size() == before) step();
  return events_.back();
}

void ControlLoop::restore(std::uint64_t tick, const PerChannel<double>& true_mass,
                          const PerChannel<double>& estimated_mass,
                          const PerChannel<double>& setpoints) {
  tick_ = tick;
  for (std::size_t i = 0; i < kChannelCount; ++i) {
    if (!(true_mass[i] >= 0.0 && estimated_mass[i] >= 0.0))
      throw DomainError("restored masses must be non-negative");
    plant_.chambers[i].mass = true_mass[i];
    est_.estimated_mass[i] = estimated_mass[i];
  }
  set_setpoints(setpoints);
  settle_hand();
}

}  // namespace pneumahand
