#pragma once

// Fixed-volume co-simulation of estimator, valves and plant for long drift
// runs; skips the hand so 10^4 cycles stay fast.

#include <algorithm>
#include <cmath>
#include <vector>

#include "pneumahand/control.hpp"

namespace pneumahand::testing {

struct DriftTrace {
  std::vector<int> cycles;
  std::vector<double> drift;  // true - estimate at each checkpoint, kg
  double final_drift = 0.0;
  std::uint64_t ticks = 0;
  double min_switch_interval = INFINITY;  // s, over every valve of every channel
};

// Cycles `ch` between 50 and 150 kPa gauge at volume `volume`, recording the
// estimate error at the given cycle counts.
inline DriftTrace estimator_drift(const RigConfig& rig, ChannelId ch, double volume,
                                  std::vector<int> checkpoints) {
  std::sort(checkpoints.begin(), checkpoints.end());
  const double T = rig.plant.temperature, atm = rig.plant.atmosphere.pressure;
  const double dt = rig.controller.tick();
  const double lo = chamber_mass(atm + 50e3, volume, T);
  const double hi = chamber_mass(atm + 150e3, volume, T);
  const auto i = index(ch);

  PlantState plant;
  MassEstimatorState est;
  PerChannel<double> sp{}, volumes{};
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    plant.chambers[c] = ChamberState::vented(volume, T, atm);
    volumes[c] = volume;
    est.estimated_mass[c] = plant.chambers[c].mass;
    est.last_measured_pressure[c] = atm;
    sp[c] = plant.chambers[c].mass;
  }
  ValveBank bank(rig.valve_max_switch_rate);
  sp[i] = hi;
  bool rising = true;
  int cycle = 0;
  std::size_t next = 0;
  DriftTrace out;
  std::uint64_t tick = 0;
  PerChannel<double> last_in, last_vent;
  last_in.fill(-INFINITY);
  last_vent.fill(-INFINITY);
  auto track = [&](double now, double& last) {
    if (now == last) return;
    if (std::isfinite(last)) out.min_switch_interval = std::min(out.min_switch_interval, now - last);
    last = now;
  };
  while (next < checkpoints.size()) {
    PerChannel<double> measured{};
    for (std::size_t c = 0; c < kChannelCount; ++c)
      measured[c] = read_pressure(plant.chambers[c].pressure(), rig.sensor, tick, static_cast<std::uint32_t>(c));
    control_step(est, sp, rig.controller, bank, static_cast<double>(tick) * dt);
    est = estimate_step(est, measured, bank.states(), rig.controller, dt, rig.plant_substeps);
    for (int k = 0; k < rig.plant_substeps; ++k)
      plant = step_plant(plant, bank.states(), volumes, rig.plant, dt / rig.plant_substeps);
    ++tick;
    for (auto c : kAllChannels) {
      track(bank.last_inflate_switch(c), last_in[index(c)]);
      track(bank.last_vent_switch(c), last_vent[index(c)]);
    }
    const auto& v = bank.states()[i];
    const bool settled = !v.inflate && !v.vent &&
                         std::abs(est.estimated_mass[i] - sp[i]) <= 0.5 * rig.controller.hysteresis_band[i];
    if (!settled) continue;
    if (rising) {
      rising = false;
      sp[i] = lo;
    } else {
      rising = true;
      sp[i] = hi;
      ++cycle;
      while (next < checkpoints.size() && checkpoints[next] == cycle) {
        out.cycles.push_back(cycle);
        out.drift.push_back(plant.chambers[i].mass - est.estimated_mass[i]);
        ++next;
      }
    }
  }
  out.final_drift = out.drift.empty() ? 0.0 : out.drift.back();
  out.ticks = tick;
  return out;
}

// Largest per-tick mass change any valve can produce in the rig.
inline double tick_quantum(const RigConfig& rig, ChannelId ch) {
  const auto& f = rig.plant.flow[index(ch)];
  const double dp_in = rig.plant.supply.pressure - rig.plant.atmosphere.pressure;
  return std::max(f.inflate, f.vent) * dp_in * rig.controller.tick();
}

}  // namespace pneumahand::testing
