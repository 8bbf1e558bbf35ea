#include "pneumahand/pneumatics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pneumahand/errors.hpp"

namespace pneumahand {

double chamber_pressure(double mass, double volume, double temperature) {
  if (!(volume > 0.0)) throw DomainError("chamber volume must be positive");
  if (!(temperature > 0.0)) throw DomainError("chamber temperature must be positive");
  if (!(mass >= 0.0)) throw DomainError("chamber mass must be non-negative");
  return mass * kAirGasConstant * temperature / volume;
}

double chamber_mass(double pressure, double volume, double temperature) {
  if (!(volume > 0.0)) throw DomainError("chamber volume must be positive");
  if (!(temperature > 0.0)) throw DomainError("chamber temperature must be positive");
  return std::max(0.0, pressure) * volume / (kAirGasConstant * temperature);
}

double valve_mass_flow(double upstream_p, double downstream_p, double flow_coefficient) {
  return flow_coefficient * (upstream_p - downstream_p);
}

ChamberState ChamberState::vented(double volume, double temperature, double atmosphere) {
  return {chamber_mass(atmosphere, volume, temperature), volume, temperature};
}

ValveBank::ValveBank(double max_switch_rate) : max_switch_rate_(max_switch_rate) {
  if (!(max_switch_rate > 0.0)) throw DomainError("valve switch rate must be positive");
  last_inflate_.fill(-INFINITY);
  last_vent_.fill(-INFINITY);
}

// Tick times are accumulated in floating point; a relative slack of 1e-9 of
// the dwell keeps a switch on every tick of a 300 Hz loop legal.
bool ValveBank::dwell_elapsed(double last, double now) const {
  return now - last >= min_dwell() * (1.0 - 1e-9);
}

bool ValveBank::may_switch_inflate(ChannelId ch, double now) const {
  return dwell_elapsed(last_inflate_[index(ch)], now);
}

bool ValveBank::may_switch_vent(ChannelId ch, double now) const {
  return dwell_elapsed(last_vent_[index(ch)], now);
}

ValveCommand ValveBank::request(ChannelId ch, const ValveCommand& desired, double now) {
  auto& cur = state_[index(ch)];
  if (desired.inflate != cur.inflate && may_switch_inflate(ch, now)) {
    cur.inflate = desired.inflate;
    last_inflate_[index(ch)] = now;
  }
  if (desired.vent != cur.vent && may_switch_vent(ch, now)) {
    cur.vent = desired.vent;
    last_vent_[index(ch)] = now;
  }
  return cur;
}

double chamber_inflow(const ChamberState& chamber, const ValveCommand& valves,
                      const ChannelFlow& flow, const PlantParams& params) {
  const double p = chamber.pressure();
  double dm = 0.0;
  if (valves.inflate) dm += valve_mass_flow(params.supply.pressure, p, flow.inflate);
  if (valves.vent) dm += valve_mass_flow(params.atmosphere.pressure, p, flow.vent);
  return dm;
}

PlantState step_plant(const PlantState& state, const PerChannel<ValveCommand>& valves,
                      const PerChannel<double>& volumes, const PlantParams& params, double dt) {
  if (!(dt > 0.0)) throw DomainError("plant step must be positive");
  PlantState next = state;
  for (std::size_t i = 0; i < kChannelCount; ++i) {
    auto& c = next.chambers[i];
    const auto& v = valves[i];
    if (v.inflate || v.vent) {
      c.mass = std::max(0.0, c.mass + chamber_inflow(c, v, params.flow[i], params) * dt);
    }
    if (!(volumes[i] > 0.0)) throw DomainError("chamber volume must be positive");
    c.volume = volumes[i];
    c.temperature = params.temperature;
  }
  return next;
}

namespace {

// Counter-based bit source: splitmix64 over a key mixed from the call's
// coordinates, so each (seed, stream, a, b) gets its own cheap stream.
class SplitMix64 {
public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t state) : state_(state) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

private:
  std::uint64_t state_;
};

}  // namespace

double keyed_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t a, std::uint64_t b) {
  std::uint64_t key = 0;
  for (std::uint64_t part : {seed, stream, a, b}) key = SplitMix64(key ^ part)();
  SplitMix64 gen(key);
  std::normal_distribution<double> unit(0.0, 1.0);
  return unit(gen);
}

double read_pressure(double true_p, const PressureSensorModel& sensor, std::uint64_t tick,
                     std::uint32_t channel) {
  if (sensor.accuracy_fraction == 0.0) return true_p;
  return true_p + sensor.sigma() * keyed_normal(sensor.noise_seed, 0x5e45, tick, channel);
}

}  // namespace pneumahand
