#pragma once

// Ideal-gas chamber plant, binary valve bank, reservoirs and pressure sensing.
//
// All pressures are absolute unless a name says "gauge". Masses are kg,
// volumes m^3, temperatures K, times s.

#include <cstdint>

#include "pneumahand/channels.hpp"

namespace pneumahand {

inline constexpr double kAirGasConstant = 287.05;       // J/(kg K)
inline constexpr double kAtmosphericPressure = 101325.0;  // Pa
inline constexpr double kRoomTemperature = 293.15;      // K

// p = m R T / V. Throws DomainError for V <= 0, T <= 0 or m < 0.
double chamber_pressure(double mass, double volume, double temperature);

// Inverse of chamber_pressure: the mass that yields `pressure` in `volume`.
double chamber_mass(double pressure, double volume, double temperature);

// Linear forward model of a valve: flow = k (p_up - p_down). Positive flow
// runs from upstream to downstream.
double valve_mass_flow(double upstream_p, double downstream_p, double flow_coefficient);

struct ChamberState {
  double mass = 0.0;
  double volume = 1e-6;
  double temperature = kRoomTemperature;

  double pressure() const { return chamber_pressure(mass, volume, temperature); }
  double gauge_pressure(double atmosphere = kAtmosphericPressure) const {
    return pressure() - atmosphere;
  }

  // Chamber at ambient pressure for the given volume.
  static ChamberState vented(double volume, double temperature = kRoomTemperature,
                             double atmosphere = kAtmosphericPressure);
};

struct Reservoir {
  double pressure = kAtmosphericPressure;

  static Reservoir supply_gauge(double gauge) { return {kAtmosphericPressure + gauge}; }
  static Reservoir atmosphere() { return {kAtmosphericPressure}; }
};

struct ValveCommand {
  bool inflate = false;
  bool vent = false;

  friend bool operator==(const ValveCommand&, const ValveCommand&) = default;
};

// Binary inflate/vent valve pair per channel with a minimum dwell between
// state changes of any single valve.
class ValveBank {
public:
  explicit ValveBank(double max_switch_rate = 300.0);

  double max_switch_rate() const { return max_switch_rate_; }
  double min_dwell() const { return 1.0 / max_switch_rate_; }

  const ValveCommand& state(ChannelId ch) const { return state_[index(ch)]; }
  const PerChannel<ValveCommand>& states() const { return state_; }

  // Whether the inflate (or vent) valve of `ch` may change state at `now`.
  bool may_switch_inflate(ChannelId ch, double now) const;
  bool may_switch_vent(ChannelId ch, double now) const;

  // Applies the desired command at time `now`. Each valve whose change would
  // come sooner than min_dwell() after its previous change keeps its current
  // state. Returns the state actually in force.
  ValveCommand request(ChannelId ch, const ValveCommand& desired, double now);

  double last_inflate_switch(ChannelId ch) const { return last_inflate_[index(ch)]; }
  double last_vent_switch(ChannelId ch) const { return last_vent_[index(ch)]; }

private:
  bool dwell_elapsed(double last, double now) const;

  double max_switch_rate_;
  PerChannel<ValveCommand> state_{};
  PerChannel<double> last_inflate_;
  PerChannel<double> last_vent_;
};

struct ChannelFlow {
  double inflate = 1e-9;  // kg/(s Pa)
  double vent = 1e-9;
};

struct PlantParams {
  Reservoir supply = Reservoir::supply_gauge(400e3);
  Reservoir atmosphere = Reservoir::atmosphere();
  double temperature = kRoomTemperature;
  PerChannel<ChannelFlow> flow{};
};

struct PlantState {
  PerChannel<ChamberState> chambers{};
};

// Advances every chamber by one explicit Euler step of length dt using the
// valve states in `valves`, then recomputes pressures in `volumes`.
// Throws DomainError for dt <= 0.
PlantState step_plant(const PlantState& state, const PerChannel<ValveCommand>& valves,
                      const PerChannel<double>& volumes, const PlantParams& params, double dt);

// Net mass flow into one chamber for a given valve state.
double chamber_inflow(const ChamberState& chamber, const ValveCommand& valves,
                      const ChannelFlow& flow, const PlantParams& params);

struct PressureSensorModel {
  double full_scale = 250e3;        // Pa (gauge span)
  double accuracy_fraction = 0.014;  // 3 sigma, relative to full_scale
  std::uint64_t noise_seed = 0;

  double sigma() const { return accuracy_fraction * full_scale / 3.0; }
};

// Noisy reading of `true_p`. Deterministic in (seed, tick, channel).
double read_pressure(double true_p, const PressureSensorModel& sensor, std::uint64_t tick,
                     std::uint32_t channel = 0);

// Zero-mean unit normal draw keyed by (seed, stream, a, b). Shared by every
// component that needs reproducible noise.
double keyed_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t a, std::uint64_t b);

}  // namespace pneumahand
