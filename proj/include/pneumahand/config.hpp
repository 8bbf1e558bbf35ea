#pragma once

// YAML configuration for the rig, hand model and experiments.

#include <cstdint>
#include <optional>
#include <string>

#include "pneumahand/experiments.hpp"

namespace pneumahand {

inline constexpr const char* kConfigFormat = "pneumahand-config";
inline constexpr int kConfigMajorVersion = 1;

struct AppConfig {
  RigConfig rig;
  PulloutConfig pullout;
  double telemetry_rate = 30.0;  // Hz
  std::string session_file;      // empty: sessions are not persisted
};

// Defaults (tip stiffness and hinge stiffness derived as in default_hand_model).
AppConfig default_config();

// Keys not listed in the schema, type mismatches and bad versions throw
// FormatError whose where() is "file:line". Semantic checks throw
// ValidationError prefixed with the file name.
AppConfig parse_config(const std::string& text, const std::string& source = "<config>");
AppConfig load_config(const std::string& path);

// Canonical text: every field written, shortest round-trip numbers.
std::string dump_config(const AppConfig& cfg);

// Loadable partial config holding only hand.bellows.<ch>.
std::string dump_bellow_fragment(const AppConfig& cfg, ChannelId ch, const std::string& comment = "");

// FNV-1a 64 of dump_config, as 16 hex digits.
std::string config_digest(const AppConfig& cfg);
std::uint64_t fnv1a64(std::string_view data);

// Explicit path, else $PNEUMAHAND_CONFIG, else nullopt (use defaults).
std::optional<std::string> resolve_config_path(const std::string& explicit_path);

// `seed` overrides sensor.noise_seed; the digest covers the effective config.
ExperimentContext make_context(const AppConfig& cfg, std::optional<std::uint64_t> seed = {});

}  // namespace pneumahand
