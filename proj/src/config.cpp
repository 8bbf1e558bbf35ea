#include "pneumahand/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "pneumahand/errors.hpp"

namespace pneumahand {

namespace {

std::string shortest(double v) {
  if (std::isnan(v)) return ".nan";
  if (std::isinf(v)) return v > 0 ? ".inf" : "-.inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  // YAML 1.1 readers need a '.' to see a float.
  if (s.find('.') == std::string::npos) {
    const auto e = s.find('e');
    if (e == std::string::npos) s += ".0";
    else s.insert(e, ".0");
  }
  return s;
}

class Reader {
public:
  Reader(YAML::Node node, const std::string& file, std::string path)
      : node_(std::move(node)), file_(file), path_(std::move(path)) {
    if (!node_.IsMap()) fail(node_, (path_.empty() ? "document" : path_) + " must be a mapping");
  }

  void num(const std::string& key, double& out) {
    if (auto n = take(key)) out = as<double>(n, key, "a number");
  }
  void integer(const std::string& key, int& out) {
    if (auto n = take(key)) out = as<int>(n, key, "an integer");
  }
  void u64(const std::string& key, std::uint64_t& out) {
    if (auto n = take(key)) out = as<std::uint64_t>(n, key, "a non-negative integer");
  }
  void str(const std::string& key, std::string& out) {
    if (auto n = take(key)) out = as<std::string>(n, key, "a string");
  }
  void vec3(const std::string& key, Eigen::Vector3d& out) {
    if (auto n = take(key)) out = read_vec3(n, key);
  }
  void opt_num(const std::string& key, std::optional<double>& out) {
    if (auto n = take(key)) out = as<double>(n, key, "a number");
  }
  void opt_vec3(const std::string& key, std::optional<Eigen::Vector3d>& out) {
    if (auto n = take(key)) out = read_vec3(n, key);
  }
  void arm_table(const std::string& key, std::vector<MomentArmPoint>& out) {
    auto n = take(key);
    if (!n) return;
    if (!n.IsSequence()) fail(n, qualified(key) + " must be a list of [angle_rad, arm_m] pairs");
    out.clear();
    for (const auto& e : n) {
      if (!e.IsSequence() || e.size() != 2)
        fail(e, qualified(key) + " entries must be [angle_rad, arm_m] pairs");
      out.push_back({as<double>(e[0], key, "a number"), as<double>(e[1], key, "a number")});
    }
  }
  template <class F>
  void section(const std::string& key, F&& fn) {
    if (auto n = take(key)) {
      Reader sub(n, file_, qualified(key));
      fn(sub);
      sub.finish();
    }
  }
  bool has(const std::string& key) const { return static_cast<bool>(node_[key]); }

  void finish() const {
    for (const auto& kv : node_) {
      const auto k = kv.first.as<std::string>();
      if (!seen_.count(k)) fail(kv.first, "unknown key '" + qualified(k) + "'");
    }
  }

  [[noreturn]] void fail(const YAML::Node& n, const std::string& what) const {
    throw FormatError(file_ + ":" + std::to_string(n.Mark().line + 1), what);
  }

private:
  YAML::Node take(const std::string& key) {
    seen_.insert(key);
    const YAML::Node& cn = node_;
    return cn[key];
  }
  std::string qualified(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  template <class T>
  T as(const YAML::Node& n, const std::string& key, const char* expected) const {
    if (!n.IsScalar()) fail(n, qualified(key) + " must be " + expected);
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, qualified(key) + " must be " + expected + ", got '" + n.Scalar() + "'");
    }
  }
  Eigen::Vector3d read_vec3(const YAML::Node& n, const std::string& key) const {
    if (!n.IsSequence() || n.size() != 3) fail(n, qualified(key) + " must be [x, y, z]");
    return {as<double>(n[0], key, "a number"), as<double>(n[1], key, "a number"),
            as<double>(n[2], key, "a number")};
  }

  YAML::Node node_;
  const std::string& file_;
  std::string path_;
  std::set<std::string> seen_;
};

class Writer {
public:
  explicit Writer(YAML::Emitter& e) : e_(e) {}

  void num(const std::string& key, double& v) { e_ << YAML::Key << key << YAML::Value << shortest(v); }
  void integer(const std::string& key, int& v) { e_ << YAML::Key << key << YAML::Value << v; }
  void u64(const std::string& key, std::uint64_t& v) { e_ << YAML::Key << key << YAML::Value << v; }
  void str(const std::string& key, std::string& v) {
    e_ << YAML::Key << key << YAML::Value << YAML::DoubleQuoted << v;
  }
  void vec3(const std::string& key, Eigen::Vector3d& v) {
    e_ << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (int i = 0; i < 3; ++i) e_ << shortest(v[i]);
    e_ << YAML::EndSeq;
  }
  void opt_num(const std::string& key, std::optional<double>& v) {
    if (v) num(key, *v);
  }
  void opt_vec3(const std::string& key, std::optional<Eigen::Vector3d>& v) {
    if (v) vec3(key, *v);
  }
  void arm_table(const std::string& key, std::vector<MomentArmPoint>& table) {
    e_ << YAML::Key << key << YAML::Value << YAML::BeginSeq;
    for (const auto& p : table)
      e_ << YAML::Flow << YAML::BeginSeq << shortest(p.angle) << shortest(p.arm) << YAML::EndSeq;
    e_ << YAML::EndSeq;
  }
  template <class F>
  void section(const std::string& key, F&& fn) {
    e_ << YAML::Key << key << YAML::Value << YAML::BeginMap;
    fn(*this);
    e_ << YAML::EndMap;
  }
  bool has(const std::string&) const { return true; }

private:
  YAML::Emitter& e_;
};

constexpr std::array<std::string_view, 4> kFingerKeys = {"index", "middle", "ring", "little"};

template <class V>
void visit_compartment(V& v, PneuFlexCompartmentSpec& c) {
  v.num("arc_length_m", c.arc_length);
  v.num("max_pressure_pa", c.max_pressure);
  v.num("pressure_to_bend_gain_rad_per_pa", c.pressure_to_bend_gain);
  v.num("bend_stiffness_nm_per_rad", c.bend_stiffness);
  v.num("rest_volume_m3", c.rest_volume);
  v.num("volume_per_bend_m3_per_rad", c.volume_per_bend);
}

template <class V>
void visit_bellow(V& v, BellowJoint& j) {
  auto& b = j.bellow;
  v.num("pouch_area_m2", b.pouch_area);
  v.integer("pouch_count", b.pouch_count);
  v.num("max_pressure_pa", b.max_pressure);
  v.num("max_opening_rad", b.max_opening);
  v.num("deflated_thickness_m", b.deflated_thickness);
  v.num("volume_per_rad_m3", b.volume_per_rad);
  v.num("hinge_stiffness_nm_per_rad", j.hinge_stiffness);
  v.arm_table("moment_arm", b.moment_arm_table);
}

// `explicit_tip_stiffness` records which fingers carried the key, so the rest
// can be recalibrated from their (possibly edited) compartments.
template <class V>
void visit(V& v, AppConfig& c, std::array<bool, 4>& explicit_tip_stiffness) {
  auto& rig = c.rig;
  v.section("gas", [&](auto& s) {
    s.num("temperature_k", rig.plant.temperature);
    s.num("atmosphere_pa", rig.plant.atmosphere.pressure);
    s.num("supply_pa", rig.plant.supply.pressure);
  });
  v.section("sensor", [&](auto& s) {
    s.num("full_scale_pa", rig.sensor.full_scale);
    s.num("accuracy_fraction", rig.sensor.accuracy_fraction);
    s.u64("noise_seed", rig.sensor.noise_seed);
  });
  v.section("valves", [&](auto& s) {
    s.num("max_switch_rate_hz", rig.valve_max_switch_rate);
    s.section("flow_kg_per_s_pa", [&](auto& f) {
      for (auto ch : kAllChannels)
        f.section(std::string(channel_name(ch)), [&](auto& e) {
          e.num("inflate", rig.plant.flow[index(ch)].inflate);
          e.num("vent", rig.plant.flow[index(ch)].vent);
        });
    });
  });
  v.section("controller", [&](auto& s) {
    s.num("tick_rate_hz", rig.controller.tick_rate);
    s.num("supply_pa", rig.controller.supply_pressure);
    s.num("atmosphere_pa", rig.controller.atmosphere_pressure);
    s.section("hysteresis_band_kg", [&](auto& f) {
      for (auto ch : kAllChannels) f.num(std::string(channel_name(ch)), rig.controller.hysteresis_band[index(ch)]);
    });
    s.section("estimator_flow_kg_per_s_pa", [&](auto& f) {
      for (auto ch : kAllChannels)
        f.section(std::string(channel_name(ch)), [&](auto& e) {
          e.num("inflate", rig.controller.flow[index(ch)].inflate);
          e.num("vent", rig.controller.flow[index(ch)].vent);
        });
    });
    s.integer("plant_substeps", rig.plant_substeps);
  });
  v.section("recalibration", [&](auto& s) {
    s.num("threshold_pa", rig.recalibration_threshold);
    s.num("hold_s", rig.recalibration_hold);
    s.num("timeout_s", rig.recalibration_timeout);
  });
  v.section("service", [&](auto& s) {
    s.num("telemetry_rate_hz", c.telemetry_rate);
    s.str("session_file", c.session_file);
  });
  auto& hand = rig.hand;
  v.section("hand", [&](auto& h) {
    h.section("fingers", [&](auto& fs) {
      for (std::size_t i = 0; i < 4; ++i)
        fs.section(std::string(kFingerKeys[i]), [&](auto& f) {
          auto& m = hand.fingers[i];
          f.vec3("mount_m", m.base);
          f.num("max_tip_force_n", m.spec.max_tip_force);
          if (f.has("tip_stiffness_n_per_m")) explicit_tip_stiffness[i] = true;
          f.num("tip_stiffness_n_per_m", m.spec.tip_stiffness);
          f.section("base", [&](auto& e) { visit_compartment(e, m.spec.base); });
          f.section("tip", [&](auto& e) { visit_compartment(e, m.spec.tip); });
        });
    });
    h.section("thumb", [&](auto& t) {
      auto& g = hand.thumb;
      t.vec3("base_m", g.base);
      t.num("proximal_mount_rad", g.proximal_mount);
      t.num("middle_mount_rad", g.middle_mount);
      t.num("distal_mount_rad", g.distal_mount);
      t.num("proximal_link_m", g.proximal_link);
      t.num("middle_link_m", g.middle_link);
      t.num("distal_link_m", g.distal_link);
      t.section("tip", [&](auto& e) { visit_compartment(e, hand.thumb_tip); });
    });
    h.section("bellows", [&](auto& bs) {
      for (auto ch : kAllChannels)
        if (is_bellow(ch))
          bs.section(std::string(channel_name(ch)), [&](auto& b) { visit_bellow(b, hand.bellow(ch)); });
    });
    h.num("palm_axis_x_m", hand.palm_axis_x);
    h.vec3("distal_palmar_crease_m", hand.distal_palmar_crease);
    h.num("digit_half_width_m", hand.digit_half_width);
    h.num("digit_half_thickness_m", hand.digit_half_thickness);
    h.num("contact_tolerance_m", hand.contact_tolerance);
  });
  v.section("pullout", [&](auto& p) {
    auto& po = c.pullout;
    p.num("sphere_diameter_m", po.sphere_diameter);
    p.opt_vec3("sphere_center_m", po.sphere_center);
    p.num("friction", po.friction);
    p.num("thumb_stiffness_n_per_m", po.thumb_stiffness);
    p.num("thumb_max_force_n", po.thumb_max_force);
    p.section("anchors_n", [&](auto& a) {
      for (std::size_t k = 0; k < kPullDirections; ++k) {
        std::optional<double> val;
        if (!std::isnan(po.anchors[k])) val = po.anchors[k];
        a.opt_num(std::string(pull_direction_name(static_cast<PullDirection>(k))), val);
        po.anchors[k] = val.value_or(NAN);
      }
    });
  });
}

}  // namespace

AppConfig default_config() { return AppConfig{}; }

AppConfig parse_config(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw FormatError(source + ":" + std::to_string(e.mark.line + 1), e.msg);
  }
  if (!root || root.IsNull()) throw FormatError(source + ":1", "empty config");
  Reader top(root, source, "");
  std::string format, version;
  top.str("format", format);
  top.str("version", version);
  if (format != kConfigFormat)
    top.fail(root["format"] ? root["format"] : root, "format must be '" + std::string(kConfigFormat) + "'");
  int major = -1;
  {
    const auto dot = version.find('.');
    const std::string head = version.substr(0, dot);
    auto res = std::from_chars(head.data(), head.data() + head.size(), major);
    if (res.ec != std::errc() || res.ptr != head.data() + head.size()) major = -1;
  }
  if (major != kConfigMajorVersion)
    top.fail(root["version"] ? root["version"] : root,
             "unsupported config version '" + version + "' (expected " +
                 std::to_string(kConfigMajorVersion) + ".x)");

  AppConfig cfg = default_config();
  std::array<bool, 4> explicit_tip{};
  visit(top, cfg, explicit_tip);
  top.finish();

  try {
    for (std::size_t i = 0; i < 4; ++i) {
      cfg.rig.hand.fingers[i].spec.validate();
      if (!explicit_tip[i])
        cfg.rig.hand.fingers[i].spec.tip_stiffness = calibrate_tip_stiffness(cfg.rig.hand.fingers[i].spec);
    }
    cfg.rig.validate();
    if (!(cfg.telemetry_rate > 0.0)) throw ValidationError("service.telemetry_rate_hz must be positive");
    if (!(cfg.pullout.sphere_diameter > 0.0)) throw ValidationError("pullout.sphere_diameter_m must be positive");
  } catch (const std::exception& e) {
    throw ValidationError(source + ": " + e.what());
  }
  return cfg;
}

AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path, "cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string dump_config(const AppConfig& cfg) {
  AppConfig copy = cfg;
  YAML::Emitter e;
  e << YAML::BeginMap;
  e << YAML::Key << "format" << YAML::Value << kConfigFormat;
  e << YAML::Key << "version" << YAML::Value << YAML::DoubleQuoted
    << (std::to_string(kConfigMajorVersion) + ".0");
  Writer w(e);
  std::array<bool, 4> unused{};
  visit(w, copy, unused);
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

std::string dump_bellow_fragment(const AppConfig& cfg, ChannelId ch, const std::string& comment) {
  if (!is_bellow(ch)) throw DomainError(std::string(channel_name(ch)) + " is not a bellow channel");
  AppConfig copy = cfg;
  YAML::Emitter e;
  if (!comment.empty()) e << YAML::Comment(comment) << YAML::Newline;
  e << YAML::BeginMap;
  e << YAML::Key << "format" << YAML::Value << kConfigFormat;
  e << YAML::Key << "version" << YAML::Value << YAML::DoubleQuoted
    << (std::to_string(kConfigMajorVersion) + ".0");
  Writer w(e);
  w.section("hand", [&](auto& h) {
    h.section("bellows", [&](auto& b) {
      b.section(std::string(channel_name(ch)), [&](auto& j) { visit_bellow(j, copy.rig.hand.bellow(ch)); });
    });
  });
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_digest(const AppConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(dump_config(cfg))));
  return buf;
}

std::optional<std::string> resolve_config_path(const std::string& explicit_path) {
  if (!explicit_path.empty()) return explicit_path;
  if (const char* env = std::getenv("PNEUMAHAND_CONFIG"); env && *env) return std::string(env);
  return std::nullopt;
}

ExperimentContext make_context(const AppConfig& cfg, std::optional<std::uint64_t> seed) {
  AppConfig effective = cfg;
  if (seed) effective.rig.sensor.noise_seed = *seed;
  ExperimentContext ctx;
  ctx.rig = effective.rig;
  ctx.pullout = effective.pullout;
  ctx.seed = effective.rig.sensor.noise_seed;
  ctx.config_digest = config_digest(effective);
  return ctx;
}

}  // namespace pneumahand
