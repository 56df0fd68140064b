#pragma once

// Run configuration: an INI file with [circuit], [control],
// [operating_point], [sim] and optional [sweep] sections.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfm/core_model.hpp"
#include "gfm/emt_sim.hpp"
#include "gfm/experiments.hpp"

namespace gfm::cli {

/// Invalid configuration. `field()` is "section.key" where known.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& msg)
      : std::runtime_error(field.empty() ? msg : field + ": " + msg), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct SweepSection {
  SweepParam param = SweepParam::Scr;
  std::vector<double> grid;
};

struct RunConfig {
  CircuitParams circuit;
  ControlParams ctrl;
  OperatingMode mode = OperatingMode::LightLoad;
  double p_ref = 0.0;
  SimConfig sim;
  double step = 0.1;       // p_ref step for simulate
  double scan_amplitude = 0.01;
  std::optional<SweepSection> sweep;
};

namespace detail {

using boost::property_tree::ptree;

inline const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"circuit", {"omega1_hz", "l_f_pu", "r_pu", "l_g_pu", "scr", "v_g_pu"}},
      {"control", {"scheme", "k_p_per_omega1", "g_a", "k_i", "r_a", "v_ref", "vff"}},
      {"operating_point", {"mode", "p_ref"}},
      {"sim",
       {"dt", "t_end", "integrator", "decimation", "preamble", "grid_resistance_pu", "divergence_limit",
        "step", "scan_amplitude"}},
      {"sweep", {"param", "start", "stop", "points", "values"}},
  };
  return keys;
}

inline double to_double(const std::string& field, std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  double v = 0.0;
  const char* first = s.data() + b;
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || !std::isfinite(v)) {
    throw ConfigError(field, "expected a finite number, got '" + s + "'");
  }
  return v;
}

inline bool to_bool(const std::string& field, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(field, "expected true/false, got '" + s + "'");
}

class Reader {
 public:
  explicit Reader(const ptree& t) : t_(t) {}

  std::optional<std::string> get(const std::string& section, const std::string& key) const {
    const auto sec = t_.get_child_optional(section);
    if (!sec) return std::nullopt;
    const auto v = sec->get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return *v;
  }
  double num(const std::string& section, const std::string& key, double fallback) const {
    const auto v = get(section, key);
    return v ? to_double(section + "." + key, *v) : fallback;
  }
  std::optional<double> num(const std::string& section, const std::string& key) const {
    const auto v = get(section, key);
    if (!v) return std::nullopt;
    return to_double(section + "." + key, *v);
  }
  bool has_section(const std::string& s) const { return static_cast<bool>(t_.get_child_optional(s)); }

 private:
  const ptree& t_;
};

template <class F>
auto field(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(name, e.what());
  }
}

inline std::vector<double> parse_list(const std::string& field_name, const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    bool blank = true;
    for (char ch : item) blank &= std::isspace(static_cast<unsigned char>(ch)) != 0;
    if (blank) continue;
    out.push_back(to_double(field_name, item));
  }
  return out;
}

}  // namespace detail

inline RunConfig parse_config(std::istream& in) {
  detail::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("", std::string("malformed config: ") + e.message() + " at line " +
                              std::to_string(e.line()));
  }
  for (const auto& [section, body] : tree) {
    const auto it = detail::known_keys().find(section);
    if (it == detail::known_keys().end()) throw ConfigError(section, "unknown section");
    for (const auto& kv : body) {
      if (!it->second.contains(kv.first)) throw ConfigError(section + "." + kv.first, "unknown key");
    }
  }
  const detail::Reader r(tree);
  RunConfig cfg;

  // circuit
  CircuitParams& c = cfg.circuit;
  c.omega1 = kTwoPi * r.num("circuit", "omega1_hz", 50.0);
  c.l_f = r.num("circuit", "l_f_pu", c.l_f);
  c.r = r.num("circuit", "r_pu", c.r);
  c.v_g = r.num("circuit", "v_g_pu", c.v_g);
  const auto l_g = r.num("circuit", "l_g_pu");
  const auto scr = r.num("circuit", "scr");
  if (l_g.has_value() == scr.has_value()) {
    throw ConfigError("circuit.l_g_pu/circuit.scr", "exactly one of l_g_pu and scr must be given");
  }
  c.l_g = l_g ? *l_g : detail::field("circuit.scr", [&] { return scr_to_lg(*scr); });
  detail::field("circuit", [&] { c.validate(); return 0; });

  // control
  ControlParams& k = cfg.ctrl;
  const auto scheme = r.get("control", "scheme");
  k.scheme = scheme ? detail::field("control.scheme", [&] { return scheme_from_string(*scheme); })
                    : Scheme::Scheme1;
  k.k_p = r.num("control", "k_p_per_omega1", 0.03) * c.omega1;
  k.g_a = r.num("control", "g_a", 0.0);
  k.k_i = r.num("control", "k_i", 0.0);
  k.r_a = r.num("control", "r_a", 0.0);
  k.v_ref = r.num("control", "v_ref", 1.0);
  const auto vff = r.get("control", "vff");
  k.vff_enabled = vff ? detail::to_bool("control.vff", *vff) : k.uses_cc();
  if (k.vff_enabled && !k.uses_cc()) throw ConfigError("control.vff", "feedforward needs current control");
  detail::field("control", [&] { k.validate(); return 0; });

  // operating point
  const auto mode = r.get("operating_point", "mode");
  cfg.mode = mode ? detail::field("operating_point.mode", [&] { return operating_mode_from_string(*mode); })
                  : OperatingMode::LightLoad;
  cfg.p_ref = r.num("operating_point", "p_ref", 0.0);
  if (cfg.mode == OperatingMode::LightLoad && cfg.p_ref != 0.0) {
    throw ConfigError("operating_point.p_ref", "light_load requires p_ref = 0");
  }

  // sim
  SimConfig& s = cfg.sim;
  s.dt = r.num("sim", "dt", s.dt);
  s.t_end = r.num("sim", "t_end", s.t_end);
  if (const auto integ = r.get("sim", "integrator")) {
    s.integrator = detail::field("sim.integrator", [&] { return integrator_from_string(*integ); });
  }
  const double dec = r.num("sim", "decimation", static_cast<double>(s.decimation));
  if (!(dec >= 1.0) || dec != std::floor(dec)) throw ConfigError("sim.decimation", "must be an integer >= 1");
  s.decimation = static_cast<std::size_t>(dec);
  s.preamble = r.num("sim", "preamble", s.preamble);
  s.grid_resistance = r.num("sim", "grid_resistance_pu", s.grid_resistance);
  s.divergence_limit = r.num("sim", "divergence_limit", s.divergence_limit);
  cfg.step = r.num("sim", "step", cfg.step);
  cfg.scan_amplitude = r.num("sim", "scan_amplitude", cfg.scan_amplitude);
  detail::field("sim", [&] { s.validate(); return 0; });
  if (!(s.divergence_limit > 0.0)) throw ConfigError("sim.divergence_limit", "must be positive");
  if (!(cfg.scan_amplitude > 0.0)) throw ConfigError("sim.scan_amplitude", "must be positive");

  // sweep
  if (r.has_section("sweep")) {
    SweepSection sw;
    const auto param = r.get("sweep", "param");
    if (!param) throw ConfigError("sweep.param", "missing");
    sw.param = detail::field("sweep.param", [&] { return sweep_param_from_string(*param); });
    if (const auto values = r.get("sweep", "values")) {
      if (r.get("sweep", "start") || r.get("sweep", "stop") || r.get("sweep", "points")) {
        throw ConfigError("sweep.values", "give either values or start/stop/points, not both");
      }
      sw.grid = detail::parse_list("sweep.values", *values);
    } else {
      const auto start = r.num("sweep", "start");
      const auto stop = r.num("sweep", "stop");
      if (!start || !stop) throw ConfigError("sweep.start/sweep.stop", "missing");
      const double n = r.num("sweep", "points", 25.0);
      if (!(n >= 0.0) || n != std::floor(n)) throw ConfigError("sweep.points", "must be a non-negative integer");
      if (n >= 2.0) sw.grid = lin_space(*start, *stop, static_cast<std::size_t>(n));
      else if (n == 1.0) sw.grid = {*start};
    }
    if (sw.grid.empty()) throw ConfigError("sweep.values", "empty grid");
    SweepSpec probe;
    probe.grid = sw.grid;
    detail::field("sweep.values", [&] { probe.validate(); return 0; });
    cfg.sweep = std::move(sw);
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
  return parse_config(in);
}

}  // namespace gfm::cli
