#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdflow/core.hpp"
#include "crowdflow/eikonal.hpp"
#include "crowdflow/sph.hpp"
#include "crowdflow/uic.hpp"

namespace crowdflow {

enum class SimMode { Eikonal, VisgraphUic, Combined };

inline SimMode sim_mode_from_string(const std::string& s) {
  if (s == "eikonal") return SimMode::Eikonal;
  if (s == "visgraph_uic") return SimMode::VisgraphUic;
  if (s == "combined") return SimMode::Combined;
  throw ValidationError("unknown mode: " + s);
}

inline const char* to_string(SimMode m) {
  switch (m) {
    case SimMode::Eikonal: return "eikonal";
    case SimMode::VisgraphUic: return "visgraph_uic";
    default: return "combined";
  }
}

struct SpeedDistribution {
  enum class Kind { Normal, Uniform } kind = Kind::Normal;
  double mean = 1.44;    // normal parameters
  double stddev = 0.15;
  double lo = 1.0;       // uniform parameters
  double hi = 2.0;

  double sample(Rng& rng) const {
    double v = kind == Kind::Normal ? rng.normal(mean, stddev) : rng.uniform(lo, hi);
    return std::max(v, 0.05);  // clamped positive
  }

  double upper_bound() const {
    return kind == Kind::Normal ? mean + 4.0 * stddev : hi;
  }
};

enum class SpawnKind { Uniform, Disc, Rect, None };

struct SimConfig {
  SimMode mode = SimMode::VisgraphUic;
  double dt = 0.05;
  double t_max = 60.0;
  std::uint64_t seed = 1;
  int grid_nx = 32;
  int grid_ny = 32;

  KernelKind kernel = KernelKind::Wendland;
  double smoothing_h = 0.0;  // 0: derived from the grid in eikonal mode

  SpeedDistribution speed;

  // initial population
  SpawnKind spawn = SpawnKind::Uniform;
  int n_initial = 0;
  Vec2 spawn_disc_center{};
  double spawn_disc_radius = 0.0;
  Rect spawn_rect{};

  // particle parameters
  double particle_radius = 1.0;
  double particle_mass = 1.0;
  double d_min = 0.0;          // 0 disables the minimum-distance diagnostics
  double noise_sigma = 0.0;
  bool correct_min_distance = false;

  // part-I planner
  double alpha = 1.0;
  double beta = 0.0;
  double gamma = 0.0;
  SpeedFieldParams speed_field;
  double obstacle_clearance = 0.0;  // 0: one cell

  // interaction potential
  bool uic_enabled = true;
  PressureParams pressure;

  // part-II planner
  double vg_margin = -1.0;  // <0: one particle diameter
  double vg_sample_dr = 2.0;
  int vg_lookahead = 4;

  std::vector<double> mde_radii{0.1, 0.2, 0.3, 0.5, 1.0};

  double margin() const { return vg_margin >= 0.0 ? vg_margin : 2.0 * particle_radius; }
};

/// Flat key-value configuration file, TOML-style syntax: one
/// `key = value` per line, `#` comments, quoted strings, booleans,
/// numbers and [a, b, ...] numeric arrays.
class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text) {
    ConfigFile cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ParseError("config line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty() || value.empty())
        throw ParseError("config line " + std::to_string(lineno) + ": empty key or value");
      cfg.entries_[key] = value;
    }
    return cfg;
  }

  static ConfigFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::string get_string(const std::string& key) const {
    std::string raw = entries_.at(key);
    if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"')
      raw = raw.substr(1, raw.size() - 2);
    return raw;
  }

  double get_number(const std::string& key) const {
    const std::string raw = entries_.at(key);
    std::size_t consumed = 0;
    const double v = std::stod(raw, &consumed);
    if (consumed != raw.size())
      throw ParseError("config key '" + key + "': not a number: " + raw);
    return v;
  }

  bool get_bool(const std::string& key) const {
    const std::string raw = entries_.at(key);
    if (raw == "true") return true;
    if (raw == "false") return false;
    throw ParseError("config key '" + key + "': expected true or false");
  }

  std::vector<double> get_array(const std::string& key) const {
    const std::string raw = entries_.at(key);
    if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']')
      throw ParseError("config key '" + key + "': expected [a, b, ...]");
    std::vector<double> out;
    std::istringstream in(raw.substr(1, raw.size() - 2));
    std::string item;
    while (std::getline(in, item, ',')) {
      const std::string t = trim(item);
      if (t.empty()) continue;
      out.push_back(std::stod(t));
    }
    return out;
  }

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  static std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
  }

  std::map<std::string, std::string> entries_;
};

/// Materialize a SimConfig from a parsed file; unknown keys are
/// rejected so typos fail loudly.
inline SimConfig make_sim_config(const ConfigFile& file) {
  SimConfig cfg;
  std::map<std::string, bool> seen;
  for (const auto& [key, value] : file.entries()) seen[key] = false;
  auto used = [&](const std::string& key) {
    auto it = seen.find(key);
    if (it != seen.end()) it->second = true;
    return file.has(key);
  };
  auto number = [&](const std::string& key, double fallback) {
    return used(key) ? file.get_number(key) : fallback;
  };
  auto boolean = [&](const std::string& key, bool fallback) {
    return used(key) ? file.get_bool(key) : fallback;
  };
  auto text = [&](const std::string& key, const std::string& fallback) {
    return used(key) ? file.get_string(key) : fallback;
  };

  cfg.mode = sim_mode_from_string(text("mode", "visgraph_uic"));
  cfg.dt = number("dt", cfg.dt);
  cfg.t_max = number("t_max", cfg.t_max);
  cfg.seed = static_cast<std::uint64_t>(number("seed", 1));
  cfg.grid_nx = static_cast<int>(number("grid_nx", cfg.grid_nx));
  cfg.grid_ny = static_cast<int>(number("grid_ny", cfg.grid_ny));
  cfg.kernel = kernel_kind_from_string(text("kernel", "wendland"));
  cfg.smoothing_h = number("smoothing_h", 0.0);

  const std::string dist = text("speed_dist", "normal");
  if (dist == "normal") {
    cfg.speed.kind = SpeedDistribution::Kind::Normal;
    cfg.speed.mean = number("speed_mean", cfg.speed.mean);
    cfg.speed.stddev = number("speed_std", cfg.speed.stddev);
  } else if (dist == "uniform") {
    cfg.speed.kind = SpeedDistribution::Kind::Uniform;
    cfg.speed.lo = number("speed_min", cfg.speed.lo);
    cfg.speed.hi = number("speed_max", cfg.speed.hi);
  } else {
    throw ValidationError("speed_dist must be normal or uniform");
  }

  const std::string spawn = text("spawn", "uniform");
  if (spawn == "uniform")
    cfg.spawn = SpawnKind::Uniform;
  else if (spawn == "disc")
    cfg.spawn = SpawnKind::Disc;
  else if (spawn == "rect")
    cfg.spawn = SpawnKind::Rect;
  else if (spawn == "none")
    cfg.spawn = SpawnKind::None;
  else
    throw ValidationError("spawn must be uniform, disc, rect or none");
  cfg.n_initial = static_cast<int>(number("n_initial", 0));
  cfg.spawn_disc_center.x = number("spawn_disc_cx", 0.0);
  cfg.spawn_disc_center.y = number("spawn_disc_cy", 0.0);
  cfg.spawn_disc_radius = number("spawn_disc_r", 0.0);
  if (used("spawn_rect")) {
    const auto r = file.get_array("spawn_rect");
    if (r.size() != 4) throw ValidationError("spawn_rect needs [x0,y0,x1,y1]");
    cfg.spawn_rect = Rect{{r[0], r[1]}, {r[2], r[3]}};
  }

  cfg.particle_radius = number("particle_radius", cfg.particle_radius);
  cfg.particle_mass = number("particle_mass", cfg.particle_mass);
  cfg.d_min = number("d_min", cfg.d_min);
  cfg.noise_sigma = number("noise_sigma", cfg.noise_sigma);
  cfg.correct_min_distance = boolean("correct_min_distance", false);

  cfg.alpha = number("alpha", cfg.alpha);
  cfg.beta = number("beta", cfg.beta);
  cfg.gamma = number("gamma", cfg.gamma);
  cfg.speed_field.f_plus = number("f_plus", cfg.speed_field.f_plus);
  cfg.speed_field.f_minus = number("f_minus", cfg.speed_field.f_minus);
  cfg.speed_field.lookahead_r = number("lookahead_r", cfg.speed_field.lookahead_r);
  cfg.speed_field.rho_min = number("rho_min", cfg.speed_field.rho_min);
  cfg.speed_field.rho_max = number("rho_max", cfg.speed_field.rho_max);
  cfg.obstacle_clearance = number("obstacle_clearance", 0.0);

  cfg.uic_enabled = boolean("uic_enabled", true);
  cfg.pressure.rho_max = number("uic_rho_max", cfg.pressure.rho_max);
  cfg.pressure.p0 = number("pressure_p0", cfg.pressure.p0);
  cfg.pressure.eps_rho = number("eps_rho", cfg.pressure.eps_rho);
  cfg.pressure.pgs_eps = number("pgs_eps", cfg.pressure.pgs_eps);
  cfg.pressure.pgs_max_iter = static_cast<int>(number("pgs_max_iter", 0));
  cfg.pressure.v_max = number("v_max", 0.0);

  cfg.vg_margin = number("vg_margin", -1.0);
  cfg.vg_sample_dr = number("vg_sample_dr", cfg.vg_sample_dr);
  cfg.vg_lookahead = static_cast<int>(number("vg_lookahead", cfg.vg_lookahead));
  if (used("mde_radii")) cfg.mde_radii = file.get_array("mde_radii");

  for (const auto& [key, was_used] : seen)
    if (!was_used) throw ValidationError("unknown config key: " + key);

  if (cfg.dt <= 0.0) throw ValidationError("dt must be positive");
  if (cfg.t_max < 0.0) throw ValidationError("t_max must be >= 0");
  if (cfg.pressure.v_max == 0.0) cfg.pressure.v_max = cfg.speed.upper_bound();
  return cfg;
}

/// JSON echo of the effective configuration for the run manifest.
inline nlohmann::json config_to_json(const SimConfig& c) {
  nlohmann::json j;
  j["mode"] = to_string(c.mode);
  j["dt"] = c.dt;
  j["t_max"] = c.t_max;
  j["seed"] = c.seed;
  j["grid_nx"] = c.grid_nx;
  j["grid_ny"] = c.grid_ny;
  j["kernel"] = c.kernel == KernelKind::Wendland
                    ? "wendland"
                    : (c.kernel == KernelKind::Gaussian ? "gaussian" : "bspline4");
  j["smoothing_h"] = c.smoothing_h;
  j["speed_dist"] = c.speed.kind == SpeedDistribution::Kind::Normal ? "normal" : "uniform";
  j["speed_mean"] = c.speed.mean;
  j["speed_std"] = c.speed.stddev;
  j["speed_min"] = c.speed.lo;
  j["speed_max"] = c.speed.hi;
  j["spawn"] = c.spawn == SpawnKind::Uniform
                   ? "uniform"
                   : (c.spawn == SpawnKind::Disc
                          ? "disc"
                          : (c.spawn == SpawnKind::Rect ? "rect" : "none"));
  j["n_initial"] = c.n_initial;
  j["spawn_disc_cx"] = c.spawn_disc_center.x;
  j["spawn_disc_cy"] = c.spawn_disc_center.y;
  j["spawn_disc_r"] = c.spawn_disc_radius;
  j["spawn_rect"] = {c.spawn_rect.lo.x, c.spawn_rect.lo.y, c.spawn_rect.hi.x,
                     c.spawn_rect.hi.y};
  j["particle_radius"] = c.particle_radius;
  j["particle_mass"] = c.particle_mass;
  j["d_min"] = c.d_min;
  j["noise_sigma"] = c.noise_sigma;
  j["correct_min_distance"] = c.correct_min_distance;
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["gamma"] = c.gamma;
  j["f_plus"] = c.speed_field.f_plus;
  j["f_minus"] = c.speed_field.f_minus;
  j["lookahead_r"] = c.speed_field.lookahead_r;
  j["rho_min"] = c.speed_field.rho_min;
  j["rho_max"] = c.speed_field.rho_max;
  j["obstacle_clearance"] = c.obstacle_clearance;
  j["uic_enabled"] = c.uic_enabled;
  j["uic_rho_max"] = c.pressure.rho_max;
  j["pressure_p0"] = c.pressure.p0;
  j["eps_rho"] = c.pressure.eps_rho;
  j["pgs_eps"] = c.pressure.pgs_eps;
  j["pgs_max_iter"] = c.pressure.pgs_max_iter;
  j["v_max"] = c.pressure.v_max;
  j["vg_margin"] = c.margin();
  j["vg_sample_dr"] = c.vg_sample_dr;
  j["vg_lookahead"] = c.vg_lookahead;
  j["mde_radii"] = c.mde_radii;
  return j;
}

}  // namespace crowdflow
