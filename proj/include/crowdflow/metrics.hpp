#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdflow/core.hpp"
#include "crowdflow/fields.hpp"

namespace crowdflow {

/// Relative delay 1 - planned/observed time, clipped to [-0.5, 1].
/// Equivalently 1 - (average speed / maximum speed) along the planned
/// path; negative values (walkers pushed ahead of schedule) are kept.
inline double relative_delay(double planned, double observed) {
  if (planned <= 0.0) throw ValidationError("relative_delay requires planned > 0");
  if (observed <= 0.0) return -0.5;
  return std::clamp(1.0 - planned / observed, -0.5, 1.0);
}

/// Rectangle-rule accumulation of the visit heatmap:
/// R <- R + log(1 + rho) dt per cell.
inline void density_heatmap_accumulate(ScalarField& accumulator, const ScalarField& rho,
                                       double dt) {
  for (std::size_t k = 0; k < accumulator.values().size(); ++k)
    accumulator.values()[k] += std::log1p(rho.values()[k]) * dt;
}

/// Lyapunov functional F = sum rho Phi dx dy; non-increasing F
/// certifies self-organising transport.
inline double lyapunov_value(const ScalarField& rho, const ScalarField& phi) {
  const Grid& g = rho.grid();
  double acc = 0.0;
  for (int k = 0; k < g.cell_count(); ++k) acc += rho[k] * phi[k];
  return acc * g.dx * g.dy;
}

/// Per-particle bookkeeping plus the run-level series.
struct ParticleRecord {
  int id = 0;
  Vec2 spawn_position{};
  double spawn_time = 0.0;
  double exit_time = std::nan("");     // NaN while still in the scene
  double planned_time = std::nan("");  // path length / max speed
};

struct SeriesSample {
  double t = 0.0;
  std::size_t n_active = 0;
  double max_density = 0.0;
  double fb_residual = std::nan("");  // NaN when no pressure solve ran
  double lyapunov = 0.0;
};

struct Metrics {
  std::vector<ParticleRecord> particles;
  std::vector<SeriesSample> series;
  ScalarField heatmap;
  std::vector<double> mde_radii;
  std::vector<std::size_t> mde_counts;
  double violation_fraction_mean = 0.0;  // mean per-step share violating d_min
  double first_exit_time = std::nan("");
  double clear_time = std::nan("");

  double delay(const ParticleRecord& r) const {
    if (std::isnan(r.exit_time) || std::isnan(r.planned_time) || r.planned_time <= 0.0)
      return std::nan("");
    return relative_delay(r.planned_time, r.exit_time - r.spawn_time);
  }

  /// Mean effective speed of exited walkers: planned path length over
  /// observed time, averaged where both are defined.
  double mean_realized_speed(const std::vector<double>& max_speeds) const {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& r : particles) {
      if (std::isnan(r.exit_time) || std::isnan(r.planned_time)) continue;
      const double observed = r.exit_time - r.spawn_time;
      if (observed <= 0.0) continue;
      acc += r.planned_time * max_speeds[r.id] / observed;
      ++n;
    }
    return n ? acc / n : std::nan("");
  }
};

namespace detail {

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Write the metric files: particles.csv, heatmap.csv, series.csv,
/// mde.csv and a manifest echoing the configuration and seed so the
/// run can be replayed.
inline void export_metrics(const Metrics& m, const std::filesystem::path& dir,
                           const nlohmann::json& manifest) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error(std::string("cannot write ") + (dir / name).string());
    return out;
  };
  {
    auto out = open("particles.csv");
    out << "id,spawn_x,spawn_y,spawn_t,exit_t,planned_t,delay\n";
    for (const auto& r : m.particles)
      out << r.id << ',' << detail::csv_number(r.spawn_position.x) << ','
          << detail::csv_number(r.spawn_position.y) << ','
          << detail::csv_number(r.spawn_time) << ',' << detail::csv_number(r.exit_time)
          << ',' << detail::csv_number(r.planned_time) << ','
          << detail::csv_number(m.delay(r)) << '\n';
  }
  {
    auto out = open("heatmap.csv");
    if (m.heatmap.size() > 0)
      dump_csv(m.heatmap, out);
    else
      out << "i,j,value\n";
  }
  {
    auto out = open("series.csv");
    out << "t,n_active,max_density,fb_residual,lyapunov\n";
    for (const auto& s : m.series)
      out << detail::csv_number(s.t) << ',' << s.n_active << ','
          << detail::csv_number(s.max_density) << ','
          << detail::csv_number(s.fb_residual) << ',' << detail::csv_number(s.lyapunov)
          << '\n';
  }
  {
    auto out = open("mde.csv");
    out << "radius,count\n";
    for (std::size_t k = 0; k < m.mde_radii.size(); ++k)
      out << detail::csv_number(m.mde_radii[k]) << ',' << m.mde_counts[k] << '\n';
  }
  {
    auto out = open("manifest.json");
    out << manifest.dump(2) << '\n';
  }
}

}  // namespace crowdflow
