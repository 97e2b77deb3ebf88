#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "crowdflow/config.hpp"
#include "crowdflow/eikonal.hpp"
#include "crowdflow/fields.hpp"
#include "crowdflow/metrics.hpp"
#include "crowdflow/particles.hpp"
#include "crowdflow/scene.hpp"
#include "crowdflow/sph.hpp"
#include "crowdflow/uic.hpp"
#include "crowdflow/visgraph.hpp"

namespace crowdflow {

struct RunResult {
  Metrics metrics;
  ParticleSet particles;
  double end_time = 0.0;
};

/// Time-stepping driver composing the planners, the micro/macro
/// conversion and the pressure interaction into one of three loops:
///   eikonal       density-dependent cost field, re-marched every step;
///   visgraph_uic  waypoint paths plus the incompressibility pressure;
///   combined      density-independent potential marched once at start,
///                 pressure interaction at runtime.
class Simulation {
 public:
  Simulation(SimConfig config, SceneSpec scene)
      : cfg_(std::move(config)), scene_(std::move(scene)), rng_(cfg_.seed) {
    scene_.validate();
    grid_ = scene_.make_grid(cfg_.grid_nx, cfg_.grid_ny);
    mask_ = obstacle_cell_mask(scene_, grid_);
    goal_ = exit_cell_mask();
    if (scene_.exits.empty()) throw ValidationError("simulation needs at least one exit");

    if (cfg_.smoothing_h <= 0.0) {
      try {
        cfg_.smoothing_h =
            planner_smoothing_length(grid_.dx, cfg_.speed_field.rho_min, cfg_.kernel);
      } catch (const ValidationError&) {
        // no root: a single walker can never reach rho_min at a cell
        // centre, so any h works; fall back to cell-sized smoothing
        cfg_.smoothing_h = grid_.dx;
      }
    }
    kernel_ = KernelSpec{cfg_.kernel, cfg_.smoothing_h};

    planned_distance_ = march_unit_distance();
    if (cfg_.mode == SimMode::Combined) static_potential_ = march_static_cost();
    if (cfg_.mode == SimMode::VisgraphUic)
      graph_ = std::make_unique<VisibilityGraph>(scene_, cfg_.margin(), scene_.exits);

    metrics_.heatmap = ScalarField(grid_);
    metrics_.mde_radii = cfg_.mde_radii;
    exit_flows_.resize(scene_.exits.size());
    for (const Entrance& e : scene_.entrances) entrance_remaining_.push_back(e.capacity);

    spawn_initial();
  }

  const SimConfig& config() const { return cfg_; }
  const SceneSpec& scene() const { return scene_; }
  const Grid& grid() const { return grid_; }
  const ParticleSet& particles() const { return particles_; }
  const Metrics& metrics() const { return metrics_; }
  double time() const { return step_count_ * cfg_.dt; }

  /// Advance one time step: inflow, planning, interaction, motion,
  /// outflow and metric accumulation.
  void step() {
    const double t = time();
    handle_inflow(t);

    auto [rho, velocity] = interpolate_fields(particles_, kernel_, grid_);
    double fb = std::nan("");
    switch (cfg_.mode) {
      case SimMode::Eikonal:
        fb = plan_eikonal(rho);
        break;
      case SimMode::VisgraphUic:
        fb = plan_with_paths(rho, velocity);
        break;
      case SimMode::Combined:
        fb = plan_combined(rho, velocity);
        break;
    }

    if (cfg_.noise_sigma > 0.0) add_velocity_noise(particles_, cfg_.noise_sigma, rng_);

    prev_positions_ = particles_.positions;
    const std::vector<int> candidates = step_positions(particles_, cfg_.dt, scene_);
    mark_stalled();
    handle_exits(candidates, t + cfg_.dt);

    if (cfg_.correct_min_distance && cfg_.d_min > 0.0)
      correct_min_distance(particles_, cfg_.d_min, scene_, rng_);

    ++step_count_;
    accumulate_metrics(rho, fb);
  }

  bool finished() const {
    if (time() >= cfg_.t_max) return true;
    if (particles_.active_count() > 0) return false;
    for (std::size_t k = 0; k < scene_.entrances.size(); ++k) {
      if (scene_.entrances[k].rate <= 0.0) continue;
      if (!entrance_remaining_[k] || *entrance_remaining_[k] > 0) return false;
    }
    return true;
  }

  RunResult run() {
    while (!finished()) step();
    finalize_metrics();
    return {metrics_, particles_, time()};
  }

 private:
  CellMask exit_cell_mask() const {
    CellMask goal(grid_);
    for (int j = 1; j <= grid_.ny; ++j)
      for (int i = 1; i <= grid_.nx; ++i) {
        if (mask_.at(i, j)) continue;
        const Rect cell = grid_.cell_rect({i, j});
        for (const Exit& e : scene_.exits) {
          const Rect& r = e.region;
          const bool overlap = !(cell.hi.x < r.lo.x || r.hi.x < cell.lo.x ||
                                 cell.hi.y < r.lo.y || r.hi.y < cell.lo.y);
          if (overlap) {
            goal.set(i, j, true);
            break;
          }
        }
      }
    return goal;
  }

  /// Geodesic distance-to-exit field (unit cost), used for planned times.
  PotentialField march_unit_distance() const {
    UnitCostField cost{EdgeField(grid_, 1.0), 1.0, 0.0, 0.0};
    for (Dir d : kDirs) {
      ScalarField& layer = cost.u.layer(d);
      for (int j = 1; j <= grid_.ny; ++j)
        for (int i = 1; i <= grid_.nx; ++i)
          if (mask_.at(i, j)) layer.at(i, j) = kInfinity;
    }
    return fast_march(mask_, goal_, cost);
  }

  /// Density-independent walking-cost potential for the combined mode.
  PotentialField march_static_cost() const {
    const ScalarField empty_density(grid_);
    SpeedFieldParams params = cfg_.speed_field;
    const SpeedField speed = compute_speed_field(empty_density, params);
    const DiscomfortField discomfort = compute_discomfort(
        empty_density, mask_,
        {cfg_.obstacle_clearance, params.rho_min, params.rho_max});
    const UnitCostField cost =
        compute_unit_cost(speed, discomfort, cfg_.alpha, cfg_.beta, cfg_.gamma, mask_);
    return fast_march(mask_, goal_, cost);
  }

  void spawn_initial() {
    switch (cfg_.spawn) {
      case SpawnKind::None:
        break;
      case SpawnKind::Uniform:
        for (int k = 0; k < cfg_.n_initial; ++k) add_particle(sample_free_point(scene_, rng_), 0.0);
        break;
      case SpawnKind::Disc:
        for (int k = 0; k < cfg_.n_initial; ++k) add_particle(sample_disc_point(), 0.0);
        break;
      case SpawnKind::Rect:
        for (int k = 0; k < cfg_.n_initial; ++k) add_particle(sample_rect_point(), 0.0);
        break;
    }
  }

  Vec2 sample_disc_point() {
    for (int t = 0; t < 100000; ++t) {
      const double ang = rng_.uniform(0.0, 2.0 * M_PI);
      const double rad = cfg_.spawn_disc_radius * std::sqrt(rng_.uniform());
      const Vec2 p = cfg_.spawn_disc_center + Vec2{std::cos(ang), std::sin(ang)} * rad;
      if (scene_.inside_domain(p) && !scene_.inside_obstacle(p) && !scene_.in_exit(p))
        return p;
    }
    throw ValidationError("disc spawn region has no free space");
  }

  Vec2 sample_rect_point() {
    for (int t = 0; t < 100000; ++t) {
      const Vec2 p = sample_in_rect(cfg_.spawn_rect, rng_);
      if (scene_.inside_domain(p) && !scene_.inside_obstacle(p) && !scene_.in_exit(p))
        return p;
    }
    throw ValidationError("rect spawn region has no free space");
  }

  void add_particle(Vec2 pos, double t) {
    const double max_speed = cfg_.speed.sample(rng_);
    const int id = particles_.add(pos, Vec2{}, max_speed, cfg_.particle_mass);
    ParticleRecord rec;
    rec.id = id;
    rec.spawn_position = pos;
    rec.spawn_time = t;
    if (cfg_.mode == SimMode::VisgraphUic) {
      trackers_.emplace_back();
      auto path = shortest_path(*graph_, pos, cfg_.vg_sample_dr);
      if (path) {
        rec.planned_time = path->length() / max_speed;
        trackers_.back() = PathTracker(std::move(*path), cfg_.vg_lookahead);
      }
    } else {
      trackers_.emplace_back();
      const CellIndex c = cell_of_point(pos, grid_);
      const double dist = planned_distance_.phi.at(c);
      if (std::isfinite(dist)) rec.planned_time = dist / max_speed;
    }
    metrics_.particles.push_back(rec);
    stalled_.push_back(0);
  }

  void handle_inflow(double t) {
    for (std::size_t k = 0; k < scene_.entrances.size(); ++k) {
      const Entrance& e = scene_.entrances[k];
      const std::uint64_t n = poisson_inflow(e, entrance_remaining_[k], cfg_.dt, rng_);
      for (std::uint64_t c = 0; c < n; ++c) add_particle(sample_in_rect(e.region, rng_), t);
    }
  }

  double plan_eikonal(const ScalarField& rho) {
    const SpeedField speed = compute_speed_field(rho, cfg_.speed_field);
    const DiscomfortField discomfort = compute_discomfort(
        rho, mask_,
        {cfg_.obstacle_clearance, cfg_.speed_field.rho_min, cfg_.speed_field.rho_max});
    const UnitCostField cost =
        compute_unit_cost(speed, discomfort, cfg_.alpha, cfg_.beta, cfg_.gamma, mask_);
    const PotentialField potential = fast_march(mask_, goal_, cost);
    potential_velocity(particles_, potential, speed, scene_, rng_);
    randomize_stalled();
    return std::nan("");
  }

  double plan_with_paths(const ScalarField& rho, const VectorField& velocity) {
    double fb = std::nan("");
    std::optional<VectorField> crowd;
    if (cfg_.uic_enabled) fb = solve_pressure(rho, velocity, crowd);
    for (std::size_t a = 0; a < particles_.size(); ++a) {
      if (!particles_.active[a]) continue;
      const Vec2 x = particles_.positions[a];
      Vec2 desired{};
      if (trackers_[a].valid())
        desired = trackers_[a].direction(x) * particles_.max_speeds[a];
      particles_.velocities[a] = blend_with_crowd(desired, x, rho, crowd);
      particles_.clamp_speed(static_cast<int>(a));
    }
    return fb;
  }

  double plan_combined(const ScalarField& rho, const VectorField& velocity) {
    double fb = std::nan("");
    std::optional<VectorField> crowd;
    if (cfg_.uic_enabled) fb = solve_pressure(rho, velocity, crowd);
    const VectorField grad = potential_gradient(static_potential_);
    const double probe = std::min(grid_.dx, grid_.dy) / 4.0;
    for (std::size_t a = 0; a < particles_.size(); ++a) {
      if (!particles_.active[a]) continue;
      const Vec2 x = particles_.positions[a];
      Vec2 dir = (Vec2{} - bilinear_sample_clamped(grad, x)).normalized();
      if (dir == Vec2{} || stalled_[a])
        dir = random_unobstructed_direction(scene_, x, rng_, probe);
      const Vec2 desired = dir * particles_.max_speeds[a];
      particles_.velocities[a] = blend_with_crowd(desired, x, rho, crowd);
      particles_.clamp_speed(static_cast<int>(a));
    }
    return fb;
  }

  double solve_pressure(const ScalarField& rho, const VectorField& velocity,
                        std::optional<VectorField>& crowd) {
    PressureParams params = cfg_.pressure;
    const LcpProblem prob = build_lcp(rho, velocity, params, cfg_.dt, &mask_);
    const int cap = params.pgs_max_iter > 0 ? params.pgs_max_iter : 10 * grid_.cell_count();
    LcpSolution sol = pgs_solve(prob, warm_start_, params.pgs_eps, cap);
    warm_start_ = sol.z;
    crowd = apply_pressure(velocity, sol.z, params.v_max);
    return sol.fb_residual;
  }

  Vec2 blend_with_crowd(Vec2 desired, Vec2 x, const ScalarField& rho,
                        const std::optional<VectorField>& crowd) const {
    if (!crowd) return desired;
    const Vec2 crowd_v = bilinear_sample_clamped(*crowd, x);
    const double local_rho = bilinear_sample_clamped(rho, x);
    return swarm_blend(desired, crowd_v, local_rho, cfg_.pressure.rho_max);
  }

  void mark_stalled() {
    for (std::size_t a = 0; a < particles_.size(); ++a) {
      const bool moving = (particles_.positions[a] - prev_positions_[a]).norm() >
                          1e-9 * cfg_.dt;
      stalled_[a] = particles_.active[a] && !moving &&
                    particles_.velocities[a].norm() > 1e-12;
    }
  }

  void randomize_stalled() {
    if (cfg_.mode != SimMode::Eikonal) return;
    const double probe = std::min(grid_.dx, grid_.dy) / 4.0;
    for (std::size_t a = 0; a < particles_.size(); ++a) {
      if (!particles_.active[a] || !stalled_[a]) continue;
      const Vec2 dir = random_unobstructed_direction(scene_, particles_.positions[a],
                                                     rng_, probe);
      particles_.velocities[a] = dir * particles_.max_speeds[a];
    }
  }

  void handle_exits(const std::vector<int>& candidates, double t_exit) {
    if (candidates.empty()) return;
    std::vector<std::vector<int>> per_exit(scene_.exits.size());
    for (int a : candidates) {
      for (std::size_t e = 0; e < scene_.exits.size(); ++e)
        if (scene_.exits[e].region.contains(particles_.positions[a])) {
          per_exit[e].push_back(a);
          break;
        }
    }
    for (std::size_t e = 0; e < scene_.exits.size(); ++e) {
      const std::vector<int> removed =
          exit_flows_[e].apply_cap(scene_.exits[e], per_exit[e], cfg_.dt);
      for (int a : removed) {
        particles_.active[a] = 0;
        particles_.velocities[a] = Vec2{};
        metrics_.particles[a].exit_time = t_exit;
        if (std::isnan(metrics_.first_exit_time)) metrics_.first_exit_time = t_exit;
      }
    }
  }

  void accumulate_metrics(const ScalarField& rho, double fb) {
    const double t = time();
    density_heatmap_accumulate(metrics_.heatmap, rho, cfg_.dt);
    SeriesSample s;
    s.t = t;
    s.n_active = particles_.active_count();
    s.max_density = rho.max_value();
    s.fb_residual = fb;
    s.lyapunov = lyapunov_value(rho, rho);
    metrics_.series.push_back(s);
    if (cfg_.d_min > 0.0) {
      const auto counts = min_distance_report(particles_, {cfg_.d_min}, scene_.bounds());
      const std::size_t active = s.n_active;
      violation_accum_ += active ? static_cast<double>(counts[0]) / active : 0.0;
      ++violation_samples_;
    }
    if (s.n_active == 0 && !metrics_.particles.empty() &&
        std::isnan(metrics_.clear_time))
      metrics_.clear_time = t;
  }

  void finalize_metrics() {
    metrics_.mde_counts = min_distance_report(particles_, metrics_.mde_radii, scene_.bounds());
    metrics_.violation_fraction_mean =
        violation_samples_ ? violation_accum_ / violation_samples_ : 0.0;
  }

  SimConfig cfg_;
  SceneSpec scene_;
  Rng rng_;
  Grid grid_;
  CellMask mask_;
  CellMask goal_;
  KernelSpec kernel_;
  ParticleSet particles_;
  Metrics metrics_;
  PotentialField planned_distance_;
  PotentialField static_potential_;
  std::unique_ptr<VisibilityGraph> graph_;
  std::vector<PathTracker> trackers_;
  std::vector<std::uint8_t> stalled_;
  std::vector<Vec2> prev_positions_;
  std::vector<ExitFlow> exit_flows_;
  std::vector<std::optional<std::int64_t>> entrance_remaining_;
  std::vector<double> warm_start_;
  double violation_accum_ = 0.0;
  std::size_t violation_samples_ = 0;
  int step_count_ = 0;
};

/// Run a configured scenario to completion.
inline RunResult run(const SimConfig& config, const SceneSpec& scene) {
  Simulation sim(config, scene);
  return sim.run();
}

}  // namespace crowdflow
