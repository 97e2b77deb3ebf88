#pragma once

#include <cassert>
#include <cmath>
#include <queue>
#include <utility>
#include <vector>

#include "crowdflow/core.hpp"
#include "crowdflow/fields.hpp"
#include "crowdflow/particles.hpp"
#include "crowdflow/rng.hpp"
#include "crowdflow/scene.hpp"

namespace crowdflow {

struct SpeedFieldParams {
  double f_plus = 2.0;     // free-walking maximum speed (m/s)
  double f_minus = 0.2;    // speed at and above the upper density threshold
  double lookahead_r = 1.0;  // vision distance ahead of the walker (m)
  double rho_min = 0.2;    // density thresholds for the cutoff (1/m^2)
  double rho_max = 2.0;
};

/// Anisotropic maximum-speed field on cell edges:
/// f(x, theta) = f+ + L(rho(x + r n_theta)) (f- - f+).
struct SpeedField {
  EdgeField f;
  SpeedFieldParams params;
};

inline SpeedField compute_speed_field(const ScalarField& rho,
                                      const SpeedFieldParams& params) {
  if (params.rho_min >= params.rho_max)
    throw ValidationError("speed field requires rho_min < rho_max");
  const Grid& g = rho.grid();
  SpeedField out{EdgeField(g), params};
  for (Dir d : kDirs) {
    const Vec2 n = dir_vector(d);
    ScalarField& layer = out.f.layer(d);
    for (int j = 1; j <= g.ny; ++j)
      for (int i = 1; i <= g.nx; ++i) {
        const Vec2 edge = out.f.edge_midpoint(i, j, d);
        const Vec2 probe = edge + n * params.lookahead_r;
        const double density = bilinear_sample_clamped(rho, probe);
        const double w = cutoff_L(params.rho_min, params.rho_max, density);
        layer.at(i, j) = params.f_plus + w * (params.f_minus - params.f_plus);
      }
  }
  return out;
}

struct DiscomfortParams {
  double r_obs = 0.0;   // obstacle clearance radius; 0 means one cell
  double rho_min = 0.2;
  double rho_max = 2.0;
};

/// Additive walking-cost penalty g = g_obs + g_dens in [0, 2]:
/// 1 within r_obs of any obstacle cell, plus the density cutoff.
struct DiscomfortField {
  ScalarField g;
  double r_obs = 0.0;
};

inline DiscomfortField compute_discomfort(const ScalarField& rho, const CellMask& mask,
                                          const DiscomfortParams& params) {
  const Grid& g = rho.grid();
  const double r_obs = params.r_obs > 0.0 ? params.r_obs : std::max(g.dx, g.dy);
  DiscomfortField out{ScalarField(g), r_obs};
  const int wx = static_cast<int>(std::ceil(r_obs / g.dx)) + 1;
  const int wy = static_cast<int>(std::ceil(r_obs / g.dy)) + 1;
  for (int j = 1; j <= g.ny; ++j)
    for (int i = 1; i <= g.nx; ++i) {
      double g_obs = 0.0;
      const Vec2 c = g.cell_center(i, j);
      for (int jj = std::max(1, j - wy); jj <= std::min(g.ny, j + wy) && g_obs == 0.0; ++jj)
        for (int ii = std::max(1, i - wx); ii <= std::min(g.nx, i + wx); ++ii)
          if (mask.at(ii, jj) && g.cell_rect({ii, jj}).distance(c) < r_obs) {
            g_obs = 1.0;
            break;
          }
      const double g_dens =
          cutoff_L(params.rho_min, params.rho_max, rho.at(i, j));
      out.g.at(i, j) = g_obs + g_dens;
    }
  return out;
}

/// Marginal walking cost on cell edges:
/// u = (alpha f + beta + gamma g) / f off obstacles, infinity on
/// obstacle cells. The discomfort is sampled at the edge midpoint.
struct UnitCostField {
  EdgeField u;
  double alpha = 1.0;
  double beta = 0.0;
  double gamma = 0.0;
};

inline UnitCostField compute_unit_cost(const SpeedField& speed,
                                       const DiscomfortField& discomfort,
                                       double alpha, double beta, double gamma,
                                       const CellMask& mask) {
  const Grid& g = speed.f.grid();
  UnitCostField out{EdgeField(g), alpha, beta, gamma};
  for (Dir d : kDirs) {
    const ScalarField& f_layer = speed.f.layer(d);
    ScalarField& u_layer = out.u.layer(d);
    for (int j = 1; j <= g.ny; ++j)
      for (int i = 1; i <= g.nx; ++i) {
        if (mask.at(i, j)) {
          u_layer.at(i, j) = kInfinity;
          continue;
        }
        const double f = f_layer.at(i, j);
        if (f <= 0.0) throw ValidationError("unit cost requires positive speed off obstacles");
        const Vec2 edge = out.u.edge_midpoint(i, j, d);
        const double gval = bilinear_sample_clamped(discomfort.g, edge);
        u_layer.at(i, j) = (alpha * f + beta + gamma * gval) / f;
      }
  }
  return out;
}

enum class CellStatus : std::uint8_t { Unknown = 0, Candidate = 1, Known = 2 };

/// Solution of the discrete Eikonal equation together with the
/// marching status flags. phi is 0 on goal cells, infinite on obstacle
/// cells and unreachable cells.
struct PotentialField {
  ScalarField phi;
  std::vector<CellStatus> status;

  CellStatus status_at(const Grid& g, int i, int j) const {
    return status[g.offset(i, j)];
  }
};

/// Candidate potential for one grid cell from the first-order upwind
/// scheme. Per axis the usable neighbour with the smallest potential is
/// taken; an axis with no usable neighbour contributes infinite cost.
/// Edge costs are scaled by the step length along their axis.
template <typename Usable>
double compute_new_potential(int i, int j, const ScalarField& phi,
                             const UnitCostField& cost, Usable&& usable) {
  const Grid& g = phi.grid();
  double axis_pot[2] = {kInfinity, kInfinity};
  double axis_cost[2] = {kInfinity, kInfinity};
  for (Dir d : kDirs) {
    const auto [si, sj] = dir_step(d);
    const int ni = i + si, nj = j + sj;
    if (ni < 1 || ni > g.nx || nj < 1 || nj > g.ny) continue;
    if (!usable(ni, nj)) continue;
    const double pot = phi.at(ni, nj);
    if (!std::isfinite(pot)) continue;
    const int axis = (sj == 0) ? 0 : 1;
    if (pot < axis_pot[axis]) {
      axis_pot[axis] = pot;
      const double step = (axis == 0) ? g.dx : g.dy;
      axis_cost[axis] = cost.u.at(i, j, d) * step;
    }
  }
  const bool have_x = std::isfinite(axis_pot[0]) && std::isfinite(axis_cost[0]);
  const bool have_y = std::isfinite(axis_pot[1]) && std::isfinite(axis_cost[1]);
  if (!have_x && !have_y) return kInfinity;
  if (!have_x) return axis_pot[1] + axis_cost[1];
  if (!have_y) return axis_pot[0] + axis_cost[0];
  const double hp = axis_pot[0], hc = axis_cost[0];
  const double vp = axis_pot[1], vc = axis_cost[1];
  const double a = 1.0 / (hc * hc) + 1.0 / (vc * vc);
  const double b = -2.0 * (hp / (hc * hc) + vp / (vc * vc));
  const double c = (hp / hc) * (hp / hc) + (vp / vc) * (vp / vc) - 1.0;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0)  // upwind cone empty, fall back to the cheaper 1D update
    return std::min(hp + hc, vp + vc);
  const double sqrt_disc = std::sqrt(disc);
  const double denom = -b - sqrt_disc;
  const double r = std::abs(denom) >= 1e-12 ? 2.0 * c / denom
                                            : (-b + sqrt_disc) / (2.0 * a);
  if (r < std::max(hp, vp))  // causality: drop the axis ahead of the front
    return std::min(hp + hc, vp + vc);
  return r;
}

/// Altered fast marching over the anisotropic unit-cost field.
/// Goal cells start KNOWN at zero, obstacle cells KNOWN at infinity;
/// the smallest candidate is promoted until none remain (min-heap with
/// lazy deletion, ties broken by flat cell index). Unreachable cells
/// keep infinite potential.
inline PotentialField fast_march(const CellMask& mask, const CellMask& goal,
                                 const UnitCostField& cost) {
  const Grid& g = cost.u.grid();
  PotentialField out{ScalarField(g, kInfinity),
                     std::vector<CellStatus>(g.cell_count(), CellStatus::Unknown)};
  using Entry = std::pair<double, int>;  // (potential, 0-based offset)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;

  bool goal_nonempty = false;
  for (int j = 1; j <= g.ny; ++j)
    for (int i = 1; i <= g.nx; ++i) {
      const int k = g.offset(i, j);
      if (mask.at(i, j)) {
        out.status[k] = CellStatus::Known;  // phi stays infinite
      } else if (goal.at(i, j)) {
        out.phi[k] = 0.0;
        out.status[k] = CellStatus::Known;
        goal_nonempty = true;
      }
    }
  if (!goal_nonempty) throw ValidationError("fast_march: goal region is empty");

  auto known = [&](int i, int j) {
    return out.status[g.offset(i, j)] == CellStatus::Known &&
           std::isfinite(out.phi[g.offset(i, j)]);
  };
  auto relax_neighbours = [&](int i, int j) {
    for (Dir d : kDirs) {
      const auto [si, sj] = dir_step(d);
      const int ni = i + si, nj = j + sj;
      if (ni < 1 || ni > g.nx || nj < 1 || nj > g.ny) continue;
      const int nk = g.offset(ni, nj);
      if (out.status[nk] == CellStatus::Known) continue;
      const double v = compute_new_potential(ni, nj, out.phi, cost, known);
      if (v < out.phi[nk]) {
        out.phi[nk] = v;
        out.status[nk] = CellStatus::Candidate;
        heap.emplace(v, nk);
      }
    }
  };

  for (int j = 1; j <= g.ny; ++j)
    for (int i = 1; i <= g.nx; ++i)
      if (!mask.at(i, j) && goal.at(i, j)) relax_neighbours(i, j);

  [[maybe_unused]] double last_promoted = 0.0;
  while (!heap.empty()) {
    const auto [value, k] = heap.top();
    heap.pop();
    if (out.status[k] == CellStatus::Known) continue;  // stale heap entry
    assert(value + 1e-9 >= last_promoted && "promotion order must be non-decreasing");
    last_promoted = value;
    out.status[k] = CellStatus::Known;
    const CellIndex c = g.unflatten(k + 1);
    relax_neighbours(c.i, c.j);
  }
  return out;
}

/// Gradient of the potential using central differences where both
/// neighbours are finite and one-sided differences next to infinite
/// cells or the domain boundary; zero when no finite neighbour exists.
inline VectorField potential_gradient(const PotentialField& pot) {
  const Grid& g = pot.phi.grid();
  VectorField out(g);
  auto finite_at = [&](int i, int j) {
    return i >= 1 && i <= g.nx && j >= 1 && j <= g.ny &&
           std::isfinite(pot.phi.at(i, j));
  };
  for (int j = 1; j <= g.ny; ++j)
    for (int i = 1; i <= g.nx; ++i) {
      if (!std::isfinite(pot.phi.at(i, j))) continue;  // leave zero
      const double c = pot.phi.at(i, j);
      const bool l = finite_at(i - 1, j), r = finite_at(i + 1, j);
      if (l && r)
        out.x.at(i, j) = (pot.phi.at(i + 1, j) - pot.phi.at(i - 1, j)) / (2.0 * g.dx);
      else if (r)
        out.x.at(i, j) = (pot.phi.at(i + 1, j) - c) / g.dx;
      else if (l)
        out.x.at(i, j) = (c - pot.phi.at(i - 1, j)) / g.dx;
      const bool b = finite_at(i, j - 1), t = finite_at(i, j + 1);
      if (b && t)
        out.y.at(i, j) = (pot.phi.at(i, j + 1) - pot.phi.at(i, j - 1)) / (2.0 * g.dy);
      else if (t)
        out.y.at(i, j) = (pot.phi.at(i, j + 1) - c) / g.dy;
      else if (b)
        out.y.at(i, j) = (c - pot.phi.at(i, j - 1)) / g.dy;
    }
  return out;
}

/// A unit direction whose small step keeps the particle inside the
/// domain and out of obstacles; zero vector when none is found.
inline Vec2 random_unobstructed_direction(const SceneSpec& scene, Vec2 x, Rng& rng,
                                          double probe_step) {
  for (int attempt = 0; attempt < 16; ++attempt) {
    const Vec2 dir = rng.unit_vector();
    const Vec2 probe = x + dir * probe_step;
    if (scene.inside_domain(probe) && !scene.inside_obstacle(probe)) return dir;
  }
  return {};
}

inline Dir nearest_cardinal(Vec2 dir) {
  if (std::abs(dir.x) >= std::abs(dir.y)) return dir.x >= 0.0 ? Dir::East : Dir::West;
  return dir.y >= 0.0 ? Dir::North : Dir::South;
}

/// Steer every active particle down the potential:
/// v = -f(x, theta) grad(phi)/|grad(phi)| with theta the walking
/// direction, capped by the particle's own maximum speed. Particles in
/// a flat spot (zero sampled gradient) step in a random unobstructed
/// direction instead.
inline void potential_velocity(ParticleSet& p, const PotentialField& pot,
                               const SpeedField& speed, const SceneSpec& scene,
                               Rng& rng) {
  const VectorField grad = potential_gradient(pot);
  const Grid& g = pot.phi.grid();
  const double probe_step = std::min(g.dx, g.dy) / 4.0;
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (!p.active[a]) continue;
    const Vec2 x = p.positions[a];
    Vec2 dir = (Vec2{} - bilinear_sample_clamped(grad, x)).normalized();
    if (dir == Vec2{}) dir = random_unobstructed_direction(scene, x, rng, probe_step);
    const Dir theta = nearest_cardinal(dir);
    const double f = bilinear_sample_clamped(speed.f.layer(theta), x);
    const double s = std::min(f, p.max_speeds[a]);
    p.velocities[a] = dir * s;
  }
}

}  // namespace crowdflow
