#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "crowdflow/core.hpp"
#include "crowdflow/rng.hpp"
#include "crowdflow/scene.hpp"

namespace crowdflow {

/// Microscopic state of the simulation, stored as parallel arrays.
/// Invariants: all arrays share one length; active positions lie inside
/// the domain and outside obstacle interiors; |velocity| <= max_speed
/// after every step.
struct ParticleSet {
  std::vector<Vec2> positions;
  std::vector<Vec2> velocities;
  std::vector<double> max_speeds;
  std::vector<double> masses;
  std::vector<std::uint8_t> active;

  std::size_t size() const { return positions.size(); }

  std::size_t active_count() const {
    std::size_t n = 0;
    for (auto a : active) n += a ? 1 : 0;
    return n;
  }

  int add(Vec2 pos, Vec2 vel, double max_speed, double mass = 1.0) {
    positions.push_back(pos);
    velocities.push_back(vel);
    max_speeds.push_back(max_speed);
    masses.push_back(mass);
    active.push_back(1);
    return static_cast<int>(positions.size()) - 1;
  }

  void clamp_speed(int a) {
    const double s = velocities[a].norm();
    if (s > max_speeds[a] && s > 0.0) velocities[a] = velocities[a] * (max_speeds[a] / s);
  }
};

namespace detail {

inline bool in_any(const std::vector<Rect>& rs, Vec2 p) {
  for (const Rect& r : rs)
    if (r.contains(p)) return true;
  return false;
}

}  // namespace detail

/// Rejection-sample a point uniformly over the free area: the domain
/// minus obstacles, entrances and exits.
inline Vec2 sample_free_point(const SceneSpec& scene, Rng& rng,
                              int max_tries = 100000) {
  for (int t = 0; t < max_tries; ++t) {
    const Vec2 p{rng.uniform(0.0, scene.width), rng.uniform(0.0, scene.height)};
    if (scene.inside_obstacle(p)) continue;
    bool blocked = false;
    for (const Entrance& e : scene.entrances)
      if (e.region.contains(p)) {
        blocked = true;
        break;
      }
    if (!blocked)
      for (const Exit& e : scene.exits)
        if (e.region.contains(p)) {
          blocked = true;
          break;
        }
    if (!blocked) return p;
  }
  throw ValidationError("free area is empty (rejection sampling failed)");
}

/// n particles i.i.d. uniform over the free area, at rest.
inline ParticleSet spawn_uniform(int n, const SceneSpec& scene, Rng& rng,
                                 double max_speed = 1.0, double mass = 1.0) {
  ParticleSet p;
  for (int k = 0; k < n; ++k)
    p.add(sample_free_point(scene, rng), Vec2{}, max_speed, mass);
  return p;
}

/// Number of arrivals ~ Poisson(rate * dt), truncated by the remaining
/// entrance capacity tracked by the caller.
inline std::uint64_t poisson_inflow(const Entrance& e,
                                    std::optional<std::int64_t>& remaining_capacity,
                                    double dt, Rng& rng) {
  if (dt <= 0.0) throw ValidationError("poisson_inflow requires dt > 0");
  std::uint64_t n = rng.poisson(e.rate * dt);
  if (remaining_capacity) {
    n = std::min<std::uint64_t>(n, static_cast<std::uint64_t>(
                                       std::max<std::int64_t>(*remaining_capacity, 0)));
    *remaining_capacity -= static_cast<std::int64_t>(n);
  }
  return n;
}

/// Uniform position inside an entrance region.
inline Vec2 sample_in_rect(const Rect& r, Rng& rng) {
  return {rng.uniform(r.lo.x, r.hi.x), rng.uniform(r.lo.y, r.hi.y)};
}

namespace detail {

/// First parameter t in (0, 1] at which the segment p -> p + d enters
/// the open rectangle, or nothing. The entry face is snapped exactly.
struct SegmentHit {
  double t;
  Vec2 point;
};

inline std::optional<SegmentHit> segment_enters_rect(Vec2 p, Vec2 d, const Rect& m) {
  if (m.contains_open(p)) return SegmentHit{0.0, p};  // already inside, caller handles
  if (d.x == 0.0 && d.y == 0.0) return std::nullopt;
  double t_enter = -kInfinity, t_exit = 1.0;
  int enter_axis = -1;
  bool enter_high = false;
  for (int axis = 0; axis < 2; ++axis) {
    const double p0 = axis == 0 ? p.x : p.y;
    const double dv = axis == 0 ? d.x : d.y;
    const double lo = axis == 0 ? m.lo.x : m.lo.y;
    const double hi = axis == 0 ? m.hi.x : m.hi.y;
    if (dv == 0.0) {
      if (p0 <= lo || p0 >= hi) return std::nullopt;
      continue;
    }
    double t0 = (lo - p0) / dv;
    double t1 = (hi - p0) / dv;
    bool high = dv < 0.0;
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > t_enter) {
      t_enter = t0;
      enter_axis = axis;
      enter_high = high;
    }
    t_exit = std::min(t_exit, t1);
  }
  // entry must happen within the step and strictly before leaving;
  // sliding away from a face (t_exit <= 0) is free motion
  if (enter_axis < 0 || t_enter >= t_exit || t_enter > 1.0 || t_exit <= 0.0)
    return std::nullopt;
  const double t = std::max(t_enter, 0.0);
  Vec2 hit = p + d * t;
  if (enter_axis == 0)
    hit.x = enter_high ? m.hi.x : m.lo.x;
  else
    hit.y = enter_high ? m.hi.y : m.lo.y;
  return SegmentHit{t, hit};
}

}  // namespace detail

/// One Euler step x <- x + v dt per active particle. A particle whose
/// segment enters an obstacle is stopped at the entry face; particles
/// are kept inside the domain; particles whose new position lies in an
/// exit are returned as removal candidates (not yet deactivated, the
/// exit cap decides).
inline std::vector<int> step_positions(ParticleSet& p, double dt,
                                       const SceneSpec& scene) {
  if (dt <= 0.0) throw ValidationError("step_positions requires dt > 0");
  std::vector<int> exit_candidates;
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (!p.active[a]) continue;
    const Vec2 from = p.positions[a];
    const Vec2 d = p.velocities[a] * dt;
    Vec2 to = from + d;
    double best_t = 2.0;
    for (const Rect& m : scene.obstacles) {
      const auto hit = detail::segment_enters_rect(from, d, m);
      if (hit && hit->t < best_t) {
        best_t = hit->t;
        to = hit->point;
      }
    }
    to.x = std::clamp(to.x, 0.0, scene.width);
    to.y = std::clamp(to.y, 0.0, scene.height);
    p.positions[a] = to;
    if (scene.in_exit(to)) exit_candidates.push_back(static_cast<int>(a));
  }
  return exit_candidates;
}

/// Fractional-carry throttle for one exit. Carry accumulates across
/// steps so the long-run throughput equals the cap exactly.
struct ExitFlow {
  double carry = 0.0;

  /// Subset of candidates removed this step, at most
  /// floor(cap*dt + carry); an unbounded cap removes all.
  std::vector<int> apply_cap(const Exit& exit, const std::vector<int>& candidates,
                             double dt) {
    if (!exit.cap) return candidates;
    const double allowance = carry + *exit.cap * dt;
    const auto budget = static_cast<std::size_t>(std::max(0.0, std::floor(allowance)));
    const std::size_t n = std::min(budget, candidates.size());
    carry = allowance - static_cast<double>(n);
    return {candidates.begin(), candidates.begin() + n};
  }
};

/// Independent Gaussian (0, sigma^2) per velocity component, then the
/// speed is clamped back to each particle's maximum.
inline void add_velocity_noise(ParticleSet& p, double sigma, Rng& rng) {
  if (sigma < 0.0) throw ValidationError("noise sigma must be >= 0");
  if (sigma == 0.0) return;
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (!p.active[a]) continue;
    p.velocities[a] += Vec2{rng.normal(0.0, sigma), rng.normal(0.0, sigma)};
    p.clamp_speed(static_cast<int>(a));
  }
}

/// Maximum density attainable by discs of radius r keeping a minimum
/// gap d_min, from the triangular closest packing: 2/((d_min+2r)^2 sqrt(3)).
inline double max_density_from_min_distance(double d_min, double r) {
  if (d_min < 0.0 || r < 0.0)
    throw ValidationError("max_density_from_min_distance: negative input");
  const double d = d_min + 2.0 * r;
  if (d <= 0.0) throw ValidationError("max_density_from_min_distance: degenerate spacing");
  return 2.0 / (d * d * std::sqrt(3.0));
}

namespace detail {

/// Nearest-neighbour distance per active particle, computed with cell
/// binning over bins of side `cutoff`; distances beyond cutoff are
/// reported as +infinity.
inline std::vector<double> nearest_neighbour_distances(const ParticleSet& p,
                                                       double cutoff, Rect bounds) {
  const int n = static_cast<int>(p.size());
  std::vector<double> dist(n, kInfinity);
  if (cutoff <= 0.0) return dist;
  const double side = cutoff;
  const int nbx = std::max(1, static_cast<int>(std::ceil(bounds.width() / side)));
  const int nby = std::max(1, static_cast<int>(std::ceil(bounds.height() / side)));
  std::vector<std::vector<int>> bins(static_cast<std::size_t>(nbx) * nby);
  auto coords = [&](Vec2 q) {
    int i = std::clamp(static_cast<int>((q.x - bounds.lo.x) / side), 0, nbx - 1);
    int j = std::clamp(static_cast<int>((q.y - bounds.lo.y) / side), 0, nby - 1);
    return std::pair{i, j};
  };
  for (int a = 0; a < n; ++a) {
    if (!p.active[a]) continue;
    const auto [i, j] = coords(p.positions[a]);
    bins[i + static_cast<std::size_t>(j) * nbx].push_back(a);
  }
  for (int a = 0; a < n; ++a) {
    if (!p.active[a]) continue;
    const auto [bi, bj] = coords(p.positions[a]);
    double best_sq = cutoff * cutoff;
    bool found = false;
    for (int j = std::max(0, bj - 1); j <= std::min(nby - 1, bj + 1); ++j)
      for (int i = std::max(0, bi - 1); i <= std::min(nbx - 1, bi + 1); ++i)
        for (int b : bins[i + static_cast<std::size_t>(j) * nbx]) {
          if (b == a) continue;
          const double d2 = (p.positions[b] - p.positions[a]).norm_sq();
          if (d2 < best_sq) {
            best_sq = d2;
            found = true;
          }
        }
    if (found) dist[a] = std::sqrt(best_sq);
  }
  return dist;
}

}  // namespace detail

/// For each radius, the number of active particles whose nearest
/// neighbour lies strictly closer than that radius.
inline std::vector<std::size_t> min_distance_report(const ParticleSet& p,
                                                    const std::vector<double>& radii,
                                                    Rect bounds) {
  std::vector<std::size_t> counts(radii.size(), 0);
  if (radii.empty()) return counts;
  const double cutoff = *std::max_element(radii.begin(), radii.end());
  const auto nearest = detail::nearest_neighbour_distances(p, cutoff, bounds);
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (!p.active[a]) continue;
    for (std::size_t k = 0; k < radii.size(); ++k)
      if (nearest[a] < radii[k]) ++counts[k];
  }
  return counts;
}

/// One correction sweep: every violating pair is pushed apart
/// symmetrically along its separation vector to distance d_min,
/// clamped back into the free domain. Coincident pairs separate along
/// a direction drawn from the supplied generator.
inline void correct_min_distance(ParticleSet& p, double d_min, const SceneSpec& scene,
                                 Rng& rng) {
  if (d_min <= 0.0) throw ValidationError("correct_min_distance requires d_min > 0");
  const int n = static_cast<int>(p.size());
  const Rect bounds = scene.bounds();
  const double side = d_min;
  const int nbx = std::max(1, static_cast<int>(std::ceil(bounds.width() / side)));
  const int nby = std::max(1, static_cast<int>(std::ceil(bounds.height() / side)));
  std::vector<std::vector<int>> bins(static_cast<std::size_t>(nbx) * nby);
  auto coords = [&](Vec2 q) {
    int i = std::clamp(static_cast<int>(q.x / side), 0, nbx - 1);
    int j = std::clamp(static_cast<int>(q.y / side), 0, nby - 1);
    return std::pair{i, j};
  };
  for (int a = 0; a < n; ++a) {
    if (!p.active[a]) continue;
    const auto [i, j] = coords(p.positions[a]);
    bins[i + static_cast<std::size_t>(j) * nbx].push_back(a);
  }
  auto clamp_free = [&](Vec2 q) {
    q.x = std::clamp(q.x, 0.0, scene.width);
    q.y = std::clamp(q.y, 0.0, scene.height);
    for (const Rect& m : scene.obstacles) {
      if (!m.contains_open(q)) continue;
      // project to the nearest face of the obstacle
      const double to_lo_x = q.x - m.lo.x, to_hi_x = m.hi.x - q.x;
      const double to_lo_y = q.y - m.lo.y, to_hi_y = m.hi.y - q.y;
      const double best = std::min({to_lo_x, to_hi_x, to_lo_y, to_hi_y});
      if (best == to_lo_x)
        q.x = m.lo.x;
      else if (best == to_hi_x)
        q.x = m.hi.x;
      else if (best == to_lo_y)
        q.y = m.lo.y;
      else
        q.y = m.hi.y;
    }
    return q;
  };
  for (int a = 0; a < n; ++a) {
    if (!p.active[a]) continue;
    const auto [bi, bj] = coords(p.positions[a]);
    for (int j = std::max(0, bj - 1); j <= std::min(nby - 1, bj + 1); ++j)
      for (int i = std::max(0, bi - 1); i <= std::min(nbx - 1, bi + 1); ++i)
        for (int b : bins[i + static_cast<std::size_t>(j) * nbx]) {
          if (b <= a) continue;  // each unordered pair once per sweep
          Vec2 sep = p.positions[b] - p.positions[a];
          double dist = sep.norm();
          if (dist >= d_min) continue;
          Vec2 dir = dist > 0.0 ? sep / dist : rng.unit_vector();
          const Vec2 mid = (p.positions[a] + p.positions[b]) * 0.5;
          p.positions[a] = clamp_free(mid - dir * (d_min / 2.0));
          p.positions[b] = clamp_free(mid + dir * (d_min / 2.0));
        }
  }
}

}  // namespace crowdflow
