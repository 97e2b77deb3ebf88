#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <queue>
#include <vector>

#include "crowdflow/core.hpp"
#include "crowdflow/scene.hpp"

namespace crowdflow {

/// Line segment with distinct endpoints.
struct LineSeg {
  Vec2 p;
  Vec2 q;
};

/// Coefficients (a, b) of the carrier line: every x on the line
/// satisfies <a, x> = b.
struct LineCoeffs {
  Vec2 a;
  double b = 0.0;
};

inline LineCoeffs line_coefficients(const LineSeg& s) {
  if (s.p == s.q) throw ValidationError("line_coefficients: degenerate segment");
  return {{-(s.p.y - s.q.y), s.p.x - s.q.x},
          s.p.y * (s.p.x - s.q.x) - s.p.x * (s.p.y - s.q.y)};
}

/// Side of the line a point falls on: -1, 0 (within tolerance), +1.
inline int side_of_line(const LineCoeffs& line, Vec2 x, double tol = 1e-12) {
  const double d = line.a.dot(x) - line.b;
  if (d > tol) return 1;
  if (d < -tol) return -1;
  return 0;
}

/// Componentwise bounding box of the segment (possibly degenerate).
inline Rect circumscribed_rect(const LineSeg& s) {
  return {{std::min(s.p.x, s.q.x), std::min(s.p.y, s.q.y)},
          {std::max(s.p.x, s.q.x), std::max(s.p.y, s.q.y)}};
}

/// Closed-rectangle overlap test: true even for a shared edge or corner.
inline bool rects_overlap(const Rect& a, const Rect& b) {
  return !(a.hi.x < b.lo.x || b.hi.x < a.lo.x || a.hi.y < b.lo.y || b.hi.y < a.lo.y);
}

/// Whether the segment meets the closed rectangle. The segment misses
/// the rectangle exactly when the bounding boxes are disjoint or all
/// four corners lie strictly on one side of the carrier line.
inline bool segment_intersects_rect(const LineSeg& s, const Rect& m) {
  if (!rects_overlap(circumscribed_rect(s), m)) return false;
  const LineCoeffs line = line_coefficients(s);
  const Vec2 corners[4] = {m.lo, {m.hi.x, m.lo.y}, m.hi, {m.lo.x, m.hi.y}};
  int positive = 0, negative = 0;
  for (const Vec2& c : corners) {
    const int side = side_of_line(line, c);
    if (side > 0) ++positive;
    if (side < 0) ++negative;
  }
  return positive != 4 && negative != 4;
}

/// Weighted graph over the corners of margin-inflated obstacles plus
/// the goal anchor points, with edges between mutually visible
/// vertices. Shortest paths to the goal are precomputed once from the
/// goal side, so per-particle queries only connect the query point.
class VisibilityGraph {
 public:
  /// Vertices are inflated-obstacle corners (clipped to the domain) and
  /// the goal anchors (exit corners and midpoint). Edges join vertex
  /// pairs whose open segment crosses no inflated obstacle interior.
  VisibilityGraph(const SceneSpec& scene, double margin, const std::vector<Exit>& goals)
      : scene_(scene) {
    if (margin < 0.0) throw ValidationError("visibility margin must be >= 0");
    if (goals.empty()) throw ValidationError("visibility graph needs a goal exit");
    const Rect domain = scene.bounds();
    for (const Rect& m : scene.obstacles) {
      const Rect grown = m.inflated(margin);
      inflated_.push_back(grown.clipped(domain));
      // interior test rectangle, shrunk so grazing contact along faces
      // does not count as an intersection; the unclipped rectangle is
      // used so an obstacle inflated against the domain wall seals the
      // passage along that wall
      tests_.push_back(grown.inflated(-1e-9));
    }
    for (const Rect& m : inflated_)
      for (const Vec2 c : {m.lo, Vec2{m.hi.x, m.lo.y}, m.hi, Vec2{m.lo.x, m.hi.y}})
        add_vertex(c);
    anchor_begin_ = vertices_.size();
    for (const Exit& goal : goals) {
      // corner anchors are inset into the exit so the final waypoint
      // lies strictly inside the region walkers must reach
      const double inset =
          std::min(goal.region.width(), goal.region.height()) / 4.0;
      const Rect r = goal.region.inflated(-inset);
      for (const Vec2 c :
           {r.lo, Vec2{r.hi.x, r.lo.y}, r.hi, Vec2{r.lo.x, r.hi.y}, r.center()})
        add_vertex(c);
    }

    adjacency_.resize(vertices_.size());
    for (std::size_t u = 0; u < vertices_.size(); ++u)
      for (std::size_t v = u + 1; v < vertices_.size(); ++v)
        if (visible(vertices_[u], vertices_[v])) {
          const double w = (vertices_[u] - vertices_[v]).norm();
          adjacency_[u].push_back({static_cast<int>(v), w});
          adjacency_[v].push_back({static_cast<int>(u), w});
        }
    run_goal_dijkstra();
  }

  VisibilityGraph(const SceneSpec& scene, double margin, const Exit& goal)
      : VisibilityGraph(scene, margin, std::vector<Exit>{goal}) {}

  const std::vector<Vec2>& vertices() const { return vertices_; }
  const std::vector<Rect>& inflated_obstacles() const { return inflated_; }
  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& adj : adjacency_) n += adj.size();
    return n / 2;
  }

  /// True when the open segment between the points crosses no inflated
  /// obstacle interior.
  bool visible(Vec2 a, Vec2 b) const {
    if (a == b) return true;
    const LineSeg s{a, b};
    for (const Rect& m : tests_)
      if (m.valid() && segment_intersects_rect(s, m)) return false;
    return true;
  }

  double distance_to_goal(int vertex) const { return dist_[vertex]; }
  int parent(int vertex) const { return parent_[vertex]; }

  /// Minimal-length polyline from `start` to the goal through graph
  /// vertices, or nothing when the goal is unreachable.
  std::optional<std::vector<Vec2>> shortest_polyline(Vec2 start) const {
    double best = kInfinity;
    int best_vertex = -1;
    for (std::size_t v = 0; v < vertices_.size(); ++v) {
      if (!std::isfinite(dist_[v])) continue;
      if (!visible(start, vertices_[v])) continue;
      const double total = (vertices_[v] - start).norm() + dist_[v];
      if (total < best) {
        best = total;
        best_vertex = static_cast<int>(v);
      }
    }
    if (best_vertex < 0) return std::nullopt;
    std::vector<Vec2> line{start};
    for (int v = best_vertex; v >= 0; v = parent_[v]) {
      if (line.back() == vertices_[v]) continue;
      line.push_back(vertices_[v]);
    }
    return line;
  }

  /// Dump as JSON {vertices:[[x,y],...], edges:[[u,v,w],...]}.
  void dump_json(std::ostream& out) const {
    out << "{\"vertices\":[";
    for (std::size_t v = 0; v < vertices_.size(); ++v) {
      if (v) out << ",";
      out << "[" << vertices_[v].x << "," << vertices_[v].y << "]";
    }
    out << "],\"edges\":[";
    bool first = true;
    for (std::size_t u = 0; u < adjacency_.size(); ++u)
      for (const auto& [v, w] : adjacency_[u]) {
        if (static_cast<std::size_t>(v) < u) continue;
        if (!first) out << ",";
        first = false;
        out << "[" << u << "," << v << "," << w << "]";
      }
    out << "]}";
  }

 private:
  struct Edge {
    int to;
    double weight;
  };

  void add_vertex(Vec2 v) {
    for (const Vec2& existing : vertices_)
      if ((existing - v).norm() < 1e-12) return;
    vertices_.push_back(v);
  }

  void run_goal_dijkstra() {
    dist_.assign(vertices_.size(), kInfinity);
    parent_.assign(vertices_.size(), -1);
    using Entry = std::pair<double, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    for (std::size_t v = anchor_begin_; v < vertices_.size(); ++v) {
      dist_[v] = 0.0;
      heap.emplace(0.0, static_cast<int>(v));
    }
    while (!heap.empty()) {
      const auto [d, u] = heap.top();
      heap.pop();
      if (d > dist_[u]) continue;
      for (const Edge& e : adjacency_[u])
        if (dist_[u] + e.weight < dist_[e.to]) {
          dist_[e.to] = dist_[u] + e.weight;
          parent_[e.to] = u;
          heap.emplace(dist_[e.to], e.to);
        }
    }
  }

  SceneSpec scene_;
  std::vector<Rect> inflated_;
  std::vector<Rect> tests_;
  std::vector<Vec2> vertices_;
  std::vector<std::vector<Edge>> adjacency_;
  std::size_t anchor_begin_ = 0;
  std::vector<double> dist_;
  std::vector<int> parent_;
};

/// Waypoint path sampled at spacing dr: first waypoint at the start,
/// last at the goal end of the polyline, consecutive spacing dr except
/// the final gap.
struct Path {
  std::vector<Vec2> waypoints;
  double dr = 2.0;

  double length() const {
    double total = 0.0;
    for (std::size_t k = 1; k < waypoints.size(); ++k)
      total += (waypoints[k] - waypoints[k - 1]).norm();
    return total;
  }
};

/// Sample each leg of the polyline at spacing dr, keeping the corner
/// vertices as waypoints. Sampling restarts at every corner, so all
/// chords between consecutive waypoints lie exactly on the polyline
/// and never cut a corner into an obstacle.
inline Path resample_polyline(const std::vector<Vec2>& line, double dr) {
  if (dr <= 0.0) throw ValidationError("path sample spacing must be positive");
  Path path;
  path.dr = dr;
  if (line.empty()) return path;
  path.waypoints.push_back(line.front());
  for (std::size_t k = 1; k < line.size(); ++k) {
    const Vec2 from = line[k - 1], to = line[k];
    const double seg_len = (to - from).norm();
    if (seg_len <= 1e-12) continue;
    const Vec2 dir = (to - from) / seg_len;
    for (double along = dr; along < seg_len - 1e-12; along += dr)
      path.waypoints.push_back(from + dir * along);
    path.waypoints.push_back(to);
  }
  return path;
}

/// Shortest obstacle-avoiding path from `start`, resampled at spacing
/// dr; empty optional when the goal cannot be reached.
inline std::optional<Path> shortest_path(const VisibilityGraph& graph, Vec2 start,
                                         double dr) {
  const auto line = graph.shortest_polyline(start);
  if (!line) return std::nullopt;
  return resample_polyline(*line, dr);
}

/// Moving tracker over a path: the steering target is a weighted
/// average of the next waypoints, and the tracker index advances while
/// the bracketing waypoints give conflicting directions.
class PathTracker {
 public:
  PathTracker() = default;
  PathTracker(Path path, int lookahead = 4)
      : path_(std::move(path)), lookahead_(std::max(1, lookahead)) {
    weights_.resize(lookahead_);
    double sum = 0.0;
    for (int k = 0; k < lookahead_; ++k) sum += (weights_[k] = std::pow(2.0, -k));
    for (double& w : weights_) w /= sum;
  }

  const Path& path() const { return path_; }
  int index() const { return index_; }
  bool valid() const { return path_.waypoints.size() >= 1; }

  /// Unit steering direction from x toward the weighted target;
  /// returns the previous direction when x coincides with the target.
  Vec2 direction(Vec2 x) {
    advance(x);
    const auto& wp = path_.waypoints;
    const int last = static_cast<int>(wp.size()) - 1;
    Vec2 target{};
    for (int k = 0; k < lookahead_; ++k)
      target += weights_[k] * wp[std::min(index_ + k, last)];
    const Vec2 dir = (target - x).normalized();
    if (dir == Vec2{}) return previous_;
    previous_ = dir;
    return dir;
  }

 private:
  void advance(Vec2 x) {
    const auto& wp = path_.waypoints;
    const int last = static_cast<int>(wp.size()) - 1;
    while (index_ < last) {
      const int ahead = std::min(index_ + lookahead_, last);
      if (ahead == index_) break;
      if ((x - wp[index_]).dot(x - wp[ahead]) < 0.0)
        ++index_;
      else
        break;
    }
  }

  Path path_;
  int lookahead_ = 4;
  std::vector<double> weights_;
  Vec2 previous_{};
  int index_ = 0;
};

}  // namespace crowdflow
