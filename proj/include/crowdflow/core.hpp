#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace crowdflow {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Thrown when an input file cannot be parsed.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when parsed input violates a documented invariant.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  bool operator==(const Vec2&) const = default;

  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
  double norm_sq() const { return x * x + y * y; }

  /// Unit vector in the same direction; (0,0) when shorter than eps.
  Vec2 normalized(double eps = 1e-12) const {
    const double n = norm();
    return n < eps ? Vec2{} : Vec2{x / n, y / n};
  }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }

/// Axis-aligned rectangle, min corner <= max corner componentwise.
struct Rect {
  Vec2 lo;
  Vec2 hi;

  bool valid() const { return lo.x <= hi.x && lo.y <= hi.y; }
  double width() const { return hi.x - lo.x; }
  double height() const { return hi.y - lo.y; }
  double area() const { return width() * height(); }
  Vec2 center() const { return {(lo.x + hi.x) / 2, (lo.y + hi.y) / 2}; }

  /// Closed containment (boundary counts as inside).
  bool contains(Vec2 p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
  }
  /// Open containment (boundary does not count).
  bool contains_open(Vec2 p) const {
    return p.x > lo.x && p.x < hi.x && p.y > lo.y && p.y < hi.y;
  }
  bool contains_rect(const Rect& r) const {
    return contains(r.lo) && contains(r.hi);
  }

  /// Rectangle grown by m on every side, optionally clipped to bounds.
  Rect inflated(double m) const { return {{lo.x - m, lo.y - m}, {hi.x + m, hi.y + m}}; }
  Rect clipped(const Rect& bounds) const {
    return {{std::max(lo.x, bounds.lo.x), std::max(lo.y, bounds.lo.y)},
            {std::min(hi.x, bounds.hi.x), std::min(hi.y, bounds.hi.y)}};
  }

  /// Euclidean distance from p to the closed rectangle (0 when inside).
  double distance(Vec2 p) const {
    const double dx = std::max({lo.x - p.x, 0.0, p.x - hi.x});
    const double dy = std::max({lo.y - p.y, 0.0, p.y - hi.y});
    return std::hypot(dx, dy);
  }
};

}  // namespace crowdflow
