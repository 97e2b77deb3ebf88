#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "crowdflow/core.hpp"
#include "crowdflow/scene.hpp"

namespace crowdflow {

/// Cell-centered scalar quantity stored row-major by the flat index
/// i + (j-1)*nx. Values are finite except where infinity is used as a
/// documented sentinel (potential on obstacle cells).
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const Grid& g, double value = 0.0)
      : grid_(g), values_(static_cast<std::size_t>(g.cell_count()), value) {}

  const Grid& grid() const { return grid_; }
  int size() const { return static_cast<int>(values_.size()); }

  double& at(int i, int j) { return values_[grid_.offset(i, j)]; }
  double at(int i, int j) const { return values_[grid_.offset(i, j)]; }
  double& at(CellIndex c) { return at(c.i, c.j); }
  double at(CellIndex c) const { return at(c.i, c.j); }
  double& operator[](int offset) { return values_[offset]; }
  double operator[](int offset) const { return values_[offset]; }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  /// Zero-extended lookup: out-of-range indices read the virtual layer.
  double extended(int i, int j) const {
    if (i < 1 || i > grid_.nx || j < 1 || j > grid_.ny) return 0.0;
    return at(i, j);
  }

  double max_value() const {
    double m = -kInfinity;
    for (double v : values_) m = std::max(m, v);
    return m;
  }

  ScalarField& fill(double v) {
    std::fill(values_.begin(), values_.end(), v);
    return *this;
  }

 private:
  Grid grid_;
  std::vector<double> values_;
};

/// Pair of cell-centered scalar fields acting as a vector quantity.
struct VectorField {
  ScalarField x;
  ScalarField y;

  VectorField() = default;
  explicit VectorField(const Grid& g, Vec2 value = {})
      : x(g, value.x), y(g, value.y) {}

  const Grid& grid() const { return x.grid(); }
  Vec2 at(int i, int j) const { return {x.at(i, j), y.at(i, j)}; }
  void set(int i, int j, Vec2 v) {
    x.at(i, j) = v.x;
    y.at(i, j) = v.y;
  }
};

/// The four axis directions used on the staggered grid, in the order
/// theta = 0, pi/2, pi, 3pi/2.
enum class Dir : int { East = 0, North = 1, West = 2, South = 3 };

inline constexpr std::array<Dir, 4> kDirs = {Dir::East, Dir::North, Dir::West,
                                             Dir::South};

inline constexpr Vec2 dir_vector(Dir d) {
  switch (d) {
    case Dir::East: return {1.0, 0.0};
    case Dir::North: return {0.0, 1.0};
    case Dir::West: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

inline constexpr std::pair<int, int> dir_step(Dir d) {
  switch (d) {
    case Dir::East: return {1, 0};
    case Dir::North: return {0, 1};
    case Dir::West: return {-1, 0};
    default: return {0, -1};
  }
}

/// Edge-centered quantity with one directional layer per theta.
/// Layer d at (i,j) holds the value on the edge between cell (i,j) and
/// its neighbour in direction d, i.e. the fractional index
/// (i + n_x/2, j + n_y/2).
class EdgeField {
 public:
  EdgeField() = default;
  explicit EdgeField(const Grid& g, double value = 0.0)
      : layers_{ScalarField(g, value), ScalarField(g, value),
                ScalarField(g, value), ScalarField(g, value)} {}

  const Grid& grid() const { return layers_[0].grid(); }
  ScalarField& layer(Dir d) { return layers_[static_cast<int>(d)]; }
  const ScalarField& layer(Dir d) const { return layers_[static_cast<int>(d)]; }

  double at(int i, int j, Dir d) const { return layer(d).at(i, j); }
  double& at(int i, int j, Dir d) { return layer(d).at(i, j); }

  /// Position of the edge midpoint for layer d at cell (i,j).
  Vec2 edge_midpoint(int i, int j, Dir d) const {
    const Grid& g = grid();
    const Vec2 n = dir_vector(d);
    return g.cell_center(i, j) + Vec2{n.x * g.dx / 2, n.y * g.dy / 2};
  }

 private:
  std::array<ScalarField, 4> layers_;
};

/// Piece-wise linear cutoff: 0 below a, 1 above b, linear between.
inline double cutoff_L(double a, double b, double t) {
  if (a >= b) throw ValidationError("cutoff_L requires a < b");
  if (t < a) return 0.0;
  if (t > b) return 1.0;
  return (t - a) / (b - a);
}

/// Central-difference gradient (D_x u / 2dx, D_y u / 2dy) with the
/// zero-extended virtual layer outside the domain.
inline VectorField gradient_central(const ScalarField& u) {
  const Grid& g = u.grid();
  VectorField out(g);
  for (int j = 1; j <= g.ny; ++j)
    for (int i = 1; i <= g.nx; ++i) {
      out.x.at(i, j) = (u.extended(i + 1, j) - u.extended(i - 1, j)) / (2.0 * g.dx);
      out.y.at(i, j) = (u.extended(i, j + 1) - u.extended(i, j - 1)) / (2.0 * g.dy);
    }
  return out;
}

/// Central-difference divergence of a vector field, zero-extended.
inline ScalarField divergence_central(const VectorField& w) {
  const Grid& g = w.grid();
  ScalarField out(g);
  for (int j = 1; j <= g.ny; ++j)
    for (int i = 1; i <= g.nx; ++i)
      out.at(i, j) = (w.x.extended(i + 1, j) - w.x.extended(i - 1, j)) / (2.0 * g.dx) +
                     (w.y.extended(i, j + 1) - w.y.extended(i, j - 1)) / (2.0 * g.dy);
  return out;
}

/// Compact five-point Laplacian with the zero-extended virtual layer.
inline ScalarField laplacian_compact(const ScalarField& u) {
  const Grid& g = u.grid();
  ScalarField out(g);
  for (int j = 1; j <= g.ny; ++j)
    for (int i = 1; i <= g.nx; ++i) {
      const double uij = u.at(i, j);
      out.at(i, j) =
          (u.extended(i + 1, j) - 2.0 * uij + u.extended(i - 1, j)) / (g.dx * g.dx) +
          (u.extended(i, j + 1) - 2.0 * uij + u.extended(i, j - 1)) / (g.dy * g.dy);
    }
  return out;
}

namespace detail {

/// Clamp p to the rectangle spanned by the outer ring of cell centers.
inline Vec2 clamp_to_center_ring(Vec2 p, const Grid& g) {
  return {std::clamp(p.x, 0.5 * g.dx, (g.nx - 0.5) * g.dx),
          std::clamp(p.y, 0.5 * g.dy, (g.ny - 0.5) * g.dy)};
}

}  // namespace detail

/// Value of the bilinear interpolant through the four surrounding cell
/// centers. Queries in the half-cell margin outside the center ring are
/// clamped to the ring first.
inline double bilinear_sample(const ScalarField& u, Vec2 p) {
  const Grid& g = u.grid();
  if (!Rect{{0, 0}, {g.width(), g.height()}}.contains(p))
    throw ValidationError("bilinear_sample: point outside the domain");
  const Vec2 q = detail::clamp_to_center_ring(p, g);
  int i = static_cast<int>(q.x / g.dx + 0.5);
  int j = static_cast<int>(q.y / g.dy + 0.5);
  i = std::clamp(i, 1, g.nx - 1);
  j = std::clamp(j, 1, g.ny - 1);
  const Vec2 c = g.cell_center(i, j);
  const double tx = (q.x - c.x) / g.dx;
  const double ty = (q.y - c.y) / g.dy;
  const double lower = u.at(i, j) * (1.0 - tx) + u.at(i + 1, j) * tx;
  const double upper = u.at(i, j + 1) * (1.0 - tx) + u.at(i + 1, j + 1) * tx;
  return lower * (1.0 - ty) + upper * ty;
}

/// bilinear_sample with the query point clamped into the domain first;
/// used where look-ahead probes may leave the domain.
inline double bilinear_sample_clamped(const ScalarField& u, Vec2 p) {
  const Grid& g = u.grid();
  return bilinear_sample(u, {std::clamp(p.x, 0.0, g.width()),
                             std::clamp(p.y, 0.0, g.height())});
}

inline Vec2 bilinear_sample(const VectorField& w, Vec2 p) {
  return {bilinear_sample(w.x, p), bilinear_sample(w.y, p)};
}

inline Vec2 bilinear_sample_clamped(const VectorField& w, Vec2 p) {
  return {bilinear_sample_clamped(w.x, p), bilinear_sample_clamped(w.y, p)};
}

/// Dump in the fields CSV format: header `i,j,value`, row-major by the
/// flat index (1-based Cartesian indices).
inline void dump_csv(const ScalarField& u, std::ostream& out) {
  out << "i,j,value\n";
  const Grid& g = u.grid();
  char line[96];
  for (int j = 1; j <= g.ny; ++j)
    for (int i = 1; i <= g.nx; ++i) {
      std::snprintf(line, sizeof line, "%d,%d,%.17g\n", i, j, u.at(i, j));
      out << line;
    }
}

inline void dump_csv(const VectorField& w, std::ostream& out) {
  out << "i,j,vx,vy\n";
  const Grid& g = w.grid();
  char line[128];
  for (int j = 1; j <= g.ny; ++j)
    for (int i = 1; i <= g.nx; ++i) {
      std::snprintf(line, sizeof line, "%d,%d,%.17g,%.17g\n", i, j, w.x.at(i, j),
                    w.y.at(i, j));
      out << line;
    }
}

}  // namespace crowdflow
