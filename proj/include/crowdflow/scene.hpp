#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdflow/core.hpp"

namespace crowdflow {

/// Inflow boundary: particles appear inside `region` following a
/// Poisson process with the given rate, optionally capped in total.
struct Entrance {
  Rect region;
  double rate = 0.0;                       // particles per second
  std::optional<std::int64_t> capacity{};  // unbounded when empty
};

/// Outflow boundary: particles entering `region` leave the scene,
/// optionally throttled to `cap` particles per second.
struct Exit {
  Rect region;
  std::optional<double> cap{};  // unbounded when empty
};

/// 1-based cell index, Cartesian from the bottom-left corner.
struct CellIndex {
  int i = 1;
  int j = 1;
  bool operator==(const CellIndex&) const = default;
};

/// Equidistant grid tiling a width x height domain exactly.
/// Cell (i,j) covers [(i-1)dx, i dx) x [(j-1)dy, j dy), half-open so
/// every point maps to exactly one cell; the top/right domain boundary
/// is folded into the last cell.
struct Grid {
  int nx = 1;
  int ny = 1;
  double dx = 1.0;
  double dy = 1.0;

  int cell_count() const { return nx * ny; }
  double width() const { return nx * dx; }
  double height() const { return ny * dy; }

  /// 1-based flat index i + (j-1)*nx used to orient vectors and matrices.
  int flat(CellIndex c) const { return c.i + (c.j - 1) * nx; }
  CellIndex unflatten(int flat_index) const {
    const int zero_based = flat_index - 1;
    return {zero_based % nx + 1, zero_based / nx + 1};
  }
  /// 0-based storage offset of cell (i,j).
  int offset(CellIndex c) const { return (c.i - 1) + (c.j - 1) * nx; }
  int offset(int i, int j) const { return (i - 1) + (j - 1) * nx; }

  bool in_bounds(CellIndex c) const {
    return c.i >= 1 && c.i <= nx && c.j >= 1 && c.j <= ny;
  }
  Vec2 cell_center(CellIndex c) const {
    return {(c.i - 0.5) * dx, (c.j - 0.5) * dy};
  }
  Vec2 cell_center(int i, int j) const { return cell_center(CellIndex{i, j}); }
  Rect cell_rect(CellIndex c) const {
    return {{(c.i - 1) * dx, (c.j - 1) * dy}, {c.i * dx, c.j * dy}};
  }
};

/// Rectangular simulation domain with axis-aligned inhomogeneities.
struct SceneSpec {
  double width = 0.0;
  double height = 0.0;
  std::vector<Rect> obstacles;
  std::vector<Entrance> entrances;
  std::vector<Exit> exits;

  Rect bounds() const { return {{0.0, 0.0}, {width, height}}; }

  bool inside_domain(Vec2 p) const { return bounds().contains(p); }

  /// True when p lies strictly inside some obstacle; points on an
  /// obstacle face count as free (motion is stopped *at* the edge).
  bool inside_obstacle(Vec2 p) const {
    for (const Rect& m : obstacles)
      if (m.contains_open(p)) return true;
    return false;
  }

  bool in_exit(Vec2 p) const {
    for (const Exit& e : exits)
      if (e.region.contains(p)) return true;
    return false;
  }

  double obstacle_area() const {
    double a = 0.0;
    for (const Rect& m : obstacles) a += m.area();
    return a;
  }

  /// Grid with the requested cell counts; cells tile the domain exactly.
  Grid make_grid(int nx, int ny) const {
    if (nx < 1 || ny < 1) throw ValidationError("grid cell counts must be positive");
    return Grid{nx, ny, width / nx, height / ny};
  }

  void validate() const {
    if (width <= 0.0 || height <= 0.0)
      throw ValidationError("domain dimensions must be positive");
    const Rect domain = bounds();
    auto check_inside = [&](const Rect& r, const char* what) {
      if (!r.valid())
        throw ValidationError(std::string(what) + " rectangle has min > max");
      if (!domain.contains_rect(r))
        throw ValidationError(std::string(what) + " rectangle lies outside the domain");
    };
    for (const Rect& m : obstacles) check_inside(m, "obstacle");
    auto overlaps_obstacle = [&](const Rect& r) {
      for (const Rect& m : obstacles) {
        const bool disjoint = r.hi.x <= m.lo.x || m.hi.x <= r.lo.x ||
                              r.hi.y <= m.lo.y || m.hi.y <= r.lo.y;
        if (!disjoint) return true;
      }
      return false;
    };
    for (const Entrance& e : entrances) {
      check_inside(e.region, "entrance");
      if (e.rate < 0.0) throw ValidationError("entrance rate must be >= 0");
      if (overlaps_obstacle(e.region))
        throw ValidationError("entrance overlaps an obstacle");
    }
    for (const Exit& e : exits) {
      check_inside(e.region, "exit");
      if (e.cap && *e.cap <= 0.0) throw ValidationError("finite exit cap must be > 0");
      if (overlaps_obstacle(e.region))
        throw ValidationError("exit overlaps an obstacle");
    }
  }
};

namespace detail {

inline Rect rect_from_json(const nlohmann::json& arr, const char* what) {
  if (!arr.is_array() || arr.size() != 4)
    throw ParseError(std::string(what) + " must be an array [x0,y0,x1,y1]");
  for (const auto& v : arr)
    if (!v.is_number()) throw ParseError(std::string(what) + " has a non-numeric entry");
  return Rect{{arr[0].get<double>(), arr[1].get<double>()},
              {arr[2].get<double>(), arr[3].get<double>()}};
}

}  // namespace detail

/// Parse a scenario from JSON text. Schema:
///   { "width": w, "height": h,
///     "obstacles": [[x0,y0,x1,y1], ...],
///     "entrances": [{"rect": [...], "rate": r, "capacity": n|null}, ...],
///     "exits":     [{"rect": [...], "cap": c|null}, ...] }
/// All lengths in meters. Missing lists default to empty.
inline SceneSpec parse_scenario(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("scenario JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("scenario root must be a JSON object");
  SceneSpec scene;
  if (!doc.contains("width") || !doc.contains("height"))
    throw ParseError("scenario requires numeric width and height");
  scene.width = doc["width"].get<double>();
  scene.height = doc["height"].get<double>();
  for (const auto& o : doc.value("obstacles", nlohmann::json::array()))
    scene.obstacles.push_back(detail::rect_from_json(o, "obstacle"));
  for (const auto& e : doc.value("entrances", nlohmann::json::array())) {
    Entrance in;
    in.region = detail::rect_from_json(e.at("rect"), "entrance rect");
    in.rate = e.value("rate", 0.0);
    if (e.contains("capacity") && !e["capacity"].is_null())
      in.capacity = e["capacity"].get<std::int64_t>();
    scene.entrances.push_back(in);
  }
  for (const auto& e : doc.value("exits", nlohmann::json::array())) {
    Exit out;
    out.region = detail::rect_from_json(e.at("rect"), "exit rect");
    if (e.contains("cap") && !e["cap"].is_null()) out.cap = e["cap"].get<double>();
    scene.exits.push_back(out);
  }
  scene.validate();
  return scene;
}

/// Load and validate a scenario file.
inline SceneSpec load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

/// Cell containing p under the half-open membership convention.
inline CellIndex cell_of_point(Vec2 p, const Grid& g) {
  if (p.x < 0.0 || p.y < 0.0 || p.x > g.width() || p.y > g.height())
    throw ValidationError("point lies outside the domain");
  int i = static_cast<int>(p.x / g.dx) + 1;
  int j = static_cast<int>(p.y / g.dy) + 1;
  if (i > g.nx) i = g.nx;  // top/right boundary folds into the last cell
  if (j > g.ny) j = g.ny;
  return {i, j};
}

/// Boolean field over cells, true where the cell is covered by an
/// obstacle. Coverage is decided by cell-center containment, which
/// snaps obstacle boundaries to cell edges: every cell ends up fully
/// accessible or fully covered.
class CellMask {
 public:
  CellMask() = default;
  CellMask(const Grid& g, bool value = false)
      : nx_(g.nx), ny_(g.ny), cells_(static_cast<std::size_t>(g.nx) * g.ny, value) {}

  bool at(int i, int j) const { return cells_[(i - 1) + (j - 1) * static_cast<std::size_t>(nx_)]; }
  void set(int i, int j, bool v) { cells_[(i - 1) + (j - 1) * static_cast<std::size_t>(nx_)] = v; }
  bool at(CellIndex c) const { return at(c.i, c.j); }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  bool operator==(const CellMask&) const = default;

 private:
  int nx_ = 0;
  int ny_ = 0;
  std::vector<bool> cells_;
};

inline CellMask obstacle_cell_mask(const SceneSpec& scene, const Grid& g) {
  CellMask mask(g);
  for (int j = 1; j <= g.ny; ++j)
    for (int i = 1; i <= g.nx; ++i) {
      const Vec2 c = g.cell_center(i, j);
      for (const Rect& m : scene.obstacles)
        if (m.contains(c)) {
          mask.set(i, j, true);
          break;
        }
    }
  return mask;
}

}  // namespace crowdflow
