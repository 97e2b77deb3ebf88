#include <catch2/catch_amalgamated.hpp>

#include "crowdflow/rng.hpp"
#include "crowdflow/scene.hpp"

using namespace crowdflow;

namespace {

SceneSpec make_scene(double w, double h) {
  SceneSpec s;
  s.width = w;
  s.height = h;
  return s;
}

}  // namespace

TEST_CASE("minimal scenario file parses with empty obstacle list") {
  const std::string text = R"({"width": 10, "height": 10,
    "exits": [{"rect": [9.5, 4, 10, 6], "cap": null}]})";
  const SceneSpec s = parse_scenario(text);
  CHECK(s.width == 10.0);
  CHECK(s.obstacles.empty());
  REQUIRE(s.exits.size() == 1);
  CHECK_FALSE(s.exits[0].cap.has_value());
}

TEST_CASE("out-of-domain obstacle is rejected") {
  const std::string text = R"({"width": 10, "height": 10,
    "obstacles": [[2, 2, 4, 12]]})";
  CHECK_THROWS_AS(parse_scenario(text), ValidationError);
}

TEST_CASE("malformed scenario file is a parse error") {
  CHECK_THROWS_AS(parse_scenario("{not json"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"width": 10})"), ParseError);
  CHECK_THROWS_AS(load_scenario("definitely_missing.json"), ParseError);
}

TEST_CASE("entrance overlapping an obstacle is rejected") {
  const std::string text = R"({"width": 10, "height": 10,
    "obstacles": [[2, 2, 4, 4]],
    "entrances": [{"rect": [3, 3, 5, 5], "rate": 1.0}]})";
  CHECK_THROWS_AS(parse_scenario(text), ValidationError);
}

TEST_CASE("cell_of_point maps points and boundary ties") {
  const Grid g{10, 10, 1.0, 1.0};
  CHECK(cell_of_point({0.1, 0.1}, g) == CellIndex{1, 1});
  // a shared cell edge belongs to the upper cell (half-open membership),
  // so (1,1) lies in cell (2,2)
  CHECK(cell_of_point({1.0, 1.0}, g) == CellIndex{2, 2});
  // the domain boundary folds into the last cell
  CHECK(cell_of_point({10.0, 10.0}, g) == CellIndex{10, 10});
  CHECK_THROWS_AS(cell_of_point({-0.1, 5.0}, g), ValidationError);
}

TEST_CASE("flat index round-trips and matches i + (j-1)Nx") {
  const Grid g{7, 5, 1.0, 1.0};
  for (int j = 1; j <= g.ny; ++j)
    for (int i = 1; i <= g.nx; ++i) {
      const CellIndex c{i, j};
      CHECK(g.flat(c) == i + (j - 1) * g.nx);
      CHECK(g.unflatten(g.flat(c)) == c);
    }
}

TEST_CASE("grid tiles the domain exactly") {
  SceneSpec s = make_scene(12.5, 7.5);
  const Grid g = s.make_grid(25, 15);
  CHECK(g.dx * g.nx == Catch::Approx(s.width));
  CHECK(g.dy * g.ny == Catch::Approx(s.height));
  // cells only overlap on edges: a point strictly inside a cell maps there
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    const Vec2 p{rng.uniform(0.0, s.width), rng.uniform(0.0, s.height)};
    const CellIndex c = cell_of_point(p, g);
    CHECK(g.cell_rect(c).contains(p));
  }
}

TEST_CASE("obstacle mask covers aligned obstacles exactly") {
  SceneSpec s = make_scene(10, 10);
  const Grid g = s.make_grid(10, 10);

  SECTION("no obstacles -> all false") {
    const CellMask mask = obstacle_cell_mask(s, g);
    for (int j = 1; j <= 10; ++j)
      for (int i = 1; i <= 10; ++i) CHECK_FALSE(mask.at(i, j));
  }

  SECTION("cell-aligned obstacle covers exactly its cells") {
    s.obstacles.push_back({{1.0, 1.0}, {4.0, 4.0}});  // tiles cells (2..4)x(2..4)
    const CellMask mask = obstacle_cell_mask(s, g);
    int covered = 0;
    for (int j = 1; j <= 10; ++j)
      for (int i = 1; i <= 10; ++i) covered += mask.at(i, j) ? 1 : 0;
    CHECK(covered == 9);
    CHECK(mask.at(2, 2));
    CHECK(mask.at(4, 4));
    CHECK_FALSE(mask.at(5, 5));
  }

  SECTION("unaligned obstacle matches the brute-force centre check") {
    s.obstacles.push_back({{1.4, 1.4}, {2.6, 2.6}});
    const CellMask mask = obstacle_cell_mask(s, g);
    for (int j = 1; j <= 10; ++j)
      for (int i = 1; i <= 10; ++i) {
        const Vec2 c = g.cell_center(i, j);
        const bool expected = s.obstacles[0].contains(c);
        CHECK(mask.at(i, j) == expected);
      }
  }
}

TEST_CASE("obstacle mask is idempotent") {
  SceneSpec s = make_scene(10, 10);
  s.obstacles.push_back({{1.4, 1.4}, {2.6, 2.6}});
  s.obstacles.push_back({{6.0, 0.5}, {9.9, 3.3}});
  const Grid g = s.make_grid(20, 20);
  const CellMask once = obstacle_cell_mask(s, g);
  const CellMask twice = obstacle_cell_mask(s, g);
  CHECK(once == twice);
}

TEST_CASE("funnel scenario file has the expected obstacle fraction") {
  const SceneSpec s = load_scenario(std::string(SCENES_DIR) + "/funnel_a.json");
  CHECK(s.width == 320.0);
  CHECK(s.height == 320.0);
  const double fraction = s.obstacle_area() / (s.width * s.height);
  CHECK(fraction == Catch::Approx(0.18).margin(0.01));
}
