// Command-line driver: scenario runs plus the verification probes used
// to sanity-check a build (kernel lattice bounds, marching accuracy,
// LCP solver against the enumeration oracle, scene validation).

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crowdflow/crowdflow.hpp"

namespace {

using namespace crowdflow;

int cmd_run(const std::string& config_path, const std::string& scene_path,
            const std::string& out_dir, std::int64_t seed_override,
            const std::string& mode_override) {
  const ConfigFile file = ConfigFile::load(config_path);
  SimConfig config = make_sim_config(file);
  if (seed_override >= 0) config.seed = static_cast<std::uint64_t>(seed_override);
  if (!mode_override.empty()) config.mode = sim_mode_from_string(mode_override);
  const SceneSpec scene = load_scenario(scene_path);

  Simulation sim(config, scene);
  const RunResult result = sim.run();

  nlohmann::json manifest;
  manifest["config"] = config_to_json(sim.config());
  manifest["scene_file"] = scene_path;
  manifest["seed"] = sim.config().seed;
  manifest["end_time"] = result.end_time;
  manifest["particles_total"] = result.particles.size();
  manifest["particles_active_end"] = result.particles.active_count();
  export_metrics(result.metrics, out_dir, manifest);

  std::printf("run finished: t=%.2f s, %zu walkers simulated, %zu still active\n",
              result.end_time, result.particles.size(),
              result.particles.active_count());
  std::printf("metrics written to %s\n", out_dir.c_str());
  return 0;
}

int cmd_probe_kernel(double spacing) {
  const std::vector<double> spacings =
      spacing > 0.0 ? std::vector<double>{spacing} : std::vector<double>{0.5, 1.0, 2.0};
  bool ok = true;
  for (double d : spacings) {
    const KernelSpec kernel{KernelKind::Wendland, d};
    const double upper = lattice_density_probe(d, kernel, LatticeAlignment::ParticleCentered);
    const double lower = lattice_density_probe(d, kernel, LatticeAlignment::CentroidCentered);
    const double packing = 2.0 / (std::sqrt(3.0) * d * d);
    const bool brackets = lower <= packing && packing <= upper;
    ok = ok && brackets && std::abs(upper * d * d - 1.19) < 0.012 &&
         std::abs(lower * d * d - 1.14) < 0.012;
    std::printf("d=%.3g: particle-centred %.5g, centroid-centred %.5g, packing %.5g %s\n",
                d, upper, lower, packing, brackets ? "(bracketed)" : "(NOT bracketed)");
  }
  std::puts(ok ? "kernel lattice bounds check: ok" : "kernel lattice bounds check: FAILED");
  return ok ? 0 : 3;
}

int cmd_probe_eikonal(int n) {
  SceneSpec scene;
  scene.width = n;
  scene.height = n;
  Exit goal;
  const double mid = n / 2.0;
  goal.region = Rect{{mid - 0.5, mid - 0.5}, {mid + 0.5, mid + 0.5}};
  scene.exits.push_back(goal);
  const Grid g = scene.make_grid(n, n);
  const CellMask mask(g);
  CellMask goal_cells(g);
  const CellIndex gc = cell_of_point(goal.region.center(), g);
  goal_cells.set(gc.i, gc.j, true);
  UnitCostField cost{EdgeField(g, 1.0), 1.0, 0.0, 0.0};

  const auto t0 = std::chrono::steady_clock::now();
  const PotentialField pot = fast_march(mask, goal_cells, cost);
  const auto t1 = std::chrono::steady_clock::now();

  const Vec2 centre = g.cell_center(gc);
  double max_err = 0.0;
  for (int j = 1; j <= g.ny; ++j)
    for (int i = 1; i <= g.nx; ++i) {
      const double exact = (g.cell_center(i, j) - centre).norm();
      max_err = std::max(max_err, std::abs(pot.phi.at(i, j) - exact));
    }
  const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  std::printf("grid %dx%d: max |phi - euclidean| = %.4f (bound %.1f), %.1f ms\n", n, n,
              max_err, 2.0 * g.dx, ms);
  const bool ok = max_err <= 2.0 * std::max(g.dx, g.dy);
  std::puts(ok ? "eikonal accuracy check: ok" : "eikonal accuracy check: FAILED");
  return ok ? 0 : 3;
}

int cmd_probe_lcp(int n, int trials, std::uint64_t seed) {
  Rng rng(seed);
  double max_dev = 0.0, max_fb = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const int size = 1 + static_cast<int>(rng.uniform() * n);
    std::vector<double> a(size * size);
    for (double& v : a) v = rng.uniform(-1.0, 1.0);
    std::vector<CsrMatrix::Triplet> t;
    for (int r = 0; r < size; ++r)
      for (int c = 0; c < size; ++c) {
        double v = 0.0;
        for (int k = 0; k < size; ++k) v += a[k * size + r] * a[k * size + c];
        if (r == c) v += 0.5;
        t.push_back({r, c, v});
      }
    LcpProblem prob{CsrMatrix::from_triplets(size, size, std::move(t)), {}};
    prob.q.resize(size);
    for (double& v : prob.q) v = rng.uniform(-2.0, 2.0);

    const LcpSolution sol = pgs_solve(prob, {}, 1e-12, 100000);
    const std::vector<double> reference = lcp_active_set_oracle(prob.M, prob.q);
    for (int i = 0; i < size; ++i)
      max_dev = std::max(max_dev, std::abs(sol.z[i] - reference[i]));
    max_fb = std::max(max_fb, sol.fb_residual);
  }
  std::printf("%d trials (n <= %d): max deviation %.3g, max FB residual %.3g\n", trials,
              n, max_dev, max_fb);
  const bool ok = max_dev <= 1e-6;
  std::printf("max deviation %s 1e-6: %s\n", ok ? "<=" : ">", ok ? "ok" : "FAILED");
  return ok ? 0 : 3;
}

int cmd_validate_scene(const std::string& path) {
  const SceneSpec scene = load_scenario(path);
  std::printf("scene ok: %.6g x %.6g m, %zu obstacles, %zu entrances, %zu exits\n",
              scene.width, scene.height, scene.obstacles.size(), scene.entrances.size(),
              scene.exits.size());
  const double fraction = scene.obstacle_area() / (scene.width * scene.height);
  std::printf("obstacle area fraction: %.4f\n", fraction);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crowdflow: multiscale crowd simulation"};
  app.require_subcommand(1);

  std::string config_path, scene_path, out_dir = "out", mode_override;
  std::int64_t seed_override = -1;
  auto* run_cmd = app.add_subcommand("run", "run a scenario and export metrics");
  run_cmd->add_option("--config", config_path, "configuration file")->required();
  run_cmd->add_option("--scene", scene_path, "scenario JSON file")->required();
  run_cmd->add_option("--out", out_dir, "output directory");
  run_cmd->add_option("--seed", seed_override, "seed override");
  run_cmd->add_option("--mode", mode_override, "mode override");

  double spacing = 0.0;
  auto* kernel_cmd = app.add_subcommand("probe-kernel", "lattice density bounds check");
  kernel_cmd->add_option("--spacing", spacing, "single lattice spacing (default 0.5/1/2)");

  int eik_n = 100;
  auto* eik_cmd = app.add_subcommand("probe-eikonal", "distance-field accuracy check");
  eik_cmd->add_option("--n", eik_n, "grid size")->check(CLI::PositiveNumber);

  int lcp_n = 8, lcp_trials = 1000;
  std::uint64_t lcp_seed = 7;
  auto* lcp_cmd = app.add_subcommand("probe-lcp", "PGS vs active-set oracle batch");
  lcp_cmd->add_option("--n", lcp_n, "max system size (<= 12)")->check(CLI::Range(1, 12));
  lcp_cmd->add_option("--trials", lcp_trials, "number of systems");
  lcp_cmd->add_option("--seed", lcp_seed, "rng seed");

  std::string validate_path;
  auto* val_cmd = app.add_subcommand("validate-scene", "schema and geometry report");
  val_cmd->add_option("--scene", validate_path, "scenario JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage errors
  }

  try {
    if (run_cmd->parsed())
      return cmd_run(config_path, scene_path, out_dir, seed_override, mode_override);
    if (kernel_cmd->parsed()) return cmd_probe_kernel(spacing);
    if (eik_cmd->parsed()) return cmd_probe_eikonal(eik_n);
    if (lcp_cmd->parsed()) return cmd_probe_lcp(lcp_n, lcp_trials, lcp_seed);
    if (val_cmd->parsed()) return cmd_validate_scene(validate_path);
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 3;
  }
  return 1;
}
