// Acceptance suite: every release-gating property of the engine, one
// printed pass/fail line per criterion. Run via `ctest -R acceptance`
// or directly with `./acceptance_tests -s`.

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "crowdflow/crowdflow.hpp"

using namespace crowdflow;
using Clock = std::chrono::steady_clock;

namespace {

void report(int criterion, bool ok, const std::string& detail) {
  std::printf("[criterion %2d] %s  %s\n", criterion, ok ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

UnitCostField unit_cost_field(const Grid& g, double value) {
  return UnitCostField{EdgeField(g, value), 1.0, 0.0, 0.0};
}

CsrMatrix random_spd(int n, Rng& rng) {
  std::vector<double> a(n * n);
  for (double& v : a) v = rng.uniform(-1.0, 1.0);
  std::vector<CsrMatrix::Triplet> t;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      double v = 0.0;
      for (int k = 0; k < n; ++k) v += a[k * n + r] * a[k * n + c];
      if (r == c) v += 0.5;
      t.push_back({r, c, v});
    }
  return CsrMatrix::from_triplets(n, n, std::move(t));
}

/// SPH-interpolated disc cloud on a 48x48 grid, density rescaled so the
/// peak sits at `target` times the cap; roughness comes from the
/// particle sampling itself.
std::pair<ScalarField, VectorField> crowded_field(const Grid& g, double target,
                                                  double cap, int n, Rng& rng) {
  ParticleSet p;
  for (int k = 0; k < n; ++k) {
    const double ang = rng.uniform(0.0, 2.0 * M_PI);
    const double rad = 12.0 * std::sqrt(rng.uniform());
    p.add(Vec2{24.0, 24.0} + Vec2{std::cos(ang), std::sin(ang)} * rad,
          Vec2{0.4, 0.15} + rng.unit_vector() * 0.3, 2.0);
  }
  auto [rho, v] = interpolate_fields(p, {KernelKind::Wendland, 0.85}, g);
  const double scale = target * cap / rho.max_value();
  for (double& r : rho.values()) r *= scale;
  return {std::move(rho), std::move(v)};
}

SceneSpec funnel_scene() {
  SceneSpec s;
  s.width = 40.0;
  s.height = 40.0;
  s.obstacles.push_back({{0.0, 0.0}, {16.0, 8.0}});
  s.obstacles.push_back({{24.0, 0.0}, {40.0, 8.0}});
  s.obstacles.push_back({{0.0, 8.0}, {12.0, 16.0}});
  s.obstacles.push_back({{28.0, 8.0}, {40.0, 16.0}});
  s.obstacles.push_back({{0.0, 16.0}, {8.0, 24.0}});
  s.obstacles.push_back({{32.0, 16.0}, {40.0, 24.0}});
  s.obstacles.push_back({{0.0, 24.0}, {4.0, 28.0}});
  s.obstacles.push_back({{36.0, 24.0}, {40.0, 28.0}});
  s.exits.push_back({Rect{{16.5, 0.0}, {23.5, 0.5}}, std::nullopt});
  return s;
}

SimConfig funnel_config(int n) {
  SimConfig cfg;
  cfg.mode = SimMode::VisgraphUic;
  cfg.dt = 0.05;
  cfg.t_max = 150.0;
  cfg.seed = 5;
  cfg.grid_nx = 80;
  cfg.grid_ny = 80;
  cfg.smoothing_h = 1.2;
  cfg.speed.kind = SpeedDistribution::Kind::Uniform;
  cfg.speed.lo = 1.0;
  cfg.speed.hi = 2.0;
  cfg.spawn = SpawnKind::Rect;
  cfg.spawn_rect = {{4.0, 29.0}, {36.0, 39.0}};
  cfg.n_initial = n;
  cfg.particle_radius = 0.2;
  cfg.d_min = 0.3;
  cfg.pressure.rho_max = 1.5;
  cfg.pressure.v_max = 2.0;
  cfg.vg_margin = 0.4;
  cfg.vg_sample_dr = 2.0;
  return cfg;
}

SimConfig traffic_config() {
  SimConfig cfg;
  cfg.mode = SimMode::VisgraphUic;
  cfg.dt = 0.05;
  cfg.t_max = 60.0;
  cfg.seed = 11;
  cfg.grid_nx = 100;
  cfg.grid_ny = 100;
  cfg.smoothing_h = 1.2;
  cfg.speed.kind = SpeedDistribution::Kind::Normal;
  cfg.speed.mean = 1.44;
  cfg.speed.stddev = 0.15;
  cfg.spawn = SpawnKind::None;
  cfg.particle_radius = 0.2;
  cfg.d_min = 0.7;
  cfg.pressure.rho_max = 0.35;
  cfg.pressure.v_max = 1.6;
  cfg.vg_margin = 0.4;
  cfg.vg_sample_dr = 2.0;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("criterion 1: lattice density bounds") {
  const auto t0 = Clock::now();
  bool ok = true;
  std::ostringstream detail;
  for (const double d : {0.5, 1.0, 2.0}) {
    const KernelSpec kernel{KernelKind::Wendland, d};
    const double upper =
        lattice_density_probe(d, kernel, LatticeAlignment::ParticleCentered);
    const double lower =
        lattice_density_probe(d, kernel, LatticeAlignment::CentroidCentered);
    const double packing = 2.0 / (std::sqrt(3.0) * d * d);
    const bool upper_ok = std::abs(upper - 1.19 / (d * d)) <= 0.01 * 1.19 / (d * d);
    const bool lower_ok = std::abs(lower - 1.14 / (d * d)) <= 0.01 * 1.14 / (d * d);
    const bool brackets = lower <= packing && packing <= upper;
    CHECK(upper_ok);
    CHECK(lower_ok);
    CHECK(brackets);
    ok = ok && upper_ok && lower_ok && brackets;
  }
  const double elapsed = seconds_since(t0);
  CHECK(elapsed < 1.0);
  ok = ok && elapsed < 1.0;
  detail << "upper 1.19/d^2, lower 1.14/d^2 within 1%, bracketing 2/(sqrt(3) d^2), "
         << std::fixed << elapsed << " s";
  report(1, ok, detail.str());
}

TEST_CASE("criterion 2: maximum density relation") {
  const double base = max_density_from_min_distance(1.0, 0.0);
  const bool value_ok = std::abs(base - 1.1547) <= 1e-4;
  CHECK(value_ok);
  bool quadruple_ok = true;
  for (const double d : {1.0, 0.5, 0.3}) {
    const double full = max_density_from_min_distance(d, 0.0);
    const double half = max_density_from_min_distance(d / 2.0, 0.0);
    quadruple_ok = quadruple_ok && std::abs(half - 4.0 * full) <= 1e-12 * half;
  }
  CHECK(quadruple_ok);
  report(2, value_ok && quadruple_ok,
         "rho_max(1,0) = " + std::to_string(base) + ", halving spacing quadruples");
}

TEST_CASE("criterion 3: eikonal accuracy and scaling") {
  auto march_point_source = [](int n) {
    const Grid g{n, n, 1.0, 1.0};
    const CellMask mask(g);
    CellMask goal(g);
    goal.set(n / 2, n / 2, true);
    return fast_march(mask, goal, unit_cost_field(g, 1.0));
  };

  const Grid g100{100, 100, 1.0, 1.0};
  const auto t0 = Clock::now();
  const PotentialField pot = march_point_source(100);
  const double march_time = seconds_since(t0);

  const CellIndex goal{50, 50};
  const Vec2 centre = g100.cell_center(goal);
  double max_err = 0.0;
  for (int j = 1; j <= 100; ++j)
    for (int i = 1; i <= 100; ++i)
      max_err = std::max(max_err, std::abs(pot.phi.at(i, j) -
                                           (g100.cell_center(i, j) - centre).norm()));
  const bool accuracy_ok = max_err <= 2.0;
  CHECK(accuracy_ok);

  const bool hand_ok =
      std::abs(pot.phi.at(51, 50) - 1.0) <= 1e-9 &&
      std::abs(pot.phi.at(50, 49) - 1.0) <= 1e-9 &&
      std::abs(pot.phi.at(51, 51) - (1.0 + 1.0 / std::sqrt(2.0))) <= 1e-9;
  CHECK(hand_ok);
  const bool time_ok = march_time < 1.0;
  CHECK(time_ok);

  // n log n scaling: best-of-five timings to suppress scheduler noise
  auto best_time = [&](int n) {
    double best = kInfinity;
    for (int rep = 0; rep < 5; ++rep) {
      const auto t = Clock::now();
      march_point_source(n);
      best = std::min(best, seconds_since(t));
    }
    return best;
  };
  best_time(100);  // warm-up
  const double t100 = best_time(100);
  const double t200 = best_time(200);
  const double ratio = t200 / t100;
  const bool scaling_ok = ratio <= 4.6;
  CHECK(scaling_ok);

  std::ostringstream detail;
  detail << "max err " << max_err << " <= 2, neighbours 1 and 1+1/sqrt(2), "
         << march_time << " s, 200/100 time ratio " << ratio;
  report(3, accuracy_ok && hand_ok && time_ok && scaling_ok, detail.str());
}

TEST_CASE("criterion 4: intersection predicate vs sampling oracle") {
  Rng rng(4242);
  int mismatches = 0, checked = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const LineSeg s{{rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0)},
                    {rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0)}};
    const Vec2 a{rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0)};
    const Vec2 b{rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0)};
    const Rect m{{std::min(a.x, b.x), std::min(a.y, b.y)},
                 {std::max(a.x, b.x), std::max(a.y, b.y)}};
    if (s.p == s.q) continue;
    const LineCoeffs line = line_coefficients(s);
    bool tangent = false;
    for (const Vec2 c : {m.lo, Vec2{m.hi.x, m.lo.y}, m.hi, Vec2{m.lo.x, m.hi.y}})
      if (std::abs(line.a.dot(c) - line.b) / line.a.norm() < 1e-9) tangent = true;
    if (tangent) continue;
    ++checked;
    bool oracle = false;
    for (int k = 0; k <= 10000 && !oracle; ++k)
      oracle = m.contains(s.p + (s.q - s.p) * (k / 10000.0));
    if (segment_intersects_rect(s, m) != oracle) ++mismatches;
  }
  const bool ok = mismatches == 0 && checked > 9000;
  CHECK(mismatches == 0);
  CHECK(checked > 9000);
  report(4, ok,
         std::to_string(checked) + " non-tangent pairs, " + std::to_string(mismatches) +
             " mismatches");
}

TEST_CASE("criterion 5: LCP solver against the enumeration oracle") {
  const auto t0 = Clock::now();
  Rng rng(777);
  double max_dev = 0.0, max_fb = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform() * 10);
    LcpProblem prob{random_spd(n, rng), {}};
    prob.q.resize(n);
    for (double& v : prob.q) v = rng.uniform(-2.0, 2.0);
    const LcpSolution sol = pgs_solve(prob, {}, 1e-12, 100000);
    const auto reference = lcp_active_set_oracle(prob.M, prob.q);
    for (int i = 0; i < n; ++i)
      max_dev = std::max(max_dev, std::abs(sol.z[i] - reference[i]));
    max_fb = std::max(max_fb, sol.fb_residual);
  }
  const double batch_time = seconds_since(t0);
  const bool batch_ok = max_dev <= 1e-6 && max_fb <= 1e-8 && batch_time < 10.0;
  CHECK(max_dev <= 1e-6);
  CHECK(max_fb <= 1e-8);
  CHECK(batch_time < 10.0);

  // paper-scale analogue on a 48x48-cell crowded field
  const Grid g{48, 48, 1.0, 1.0};
  PressureParams params;
  params.rho_max = 1.0;
  Rng field_rng(99);

  auto [rho_low, v_low] = crowded_field(g, 0.384, params.rho_max, 260, field_rng);
  const LcpProblem low = build_lcp(rho_low, v_low, params, 0.05);
  const LcpSolution low_sol = pgs_solve(low, {}, 1e-10, 20000);
  const double low_asym = asymmetry_ratio(low.M);
  const bool low_ok = low_sol.fb_residual <= 1e-6;
  CHECK(low_ok);
  CHECK((low_asym > 0.05 && low_asym < 0.15));  // paper reports 0.0791

  auto [rho_high, v_high] = crowded_field(g, 1.411, params.rho_max, 900, field_rng);
  const LcpProblem high = build_lcp(rho_high, v_high, params, 0.05);
  const LcpSolution high_sol = pgs_solve(high, {}, 1e-10, 20000);
  const double high_asym = asymmetry_ratio(high.M);
  // over the density cap the solver must terminate and report; it is
  // not required to satisfy complementarity (paper residual 1.338)
  const bool high_ok = std::isfinite(high_sol.fb_residual) &&
                       static_cast<int>(high_sol.z.size()) == g.cell_count();
  CHECK(high_ok);
  CHECK((high_asym > 0.05 && high_asym < 0.15));  // paper reports 0.096

  std::ostringstream detail;
  detail << "1000 systems: max |z-z*| " << max_dev << ", max FB " << max_fb << ", "
         << batch_time << " s; 48x48 low-density FB " << low_sol.fb_residual
         << " (asym " << low_asym << "), 1.4x-cap solve converged="
         << high_sol.converged << " FB " << high_sol.fb_residual << " (asym "
         << high_asym << ")";
  report(5, batch_ok && low_ok && high_ok, detail.str());
}

TEST_CASE("criterion 6: scheme sanity") {
  const Grid g{4, 4, 0.8, 1.2};
  Rng rng(606);

  // stationarity: v = 0 and z = 0 leave the density bit-exactly unchanged
  ScalarField rho(g);
  for (int k = 0; k < g.cell_count(); ++k) rho[k] = rng.uniform(0.1, 1.5);
  const CsrMatrix c_matrix = assemble_C(rho, g);
  const std::vector<double> cz = c_matrix.multiply(std::vector<double>(16, 0.0));
  const std::vector<double> b = assemble_b(rho, VectorField(g), g);
  bool stationary = true;
  for (int k = 0; k < g.cell_count(); ++k) {
    const double next = rho[k] + (cz[k] + b[k]) * 0.05;
    stationary = stationary && next == rho[k];
  }
  CHECK(stationary);

  // uniform density below the cap with v = 0 solves with zero pressure
  PressureParams params;
  params.rho_max = 1.0;
  ScalarField uniform(g);
  uniform.fill(0.6);
  const LcpProblem prob = build_lcp(uniform, VectorField(g), params, 0.05);
  const LcpSolution sol = pgs_solve(prob, {}, 1e-10, 1000);
  bool zero_pressure = sol.converged;
  for (double z : sol.z) zero_pressure = zero_pressure && z == 0.0;
  CHECK(zero_pressure);

  // stencil equivalence on random 4x4 fields to 1e-12
  bool stencil_ok = true;
  for (int rep = 0; rep < 10; ++rep) {
    ScalarField r(g), p(g);
    for (int k = 0; k < g.cell_count(); ++k) {
      r[k] = rng.uniform(0.0, 2.0);
      p[k] = rng.uniform(-1.0, 1.0);
    }
    const std::vector<double> cp = assemble_C(r, g).multiply(p.values());
    const VectorField grad_r = gradient_central(r);
    const VectorField grad_p = gradient_central(p);
    const ScalarField lap_p = laplacian_compact(p);
    for (int k = 0; k < g.cell_count(); ++k) {
      const double expected = grad_r.x[k] * grad_p.x[k] + grad_r.y[k] * grad_p.y[k] +
                              r[k] * lap_p[k];
      stencil_ok = stencil_ok && std::abs(cp[k] - expected) <= 1e-12;
    }
  }
  CHECK(stencil_ok);

  report(6, stationary && zero_pressure && stencil_ok,
         "stationary density bit-exact, uniform subcritical density gives z = 0, "
         "matrix action matches the stencil to 1e-12");
}

TEST_CASE("criterion 7: interaction potential cuts min-distance violations") {
  const auto t0 = Clock::now();
  const SceneSpec scene = load_scenario(std::string(SCENES_DIR) + "/traffic_gate.json");

  SimConfig cfg = traffic_config();
  Simulation with_uic(cfg, scene);
  const RunResult on = with_uic.run();

  cfg.uic_enabled = false;
  Simulation without_uic(cfg, scene);
  const RunResult off = without_uic.run();

  const double elapsed = seconds_since(t0);
  const double ratio = off.metrics.violation_fraction_mean > 0.0
                           ? on.metrics.violation_fraction_mean /
                                 off.metrics.violation_fraction_mean
                           : kInfinity;
  const bool spawned_ok = on.particles.size() >= 250 && on.particles.size() <= 400;
  const bool ratio_ok = ratio <= 0.1;
  const bool time_ok = elapsed < 120.0;
  CHECK(spawned_ok);
  CHECK(ratio_ok);
  CHECK(time_ok);

  std::ostringstream detail;
  detail << on.particles.size() << " walkers, violation fraction "
         << on.metrics.violation_fraction_mean << " with interaction vs "
         << off.metrics.violation_fraction_mean << " control (ratio " << ratio
         << "), " << elapsed << " s";
  report(7, spawned_ok && ratio_ok && time_ok, detail.str());
}

TEST_CASE("criterion 8: crowd physics properties") {
  // (a) mean realized speed non-increasing over four initial densities
  std::vector<double> speeds;
  double clear_ratio = 0.0;
  bool cleared = false;
  for (const int n : {50, 150, 300, 500}) {
    Simulation sim(funnel_config(n), funnel_scene());
    const RunResult r = sim.run();
    speeds.push_back(r.metrics.mean_realized_speed(r.particles.max_speeds));
    if (n == 300) {
      cleared = r.particles.active_count() == 0;
      clear_ratio = r.metrics.clear_time / r.metrics.first_exit_time;
    }
  }
  bool monotone = true;
  for (std::size_t k = 1; k < speeds.size(); ++k)
    monotone = monotone && speeds[k] <= speeds[k - 1] + 1e-9;
  CHECK(monotone);

  // (b) funnel clear time at least 1.5x the first exit time
  const bool funnel_ok = cleared && clear_ratio >= 1.5;
  CHECK(funnel_ok);

  // (c) dense-disc spawn reproduces the published mean initial density
  SimConfig disc = funnel_config(800);
  disc.spawn = SpawnKind::Disc;
  disc.spawn_disc_center = {20.0, 25.0};
  disc.spawn_disc_radius = 7.0;
  disc.t_max = 0.0;
  Simulation sim(disc, funnel_scene());
  const auto& p = sim.particles();
  std::size_t inside = 0;
  for (std::size_t a = 0; a < p.size(); ++a)
    if ((p.positions[a] - Vec2{20.0, 25.0}).norm() <= 7.0) ++inside;
  const double density = static_cast<double>(inside) / (M_PI * 49.0);
  const bool density_ok = std::abs(density - 5.2) <= 0.02 * 5.2;
  CHECK(density_ok);

  std::ostringstream detail;
  detail << "speeds";
  for (double s : speeds) detail << " " << s;
  detail << " (non-increasing), clear/first-exit " << clear_ratio
         << " >= 1.5, disc density " << density << " /m^2";
  report(8, monotone && funnel_ok && density_ok, detail.str());
}

TEST_CASE("criterion 9: lyapunov decay of the closed porous-medium run") {
  const Grid g{40, 40, 1.0, 1.0};
  ScalarField rho(g);
  for (int j = 1; j <= 40; ++j)
    for (int i = 1; i <= 40; ++i) {
      const double r2 = (g.cell_center(i, j) - Vec2{20.0, 20.0}).norm_sq();
      rho.at(i, j) = 2.0 * std::exp(-r2 / 30.0);
    }
  const double dt = 0.02;
  double f_prev = lyapunov_value(rho, rho);
  const double f0 = f_prev;
  int increases = 0;
  for (int step = 0; step < 1000; ++step) {
    const VectorField grad = gradient_central(rho);
    VectorField v(g);
    for (int k = 0; k < g.cell_count(); ++k) {
      v.x[k] = -grad.x[k];
      v.y[k] = -grad.y[k];
    }
    const std::vector<double> b = assemble_b(rho, v, g);
    for (int k = 0; k < g.cell_count(); ++k) rho[k] += b[k] * dt;
    const double f = lyapunov_value(rho, rho);
    if (f > f_prev + 1e-9) ++increases;
    f_prev = f;
  }
  const bool ok = increases == 0 && f_prev < f0;
  CHECK(increases == 0);
  CHECK(f_prev < f0);
  std::ostringstream detail;
  detail << "F " << f0 << " -> " << f_prev << " over 1000 steps, " << increases
         << " increases beyond 1e-9";
  report(9, ok, detail.str());
}

TEST_CASE("criterion 10: byte-identical deterministic replay") {
  namespace fs = std::filesystem;
  const SceneSpec scene = load_scenario(std::string(SCENES_DIR) + "/traffic_gate.json");
  SimConfig cfg = traffic_config();
  cfg.t_max = 10.0;
  cfg.noise_sigma = 0.05;

  const fs::path dirs[2] = {fs::temp_directory_path() / "crowdflow_acc_run_a",
                            fs::temp_directory_path() / "crowdflow_acc_run_b"};
  for (const auto& dir : dirs) {
    Simulation sim(cfg, scene);
    const RunResult result = sim.run();
    nlohmann::json manifest;
    manifest["config"] = config_to_json(cfg);
    manifest["seed"] = cfg.seed;
    export_metrics(result.metrics, dir, manifest);
  }
  bool identical = true;
  bool nonempty = true;
  for (const char* name :
       {"particles.csv", "heatmap.csv", "series.csv", "mde.csv", "manifest.json"}) {
    const std::string a = slurp(dirs[0] / name);
    identical = identical && a == slurp(dirs[1] / name);
    nonempty = nonempty && !a.empty();
  }
  CHECK(identical);
  CHECK(nonempty);
  for (const auto& dir : dirs) fs::remove_all(dir);
  report(10, identical && nonempty,
         "two seeded runs produced byte-identical metric files");
}
