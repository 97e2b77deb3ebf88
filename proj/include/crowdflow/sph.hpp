#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "crowdflow/core.hpp"
#include "crowdflow/fields.hpp"
#include "crowdflow/particles.hpp"

namespace crowdflow {

enum class KernelKind { Wendland, Gaussian, Bspline4 };

inline KernelKind kernel_kind_from_string(const std::string& s) {
  if (s == "wendland") return KernelKind::Wendland;
  if (s == "gaussian") return KernelKind::Gaussian;
  if (s == "bspline4") return KernelKind::Bspline4;
  throw ValidationError("unknown kernel kind: " + s);
}

/// Radially symmetric interpolation kernel with smoothing length h.
///
/// The Gaussian is truncated at 3h and renormalized so that finite
/// support (and thus cell binning) stays valid. The quartic B-spline
/// normalization constant is 96/(1199 pi h^2); it was obtained from the
/// unit-integral requirement 2 pi Int f(q) q dq = 1 with
/// Int = 1199/192, and the normalization test pins it numerically.
struct KernelSpec {
  KernelKind kind = KernelKind::Wendland;
  double h = 1.0;

  /// Radius beyond which the kernel is exactly zero.
  double support() const {
    switch (kind) {
      case KernelKind::Wendland: return 2.0 * h;
      case KernelKind::Gaussian: return 3.0 * h;
      default: return 2.5 * h;
    }
  }
};

/// Kernel value at radius r >= 0, in units of 1/m^2.
inline double kernel_eval(const KernelSpec& k, double r) {
  const double h = k.h;
  switch (k.kind) {
    case KernelKind::Wendland: {
      const double t = std::max(1.0 - r / (2.0 * h), 0.0);
      const double t2 = t * t;
      return 7.0 / (4.0 * M_PI * h * h) * t2 * t2 * (1.0 + 2.0 * r / h);
    }
    case KernelKind::Gaussian: {
      if (r > 3.0 * h) return 0.0;
      const double mass_within_3h = 1.0 - std::exp(-4.5);
      return std::exp(-r * r / (2.0 * h * h)) / (2.0 * M_PI * h * h * mass_within_3h);
    }
    default: {
      const double q = r / h;
      if (q >= 2.5) return 0.0;
      auto quart = [](double t) { return t * t * t * t; };
      double v = quart(2.5 - q);
      if (q < 1.5) v -= 5.0 * quart(1.5 - q);
      if (q < 0.5) v += 10.0 * quart(0.5 - q);
      return 96.0 / (1199.0 * M_PI * h * h) * v;
    }
  }
}

/// Square bins of side (4/3)h used to localize kernel sums. The side is
/// coupled to the smoothing length so that for the Wendland kernel all
/// support neighbours of a bin centre lie in the 8-neighbourhood;
/// interpolation gathers ceil(support/side) rings so the binned sum
/// stays exact for arbitrary evaluation points and kernels.
class CellBins {
 public:
  CellBins(const std::vector<Vec2>& positions, const std::vector<std::uint8_t>& active,
           const KernelSpec& kernel, Rect bounds)
      : side_(4.0 / 3.0 * kernel.h), origin_(bounds.lo) {
    nbx_ = std::max(1, static_cast<int>(std::ceil(bounds.width() / side_)));
    nby_ = std::max(1, static_cast<int>(std::ceil(bounds.height() / side_)));
    bins_.assign(static_cast<std::size_t>(nbx_) * nby_, {});
    for (std::size_t a = 0; a < positions.size(); ++a) {
      if (!active.empty() && !active[a]) continue;
      bins_[bin_offset(positions[a])].push_back(static_cast<int>(a));
    }
  }

  double side() const { return side_; }
  int nbx() const { return nbx_; }
  int nby() const { return nby_; }

  /// Visit particle indices in all bins within `rings` of the bin
  /// containing p, in ascending bin offset then insertion order.
  template <typename Fn>
  void for_neighbourhood(Vec2 p, int rings, Fn&& fn) const {
    const auto [bi, bj] = bin_coords(p);
    for (int j = std::max(0, bj - rings); j <= std::min(nby_ - 1, bj + rings); ++j)
      for (int i = std::max(0, bi - rings); i <= std::min(nbx_ - 1, bi + rings); ++i)
        for (int a : bins_[i + static_cast<std::size_t>(j) * nbx_]) fn(a);
  }

  const std::vector<int>& bin_of(Vec2 p) const { return bins_[bin_offset(p)]; }

 private:
  std::pair<int, int> bin_coords(Vec2 p) const {
    int i = static_cast<int>((p.x - origin_.x) / side_);
    int j = static_cast<int>((p.y - origin_.y) / side_);
    return {std::clamp(i, 0, nbx_ - 1), std::clamp(j, 0, nby_ - 1)};
  }
  std::size_t bin_offset(Vec2 p) const {
    const auto [i, j] = bin_coords(p);
    return i + static_cast<std::size_t>(j) * nbx_;
  }

  double side_;
  Vec2 origin_;
  int nbx_ = 1, nby_ = 1;
  std::vector<std::vector<int>> bins_;
};

/// Micro-to-macro conversion: density rho(c) = sum_i m_i psi(|x_i - c|)
/// over cell centres, and the mass-weighted velocity
/// v(c) = sum_i m_i v_i psi / rho(c), zero where rho vanishes.
inline std::pair<ScalarField, VectorField> interpolate_fields(const ParticleSet& p,
                                                              const KernelSpec& kernel,
                                                              const Grid& g) {
  ScalarField rho(g);
  VectorField vel(g);
  const Rect bounds{{0.0, 0.0}, {g.width(), g.height()}};
  const CellBins bins(p.positions, p.active, kernel, bounds);
  const int rings =
      static_cast<int>(std::ceil(kernel.support() / bins.side() - 1e-12));
  const double support_sq = kernel.support() * kernel.support();
  for (int j = 1; j <= g.ny; ++j)
    for (int i = 1; i <= g.nx; ++i) {
      const Vec2 c = g.cell_center(i, j);
      double mass_sum = 0.0;
      Vec2 momentum{};
      bins.for_neighbourhood(c, rings, [&](int a) {
        const Vec2 d = p.positions[a] - c;
        if (d.norm_sq() > support_sq) return;
        const double w = p.masses[a] * kernel_eval(kernel, d.norm());
        mass_sum += w;
        momentum += w * p.velocities[a];
      });
      rho.at(i, j) = mass_sum;
      vel.set(i, j, mass_sum > 0.0 ? momentum / mass_sum : Vec2{});
    }
  return {std::move(rho), std::move(vel)};
}

enum class LatticeAlignment { ParticleCentered, CentroidCentered };

/// Interpolated density at a probe point over an infinite triangular
/// lattice of unit-mass particles with spacing d and h = d. Used to
/// verify the density conversion against the closest-packing value
/// 2/(sqrt(3) d^2).
inline double lattice_density_probe(double d, const KernelSpec& kernel,
                                    LatticeAlignment alignment) {
  const Vec2 probe = alignment == LatticeAlignment::ParticleCentered
                         ? Vec2{0.0, 0.0}
                         : Vec2{d / 2.0, d / (2.0 * std::sqrt(3.0))};
  const double reach = kernel.support() + d;
  const double row_height = std::sqrt(3.0) / 2.0 * d;
  const int kmax = static_cast<int>(std::ceil(reach / row_height)) + 1;
  const int nmax = static_cast<int>(std::ceil(reach / d)) + 1;
  double total = 0.0;
  for (int k = -kmax; k <= kmax; ++k) {
    const double y = k * row_height;
    const double shift = (k % 2 != 0) ? d / 2.0 : 0.0;
    for (int n = -nmax; n <= nmax; ++n) {
      const Vec2 site{n * d + shift, y};
      const double r = (site - probe).norm();
      if (r <= kernel.support()) total += kernel_eval(kernel, r);
    }
  }
  return total;
}

/// Smallest smoothing length whose kernel contribution at the
/// half-diagonal r0 = sqrt(2) dx / 2 stays below rho_min for this and
/// every larger h. Found by bisecting the decaying branch of
/// h -> psi(r0; h) between its peak and the h solving psi(0; h) = rho_min.
inline double planner_smoothing_length(double dx, double rho_min,
                                       KernelKind kind = KernelKind::Wendland) {
  if (dx <= 0.0 || rho_min <= 0.0)
    throw ValidationError("planner_smoothing_length: dx and rho_min must be positive");
  const double r0 = std::sqrt(2.0) * dx / 2.0;
  auto value_at = [&](double h) { return kernel_eval({kind, h}, r0); };
  const double peak_coeff = kernel_eval({kind, 1.0}, 0.0);  // psi(0;h) = coeff / h^2
  const double h_upper = std::sqrt(peak_coeff / rho_min);

  // Locate the peak of h -> psi(r0; h) by golden-section search.
  double lo = r0 / 4.0, hi = std::max(h_upper, r0);
  for (int iter = 0; iter < 200; ++iter) {
    const double m1 = lo + (hi - lo) * 0.382;
    const double m2 = lo + (hi - lo) * 0.618;
    if (value_at(m1) < value_at(m2))
      lo = m1;
    else
      hi = m2;
  }
  const double h_peak = (lo + hi) / 2.0;
  if (value_at(h_peak) <= rho_min)
    throw ValidationError("planner_smoothing_length: no root in bracket");

  double a = h_peak, b = h_upper;
  while (b - a > 1e-6) {
    const double mid = (a + b) / 2.0;
    if (value_at(mid) > rho_min)
      a = mid;
    else
      b = mid;
  }
  return b;
}

}  // namespace crowdflow
