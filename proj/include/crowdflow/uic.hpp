#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "crowdflow/core.hpp"
#include "crowdflow/fields.hpp"
#include "crowdflow/scene.hpp"
#include "crowdflow/sparse.hpp"

namespace crowdflow {

enum class TridiagonalKind { P, Q };

/// The two tridiagonal building blocks of the difference operator:
/// P has +1 above and -1 below the zero diagonal (central difference),
/// Q has -2 on the diagonal and +1 off it (second difference). Both
/// implicitly encode the zero-extended virtual boundary layer.
inline CsrMatrix assemble_tridiagonal(TridiagonalKind kind, int m) {
  if (m < 1) throw ValidationError("tridiagonal size must be >= 1");
  std::vector<CsrMatrix::Triplet> t;
  t.reserve(3 * m);
  for (int i = 0; i < m; ++i) {
    if (kind == TridiagonalKind::Q) t.push_back({i, i, -2.0});
    if (i + 1 < m) {
      t.push_back({i, i + 1, 1.0});
      t.push_back({i + 1, i, kind == TridiagonalKind::P ? -1.0 : 1.0});
    }
  }
  return CsrMatrix::from_triplets(m, m, std::move(t));
}

namespace detail {

/// D_x u and D_y u as plain vectors in flat order (zero-extended).
inline std::vector<double> dx_vector(const ScalarField& u) {
  const Grid& g = u.grid();
  std::vector<double> out(g.cell_count());
  for (int j = 1; j <= g.ny; ++j)
    for (int i = 1; i <= g.nx; ++i)
      out[g.offset(i, j)] = u.extended(i + 1, j) - u.extended(i - 1, j);
  return out;
}

inline std::vector<double> dy_vector(const ScalarField& u) {
  const Grid& g = u.grid();
  std::vector<double> out(g.cell_count());
  for (int j = 1; j <= g.ny; ++j)
    for (int i = 1; i <= g.nx; ++i)
      out[g.offset(i, j)] = u.extended(i, j + 1) - u.extended(i, j - 1);
  return out;
}

}  // namespace detail

/// Finite-difference operator C of the pressure terms, assembled from
/// Kronecker products so that C p equals the discretised
/// grad(rho) . grad(p) + rho lap(p) under the flat index i + (j-1)Nx.
/// With that flattening, operators acting along x are I_Ny (x) T_Nx
/// and along y are T_Ny (x) I_Nx; the stencil-equivalence unit test
/// pins the orientation.
inline CsrMatrix assemble_C(const ScalarField& rho, const Grid& g) {
  const CsrMatrix p_x = assemble_tridiagonal(TridiagonalKind::P, g.nx);
  const CsrMatrix p_y = assemble_tridiagonal(TridiagonalKind::P, g.ny);
  const CsrMatrix q_x = assemble_tridiagonal(TridiagonalKind::Q, g.nx);
  const CsrMatrix q_y = assemble_tridiagonal(TridiagonalKind::Q, g.ny);
  const CsrMatrix i_x = CsrMatrix::identity(g.nx);
  const CsrMatrix i_y = CsrMatrix::identity(g.ny);

  const CsrMatrix a_x =
      kronecker(i_y, p_x).scaled_rows(detail::dx_vector(rho)).scaled(1.0 / (4.0 * g.dx * g.dx));
  const CsrMatrix a_y =
      kronecker(p_y, i_x).scaled_rows(detail::dy_vector(rho)).scaled(1.0 / (4.0 * g.dy * g.dy));
  const CsrMatrix b_x =
      kronecker(i_y, q_x).scaled_rows(rho.values()).scaled(1.0 / (g.dx * g.dx));
  const CsrMatrix b_y =
      kronecker(q_y, i_x).scaled_rows(rho.values()).scaled(1.0 / (g.dy * g.dy));
  return a_x.plus(a_y).plus(b_x).plus(b_y);
}

/// Flux vector b = -(D_x(v_x rho)/2dx + D_y(v_y rho)/2dy), the
/// negated central divergence of the momentum field.
inline std::vector<double> assemble_b(const ScalarField& rho, const VectorField& v,
                                      const Grid& g) {
  ScalarField mx(g), my(g);
  for (int j = 1; j <= g.ny; ++j)
    for (int i = 1; i <= g.nx; ++i) {
      mx.at(i, j) = rho.at(i, j) * v.x.at(i, j);
      my.at(i, j) = rho.at(i, j) * v.y.at(i, j);
    }
  const std::vector<double> dx = detail::dx_vector(mx);
  const std::vector<double> dy = detail::dy_vector(my);
  std::vector<double> b(g.cell_count());
  for (int k = 0; k < g.cell_count(); ++k)
    b[k] = -(dx[k] / (2.0 * g.dx) + dy[k] / (2.0 * g.dy));
  return b;
}

struct PressureParams {
  double rho_max = 1.0;     // maximum allowed density (1/m^2)
  double p0 = 1.0;          // Dirichlet pressure on obstacle boundaries
  double eps_rho = 0.01;    // density shift keeping the diagonal nonzero
  double pgs_eps = 1e-6;    // PGS stopping tolerance
  int pgs_max_iter = 0;     // 0 means 10 * cell count
  double v_max = 1.0;       // crowd speed used to renormalize velocities
};

/// Linear complementarity problem of one pressure step:
/// z is the pressure, w = Mz + q = rho_max - rho^{n+1} the density gap.
struct LcpProblem {
  CsrMatrix M;
  std::vector<double> q;
};

struct LcpSolution {
  std::vector<double> z;
  std::vector<double> w;
  double fb_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Componentwise Fischer-Burmeister residual norm
/// || x + y - sqrt(x^2 + y^2) ||_2, zero exactly at complementary pairs.
inline double fb_residual(const std::vector<double>& w, const std::vector<double>& z) {
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double f = w[i] + z[i] - std::hypot(w[i], z[i]);
    acc += f * f;
  }
  return std::sqrt(acc);
}

/// QP certificate f(z) = z^T (Mz + q); a feasible z solves the LCP
/// iff this vanishes.
inline double qp_objective(const CsrMatrix& m, const std::vector<double>& q,
                           const std::vector<double>& z) {
  const std::vector<double> mz = m.multiply(z);
  double acc = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) acc += z[i] * (mz[i] + q[i]);
  return acc;
}

/// Per-step LCP: M = -C(rho + eps) dt and q = rho_max - rho~ - b dt.
/// Rows of obstacle cells are replaced by the Dirichlet identity row;
/// boundary obstacle cells are pinned at z = p0, interior ones at 0.
inline LcpProblem build_lcp(const ScalarField& rho, const VectorField& v,
                            const PressureParams& params, double dt,
                            const CellMask* mask = nullptr) {
  if (dt <= 0.0) throw ValidationError("build_lcp requires dt > 0");
  const Grid& g = rho.grid();
  ScalarField shifted = rho;
  for (double& r : shifted.values()) r += params.eps_rho;

  LcpProblem prob;
  prob.M = assemble_C(shifted, g).scaled(-dt);
  const std::vector<double> b = assemble_b(shifted, v, g);
  prob.q.resize(g.cell_count());
  for (int k = 0; k < g.cell_count(); ++k)
    prob.q[k] = params.rho_max - shifted[k] - b[k] * dt;

  if (mask) {
    auto is_free = [&](int i, int j) {
      return i >= 1 && i <= g.nx && j >= 1 && j <= g.ny && !mask->at(i, j);
    };
    for (int j = 1; j <= g.ny; ++j)
      for (int i = 1; i <= g.nx; ++i) {
        if (!mask->at(i, j)) continue;
        const int k = g.offset(i, j);
        prob.M.make_identity_row(k);
        const bool boundary = is_free(i - 1, j) || is_free(i + 1, j) ||
                              is_free(i, j - 1) || is_free(i, j + 1);
        prob.q[k] = boundary ? -params.p0 : 0.0;
      }
    prob.M.finalize_row_replacements();
  }
  return prob;
}

/// Projected Gauss-Seidel sweeps in ascending index order:
/// z_i <- max(0, (-q_i - <M_i, z> + M_ii z_i) / M_ii)
/// until w >= -eps and |<w, z>| <= eps, or the iteration cap.
inline LcpSolution pgs_solve(const LcpProblem& prob, std::vector<double> z0,
                             double eps, int max_iterations) {
  const int n = prob.M.rows();
  if (static_cast<int>(z0.size()) != n) z0.assign(n, 0.0);
  for (double& v : z0) v = std::max(v, 0.0);

  std::vector<double> diag(n);
  for (int i = 0; i < n; ++i) diag[i] = prob.M.diagonal(i);

  LcpSolution sol;
  sol.z = std::move(z0);
  auto compute_w = [&] {
    sol.w = prob.M.multiply(sol.z);
    for (int i = 0; i < n; ++i) sol.w[i] += prob.q[i];
  };
  auto satisfied = [&] {
    double dot = 0.0;
    for (int i = 0; i < n; ++i) {
      if (sol.w[i] < -eps) return false;
      dot += sol.w[i] * sol.z[i];
    }
    return std::abs(dot) <= eps;
  };

  compute_w();
  while (!(sol.converged = satisfied()) && sol.iterations < max_iterations) {
    ++sol.iterations;
    for (int i = 0; i < n; ++i) {
      if (diag[i] == 0.0)
        throw ValidationError("pgs_solve: zero diagonal entry on an active row");
      const double r = -prob.q[i] - prob.M.row_dot(i, sol.z) + diag[i] * sol.z[i];
      sol.z[i] = std::max(0.0, r / diag[i]);
    }
    compute_w();
  }
  sol.fb_residual = fb_residual(sol.w, sol.z);
  return sol;
}

/// Exhaustive active-set reference solver for n <= 12: every subset A
/// is tried with M_AA z_A = -q_A, accepting the first z >= 0 with
/// w = Mz + q >= 0 (unique for positive definite M).
inline std::vector<double> lcp_active_set_oracle(const CsrMatrix& m,
                                                 const std::vector<double>& q) {
  const int n = m.rows();
  if (n > 12) throw ValidationError("active-set oracle is limited to n <= 12");
  const double tol = 1e-9;
  for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
    std::vector<int> act;
    for (int i = 0; i < n; ++i)
      if (bits & (1u << i)) act.push_back(i);
    const int k = static_cast<int>(act.size());
    // dense Gaussian elimination on the principal submatrix
    std::vector<double> a(k * k), rhs(k);
    for (int r = 0; r < k; ++r) {
      rhs[r] = -q[act[r]];
      for (int c = 0; c < k; ++c) a[r * k + c] = m.at(act[r], act[c]);
    }
    bool singular = false;
    for (int col = 0; col < k && !singular; ++col) {
      int pivot = col;
      for (int r = col + 1; r < k; ++r)
        if (std::abs(a[r * k + col]) > std::abs(a[pivot * k + col])) pivot = r;
      if (std::abs(a[pivot * k + col]) < 1e-14) {
        singular = true;
        break;
      }
      if (pivot != col) {
        for (int c = 0; c < k; ++c) std::swap(a[col * k + c], a[pivot * k + c]);
        std::swap(rhs[col], rhs[pivot]);
      }
      for (int r = col + 1; r < k; ++r) {
        const double f = a[r * k + col] / a[col * k + col];
        for (int c = col; c < k; ++c) a[r * k + c] -= f * a[col * k + c];
        rhs[r] -= f * rhs[col];
      }
    }
    if (singular) continue;
    std::vector<double> za(k);
    for (int r = k - 1; r >= 0; --r) {
      double acc = rhs[r];
      for (int c = r + 1; c < k; ++c) acc -= a[r * k + c] * za[c];
      za[r] = acc / a[r * k + r];
    }
    bool feasible = true;
    for (double v : za)
      if (v < -tol) {
        feasible = false;
        break;
      }
    if (!feasible) continue;
    std::vector<double> z(n, 0.0);
    for (int r = 0; r < k; ++r) z[act[r]] = std::max(za[r], 0.0);
    const std::vector<double> mz = m.multiply(z);
    for (int i = 0; i < n && feasible; ++i)
      if (mz[i] + q[i] < -tol) feasible = false;
    if (feasible) return z;
  }
  throw ValidationError("active-set oracle: no feasible active set");
}

/// Relative asymmetry ||(M - M^T)/2||_2 / ||M||_2 of the LCP matrix.
inline double asymmetry_ratio(const CsrMatrix& m) {
  const CsrMatrix skew = m.plus(m.transposed().scaled(-1.0)).scaled(0.5);
  const double denom = two_norm_estimate(m);
  return denom == 0.0 ? 0.0 : two_norm_estimate(skew) / denom;
}

/// Darcy correction: subtract the pressure gradient and renormalize to
/// the crowd speed, v~ = v_max (v - grad p)/||v - grad p|| per cell;
/// degenerate cells get zero velocity.
inline VectorField apply_pressure(const VectorField& v, const std::vector<double>& z,
                                  double v_max) {
  const Grid& g = v.grid();
  ScalarField pressure(g);
  pressure.values() = z;
  const VectorField grad = gradient_central(pressure);
  VectorField out(g);
  for (int j = 1; j <= g.ny; ++j)
    for (int i = 1; i <= g.nx; ++i) {
      const Vec2 w = v.at(i, j) - grad.at(i, j);
      const double n = w.norm();
      out.set(i, j, n < 1e-12 ? Vec2{} : w * (v_max / n));
    }
  return out;
}

/// Blend between a walker's desired velocity and the crowd velocity,
/// weighted by local density: the desired velocity wins in empty space
/// and the crowd velocity at the density cap.
inline Vec2 swarm_blend(Vec2 desired, Vec2 crowd, double rho_at, double rho_max) {
  const double w = cutoff_L(0.0, rho_max, rho_at);
  return desired + w * (crowd - desired);
}

}  // namespace crowdflow
