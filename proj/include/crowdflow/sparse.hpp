#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "crowdflow/core.hpp"

namespace crowdflow {

/// Square/rectangular sparse matrix in Compressed Sparse Row format.
/// Column indices are sorted within each row and explicit zeros are
/// dropped on construction; PGS extracts rows for dot products, which
/// this layout serves directly.
class CsrMatrix {
 public:
  CsrMatrix() : rows_(0), cols_(0), row_offsets_{0} {}
  CsrMatrix(int rows, int cols) : rows_(rows), cols_(cols), row_offsets_(rows + 1, 0) {}

  struct Triplet {
    int row;
    int col;
    double value;
  };

  static CsrMatrix from_triplets(int rows, int cols, std::vector<Triplet> triplets) {
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    CsrMatrix m(rows, cols);
    m.col_indices_.reserve(triplets.size());
    m.values_.reserve(triplets.size());
    std::size_t k = 0;
    for (int r = 0; r < rows; ++r) {
      while (k < triplets.size() && triplets[k].row == r) {
        double v = triplets[k].value;
        const int c = triplets[k].col;
        ++k;
        while (k < triplets.size() && triplets[k].row == r && triplets[k].col == c) {
          v += triplets[k].value;  // duplicate entries accumulate
          ++k;
        }
        if (v != 0.0) {
          m.col_indices_.push_back(c);
          m.values_.push_back(v);
        }
      }
      m.row_offsets_[r + 1] = static_cast<int>(m.col_indices_.size());
    }
    return m;
  }

  static CsrMatrix identity(int n) {
    std::vector<Triplet> t;
    t.reserve(n);
    for (int i = 0; i < n; ++i) t.push_back({i, i, 1.0});
    return from_triplets(n, n, std::move(t));
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  int row_begin(int r) const { return row_offsets_[r]; }
  int row_end(int r) const { return row_offsets_[r + 1]; }
  int col_index(int k) const { return col_indices_[k]; }
  double value(int k) const { return values_[k]; }

  double at(int r, int c) const {
    for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k)
      if (col_indices_[k] == c) return values_[k];
    return 0.0;
  }

  double diagonal(int r) const { return at(r, r); }

  std::vector<double> multiply(const std::vector<double>& x) const {
    std::vector<double> y(rows_, 0.0);
    for (int r = 0; r < rows_; ++r) {
      double acc = 0.0;
      for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k)
        acc += values_[k] * x[col_indices_[k]];
      y[r] = acc;
    }
    return y;
  }

  double row_dot(int r, const std::vector<double>& x) const {
    double acc = 0.0;
    for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k)
      acc += values_[k] * x[col_indices_[k]];
    return acc;
  }

  /// Entrywise sum of two matrices of identical shape.
  CsrMatrix plus(const CsrMatrix& other) const {
    std::vector<Triplet> t;
    t.reserve(nnz() + other.nnz());
    append_triplets(t);
    other.append_triplets(t);
    return from_triplets(rows_, cols_, std::move(t));
  }

  /// Left-multiplication by diag(d): scales row r by d[r].
  CsrMatrix scaled_rows(const std::vector<double>& d) const {
    CsrMatrix m = *this;
    for (int r = 0; r < rows_; ++r)
      for (int k = m.row_offsets_[r]; k < m.row_offsets_[r + 1]; ++k)
        m.values_[k] *= d[r];
    return m;
  }

  CsrMatrix scaled(double s) const {
    CsrMatrix m = *this;
    for (double& v : m.values_) v *= s;
    return m;
  }

  CsrMatrix transposed() const {
    std::vector<Triplet> t;
    t.reserve(nnz());
    for (int r = 0; r < rows_; ++r)
      for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k)
        t.push_back({col_indices_[k], r, values_[k]});
    return from_triplets(cols_, rows_, std::move(t));
  }

  /// Replace row r by the identity row e_r (used for Dirichlet rows).
  void make_identity_row(int r) {
    replacement_pending_ = true;
    pending_rows_.push_back(r);
  }

  /// Apply accumulated identity-row replacements.
  void finalize_row_replacements() {
    if (!replacement_pending_) return;
    std::vector<bool> replace(rows_, false);
    for (int r : pending_rows_) replace[r] = true;
    std::vector<Triplet> t;
    t.reserve(nnz());
    for (int r = 0; r < rows_; ++r) {
      if (replace[r]) {
        t.push_back({r, r, 1.0});
        continue;
      }
      for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k)
        t.push_back({r, col_indices_[k], values_[k]});
    }
    *this = from_triplets(rows_, cols_, std::move(t));
  }

  void append_triplets(std::vector<Triplet>& out) const {
    for (int r = 0; r < rows_; ++r)
      for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k)
        out.push_back({r, col_indices_[k], values_[k]});
  }

 private:
  int rows_;
  int cols_;
  std::vector<int> row_offsets_;
  std::vector<int> col_indices_;
  std::vector<double> values_;
  bool replacement_pending_ = false;
  std::vector<int> pending_rows_;
};

/// Kronecker product: entry a_ij b_kl lands at (i*p + k, j*q + l) for B
/// of shape p x q.
inline CsrMatrix kronecker(const CsrMatrix& a, const CsrMatrix& b) {
  std::vector<CsrMatrix::Triplet> t;
  t.reserve(a.nnz() * b.nnz());
  for (int ar = 0; ar < a.rows(); ++ar)
    for (int ak = a.row_begin(ar); ak < a.row_end(ar); ++ak)
      for (int br = 0; br < b.rows(); ++br)
        for (int bk = b.row_begin(br); bk < b.row_end(br); ++bk)
          t.push_back({ar * b.rows() + br, a.col_index(ak) * b.cols() + b.col_index(bk),
                       a.value(ak) * b.value(bk)});
  return CsrMatrix::from_triplets(a.rows() * b.rows(), a.cols() * b.cols(),
                                  std::move(t));
}

/// Induced 2-norm estimate by power iteration on A^T A with a fixed
/// deterministic start vector.
inline double two_norm_estimate(const CsrMatrix& a, int iterations = 60) {
  if (a.nnz() == 0) return 0.0;
  const CsrMatrix at = a.transposed();
  std::vector<double> x(a.cols(), 1.0);
  double norm = 0.0;
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> y = at.multiply(a.multiply(x));
    norm = std::sqrt(std::inner_product(y.begin(), y.end(), y.begin(), 0.0));
    if (norm == 0.0) return 0.0;
    for (double& v : y) v /= norm;
    x = std::move(y);
  }
  return std::sqrt(norm);
}

}  // namespace crowdflow
