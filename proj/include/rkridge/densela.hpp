#pragma once

// Dense real linear algebra sized for desk-scale ridge problems: a row-major
// matrix with row/column access, the norms the solvers sample by, a Cholesky
// solve and a cyclic Jacobi eigensolver.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rkridge/error.hpp"

namespace rkridge {

namespace detail {

// Scalar-access counter for the per-step cost tests. Compiled to nothing unless
// RKRIDGE_COUNT_ACCESS is defined before the first include in a translation unit.
inline std::size_t& access_counter() {
  thread_local std::size_t count = 0;
  return count;
}

inline void touch([[maybe_unused]] std::size_t scalars) {
#ifdef RKRIDGE_COUNT_ACCESS
  access_counter() += scalars;
#endif
}

}  // namespace detail

class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t len, double fill = 0.0) : data_(len, fill) {}
  explicit Vector(std::vector<double> data) : data_(std::move(data)) {}
  Vector(std::initializer_list<double> values) : data_(values) {}

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool operator==(const Vector&) const = default;

 private:
  std::vector<double> data_;
};

class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
      : rows_(rows), cols_(cols), data_(std::move(row_major)) {
    if (data_.size() != rows_ * cols_) {
      throw UsageError("matrix data length " + std::to_string(data_.size()) + " != " +
                       std::to_string(rows_) + "x" + std::to_string(cols_));
    }
  }

  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw UsageError("ragged matrix literal");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix id(n, n);
    for (std::size_t i = 0; i < n; ++i) id(i, i) = 1.0;
    return id;
  }

  static Matrix diagonal(std::span<const double> diag) {
    Matrix d(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) d(i, i) = diag[i];
    return d;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }

  /// Copy of column j (strided gather).
  Vector column(std::size_t j) const {
    Vector c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Vector kernels

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw UsageError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm_sq(std::span<const double> a) { return dot(a, a); }
inline double norm(std::span<const double> a) { return std::sqrt(norm_sq(a)); }

inline double max_abs(std::span<const double> a) {
  detail::touch(a.size());
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

inline Vector operator-(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw UsageError("vector difference: length mismatch");
  Vector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline Vector operator+(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw UsageError("vector sum: length mismatch");
  Vector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline Vector operator*(double s, const Vector& a) {
  Vector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = s * a[i];
  return r;
}

inline bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// Row / column kernels used by the iterative solvers. Every scalar of X they
// read goes through detail::touch so the cost tests can count it.

inline double row_dot(const Matrix& X, std::size_t i, std::span<const double> v) {
  detail::touch(X.cols());
  const auto r = X.row(i);
  double s = 0.0;
  for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * v[j];
  return s;
}

/// v += scale * X^i
inline void row_axpy(const Matrix& X, std::size_t i, double scale, std::span<double> v) {
  detail::touch(X.cols());
  const auto r = X.row(i);
  for (std::size_t j = 0; j < r.size(); ++j) v[j] += scale * r[j];
}

inline double col_dot(const Matrix& X, std::size_t j, std::span<const double> v) {
  detail::touch(X.rows());
  const auto d = X.data();
  const std::size_t stride = X.cols();
  double s = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) s += d[i * stride + j] * v[i];
  return s;
}

/// v += scale * X_(j)
inline void col_axpy(const Matrix& X, std::size_t j, double scale, std::span<double> v) {
  detail::touch(X.rows());
  const auto d = X.data();
  const std::size_t stride = X.cols();
  for (std::size_t i = 0; i < X.rows(); ++i) v[i] += scale * d[i * stride + j];
}

// ---------------------------------------------------------------------------
// Norms

inline double row_norm_sq(const Matrix& X, std::size_t i) {
  if (i >= X.rows()) {
    throw UsageError("row index " + std::to_string(i) + " out of range for " +
                     std::to_string(X.rows()) + " rows");
  }
  return norm_sq(X.row(i));
}

inline double col_norm_sq(const Matrix& X, std::size_t j) {
  if (j >= X.cols()) {
    throw UsageError("column index " + std::to_string(j) + " out of range for " +
                     std::to_string(X.cols()) + " columns");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) s += X(i, j) * X(i, j);
  return s;
}

inline std::vector<double> row_norms_sq(const Matrix& X) {
  std::vector<double> out(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) out[i] = norm_sq(X.row(i));
  return out;
}

inline std::vector<double> col_norms_sq(const Matrix& X) {
  std::vector<double> out(X.cols(), 0.0);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const auto r = X.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j] * r[j];
  }
  return out;
}

inline double frobenius_sq(const Matrix& X) { return norm_sq(X.data()); }

// ---------------------------------------------------------------------------
// Products

inline Vector multiply(const Matrix& A, std::span<const double> x) {
  if (x.size() != A.cols()) throw UsageError("multiply: dimension mismatch");
  Vector out(A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i) out[i] = dot(A.row(i), x);
  return out;
}

/// A^T x without forming the transpose.
inline Vector multiply_transpose(const Matrix& A, std::span<const double> x) {
  if (x.size() != A.rows()) throw UsageError("multiply_transpose: dimension mismatch");
  Vector out(A.cols());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    const auto r = A.row(i);
    const double xi = x[i];
    for (std::size_t j = 0; j < r.size(); ++j) out[j] += xi * r[j];
  }
  return out;
}

inline Matrix multiply(const Matrix& A, const Matrix& B) {
  if (A.cols() != B.rows()) throw UsageError("matrix product: dimension mismatch");
  Matrix C(A.rows(), B.cols());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    auto c = C.row(i);
    for (std::size_t k = 0; k < A.cols(); ++k) {
      const double a = A(i, k);
      if (a == 0.0) continue;
      const auto b = B.row(k);
      for (std::size_t j = 0; j < b.size(); ++j) c[j] += a * b[j];
    }
  }
  return C;
}

/// X^T X (n x n), exactly symmetric.
inline Matrix gram_cols(const Matrix& X) {
  const std::size_t n = X.cols();
  Matrix G(n, n);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const auto r = X.row(i);
    for (std::size_t a = 0; a < n; ++a) {
      const double ra = r[a];
      if (ra == 0.0) continue;
      auto g = G.row(a);
      for (std::size_t b = a; b < n; ++b) g[b] += ra * r[b];
    }
  }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < a; ++b) G(a, b) = G(b, a);
  return G;
}

/// X X^T (m x m), exactly symmetric.
inline Matrix gram_rows(const Matrix& X) {
  const std::size_t m = X.rows();
  Matrix G(m, m);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a; b < m; ++b) G(a, b) = G(b, a) = dot(X.row(a), X.row(b));
  return G;
}

inline Matrix add_diagonal(Matrix M, double shift) {
  const std::size_t k = std::min(M.rows(), M.cols());
  for (std::size_t i = 0; i < k; ++i) M(i, i) += shift;
  return M;
}

inline bool is_symmetric(const Matrix& M, double tol = 1e-12) {
  if (M.rows() != M.cols()) return false;
  const double scale = std::max(1.0, std::sqrt(frobenius_sq(M)));
  for (std::size_t i = 0; i < M.rows(); ++i)
    for (std::size_t j = i + 1; j < M.cols(); ++j)
      if (std::abs(M(i, j) - M(j, i)) > tol * scale) return false;
  return true;
}

/// <z, M z> for symmetric positive semidefinite M.
inline double weighted_norm_sq(std::span<const double> z, const Matrix& M) {
  if (M.rows() != M.cols() || M.cols() != z.size()) {
    throw UsageError("weighted_norm_sq: dimension mismatch");
  }
  if (!is_symmetric(M)) throw UsageError("weighted_norm_sq: matrix is not symmetric");
  double s = 0.0;
  for (std::size_t i = 0; i < M.rows(); ++i) s += z[i] * dot(M.row(i), z);
  return s;
}

// ---------------------------------------------------------------------------
// Cholesky

/// Lower-triangular factor L with M = L L^T.
class Cholesky {
 public:
  explicit Cholesky(const Matrix& M) : L_(M.rows(), M.cols()) {
    if (M.rows() != M.cols()) throw UsageError("cholesky: matrix is not square");
    const std::size_t n = M.rows();
    for (std::size_t j = 0; j < n; ++j) {
      double d = M(j, j);
      for (std::size_t k = 0; k < j; ++k) d -= L_(j, k) * L_(j, k);
      if (!(d > 0.0)) {
        throw NumericalError("cholesky: matrix is not positive definite (pivot " +
                             std::to_string(j) + ")");
      }
      const double ljj = std::sqrt(d);
      L_(j, j) = ljj;
      for (std::size_t i = j + 1; i < n; ++i) {
        double s = M(i, j);
        const auto li = L_.row(i);
        const auto lj = L_.row(j);
        for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
        L_(i, j) = s / ljj;
      }
    }
  }

  Vector solve(std::span<const double> b) const {
    const std::size_t n = L_.rows();
    if (b.size() != n) throw UsageError("cholesky solve: dimension mismatch");
    Vector x(std::vector<double>(b.begin(), b.end()));
    for (std::size_t i = 0; i < n; ++i) {
      double s = x[i];
      for (std::size_t k = 0; k < i; ++k) s -= L_(i, k) * x[k];
      x[i] = s / L_(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = x[i];
      for (std::size_t k = i + 1; k < n; ++k) s -= L_(k, i) * x[k];
      x[i] = s / L_(i, i);
    }
    return x;
  }

  const Matrix& factor() const noexcept { return L_; }

 private:
  Matrix L_;
};

inline Vector solve_spd(const Matrix& M, std::span<const double> b) {
  return Cholesky(M).solve(b);
}

// ---------------------------------------------------------------------------
// Symmetric eigenvalues (cyclic Jacobi)

inline constexpr double kJacobiOffDiagonalTol = 1e-11;
inline constexpr std::size_t kMaxEigenDimension = 2000;

/// Eigenvalues of symmetric M in increasing order.
inline std::vector<double> sym_eigenvalues(const Matrix& M) {
  if (!is_symmetric(M)) throw UsageError("sym_eigenvalues: matrix is not symmetric");
  const std::size_t n = M.rows();
  if (n > kMaxEigenDimension) {
    throw UsageError("sym_eigenvalues: dimension " + std::to_string(n) + " exceeds " +
                     std::to_string(kMaxEigenDimension));
  }
  Matrix A = M;
  const double target = kJacobiOffDiagonalTol * std::sqrt(frobenius_sq(M));

  auto off_sq = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * A(i, j) * A(i, j);
    return s;
  };

  constexpr int kMaxSweeps = 100;
  int sweep = 0;
  while (std::sqrt(off_sq()) > target) {
    if (++sweep > kMaxSweeps) throw NumericalError("sym_eigenvalues: Jacobi did not converge");
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = A(p, q);
        if (apq == 0.0) continue;
        const double app = A(p, p);
        const double aqq = A(q, q);
        // Rotation annihilating A(p,q): tan via the stable small root.
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = A(k, p);
          const double akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = A(p, k);
          const double aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        A(p, q) = A(q, p) = 0.0;
      }
    }
  }

  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = A(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

/// min(m, n) singular values of X, increasing, from the smaller Gram matrix.
inline std::vector<double> singular_values(const Matrix& X) {
  const Matrix G = X.rows() >= X.cols() ? gram_cols(X) : gram_rows(X);
  auto ev = sym_eigenvalues(G);
  for (double& v : ev) v = std::sqrt(std::max(v, 0.0));
  return ev;
}

}  // namespace rkridge
