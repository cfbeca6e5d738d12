#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "lidkit/common.hpp"

namespace lidkit {

using Vec = std::vector<double>;

// Dense row-major matrix. Sized for desk-scale models; all products are
// plain triple loops.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), a(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return a[r * cols + c];
  }

  double* row(std::size_t r) { return a.data() + r * cols; }
  const double* row(std::size_t r) const { return a.data() + r * cols; }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline Matrix matmul(const Matrix& A, const Matrix& B) {
  if (A.cols != B.rows)
    fail_input("matmul: inner dims differ (", A.cols, " vs ", B.rows, ")");
  Matrix C(A.rows, B.cols);
  for (std::size_t i = 0; i < A.rows; ++i)
    for (std::size_t k = 0; k < A.cols; ++k) {
      double aik = A(i, k);
      if (aik == 0.0) continue;
      const double* brow = B.row(k);
      double* crow = C.row(i);
      for (std::size_t j = 0; j < B.cols; ++j) crow[j] += aik * brow[j];
    }
  return C;
}

// A^T * B
inline Matrix matmul_tn(const Matrix& A, const Matrix& B) {
  if (A.rows != B.rows)
    fail_input("matmul_tn: row counts differ (", A.rows, " vs ", B.rows, ")");
  Matrix C(A.cols, B.cols);
  for (std::size_t k = 0; k < A.rows; ++k)
    for (std::size_t i = 0; i < A.cols; ++i) {
      double aki = A(k, i);
      if (aki == 0.0) continue;
      const double* brow = B.row(k);
      double* crow = C.row(i);
      for (std::size_t j = 0; j < B.cols; ++j) crow[j] += aki * brow[j];
    }
  return C;
}

// A * B^T
inline Matrix matmul_nt(const Matrix& A, const Matrix& B) {
  if (A.cols != B.cols)
    fail_input("matmul_nt: col counts differ (", A.cols, " vs ", B.cols, ")");
  Matrix C(A.rows, B.rows);
  for (std::size_t i = 0; i < A.rows; ++i)
    for (std::size_t j = 0; j < B.rows; ++j) {
      const double* arow = A.row(i);
      const double* brow = B.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < A.cols; ++k) s += arow[k] * brow[k];
      C(i, j) = s;
    }
  return C;
}

inline Matrix transpose(const Matrix& A) {
  Matrix T(A.cols, A.rows);
  for (std::size_t i = 0; i < A.rows; ++i)
    for (std::size_t j = 0; j < A.cols; ++j) T(j, i) = A(i, j);
  return T;
}

inline Vec matvec(const Matrix& A, const Vec& x) {
  if (A.cols != x.size())
    fail_input("matvec: dims differ (", A.cols, " vs ", x.size(), ")");
  Vec y(A.rows, 0.0);
  for (std::size_t i = 0; i < A.rows; ++i) {
    const double* arow = A.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < A.cols; ++j) s += arow[j] * x[j];
    y[i] = s;
  }
  return y;
}

inline double dot(const Vec& x, const Vec& y) {
  if (x.size() != y.size())
    fail_input("dot: lengths differ (", x.size(), " vs ", y.size(), ")");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(const Vec& x) { return std::sqrt(dot(x, x)); }

inline double frobenius(const Matrix& A) {
  double s = 0.0;
  for (double v : A.a) s += v * v;
  return std::sqrt(s);
}

// Cholesky factor L (lower) of a symmetric positive-definite A = L L^T.
inline Matrix cholesky(const Matrix& A) {
  if (A.rows != A.cols) fail_input("cholesky: matrix not square");
  std::size_t n = A.rows;
  Matrix L(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = A(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      if (i == j) {
        if (s <= 0.0)
          fail_numeric("cholesky: matrix not positive definite at pivot ", i,
                       " (value ", s, ")");
        L(i, i) = std::sqrt(s);
      } else {
        L(i, j) = s / L(j, j);
      }
    }
  }
  return L;
}

// Solves L y = b for lower-triangular L.
inline Vec solve_lower(const Matrix& L, const Vec& b) {
  std::size_t n = L.rows;
  Vec y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= L(i, k) * y[k];
    y[i] = s / L(i, i);
  }
  return y;
}

// Inverse of a lower-triangular matrix.
inline Matrix invert_lower(const Matrix& L) {
  std::size_t n = L.rows;
  Matrix Inv(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    Vec e(n, 0.0);
    e[j] = 1.0;
    Vec col = solve_lower(L, e);
    for (std::size_t i = 0; i < n; ++i) Inv(i, j) = col[i];
  }
  return Inv;
}

// Cyclic Jacobi eigensolver for a symmetric matrix.
// Returns eigenvalues in descending order; eigenvectors are the matching
// columns of V, orthonormal to machine precision.
inline void jacobi_eigen_sym(const Matrix& A, Vec& eigenvalues, Matrix& V,
                             int max_sweeps = 64) {
  if (A.rows != A.cols) fail_input("jacobi_eigen_sym: matrix not square");
  std::size_t n = A.rows;
  Matrix M = A;
  V = Matrix::identity(n);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += M(p, q) * M(p, q);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = M(p, q);
        if (apq == 0.0) continue;
        double app = M(p, p), aqq = M(q, q);
        double tau = (aqq - app) / (2.0 * apq);
        double t = (tau >= 0.0) ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double mkp = M(k, p), mkq = M(k, q);
          M(k, p) = c * mkp - s * mkq;
          M(k, q) = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double mpk = M(p, k), mqk = M(q, k);
          M(p, k) = c * mpk - s * mqk;
          M(q, k) = s * mpk + c * mqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  eigenvalues.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) eigenvalues[i] = M(i, i);
  // sort descending, permuting columns of V alongside
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (eigenvalues[order[j]] > eigenvalues[order[i]])
        std::swap(order[i], order[j]);
  Vec ev(n);
  Matrix W(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    ev[j] = eigenvalues[order[j]];
    for (std::size_t i = 0; i < n; ++i) W(i, j) = V(i, order[j]);
  }
  eigenvalues = ev;
  V = W;
}

}  // namespace lidkit
