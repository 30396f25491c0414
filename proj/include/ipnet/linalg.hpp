#pragma once

// Minimal complex dense linear algebra for small matrices (users/antennas,
// so dimensions stay in the single digits): products, Hermitian transpose,
// partial-pivot Gaussian inversion, Frobenius norm, and dominant
// eigenvectors of Hermitian PSD matrices via power iteration.
//
// Inversions and elimination pivots are counted in process-wide counters so
// tests can verify which code paths perform matrix inversions.

#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "ipnet/errors.hpp"

namespace ipnet {

using cplx = std::complex<double>;

/// Dense row-major complex matrix. Entries are validated to be finite when
/// constructed from data; operations never produce non-finite values from
/// finite, in-contract inputs.
class CMatrix {
 public:
  CMatrix() = default;

  CMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), e_(rows * cols) {
    if (rows == 0 || cols == 0)
      throw ShapeError("matrix dimensions must be positive");
  }

  CMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries)
      : rows_(rows), cols_(cols), e_(std::move(entries)) {
    if (rows == 0 || cols == 0)
      throw ShapeError("matrix dimensions must be positive");
    if (e_.size() != rows * cols)
      throw ShapeError("entry count " + std::to_string(e_.size()) +
                       " does not match " + std::to_string(rows) + "x" +
                       std::to_string(cols));
    for (const cplx& v : e_)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
        throw NumericError("non-finite matrix entry");
  }

  static CMatrix identity(std::size_t n) {
    CMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  cplx& operator()(std::size_t i, std::size_t j) { return e_[i * cols_ + j]; }
  const cplx& operator()(std::size_t i, std::size_t j) const {
    return e_[i * cols_ + j];
  }

  const std::vector<cplx>& entries() const { return e_; }
  std::vector<cplx>& entries() { return e_; }

  /// Column j as an rows x 1 matrix.
  CMatrix column(std::size_t j) const {
    CMatrix c(rows_, 1);
    for (std::size_t i = 0; i < rows_; ++i) c(i, 0) = (*this)(i, j);
    return c;
  }

  bool operator==(const CMatrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && e_ == o.e_;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<cplx> e_;
};

// --- operation counters (inversion complexity accounting) ------------------

namespace opcount {
inline std::atomic<std::uint64_t> invert_calls{0};
inline std::atomic<std::uint64_t> pivot_ops{0};

inline void reset() {
  invert_calls.store(0);
  pivot_ops.store(0);
}
}  // namespace opcount

// --- operations -------------------------------------------------------------

inline CMatrix matmul(const CMatrix& a, const CMatrix& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " * " +
                     std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  CMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const cplx aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

/// Conjugate transpose.
inline CMatrix hermitian(const CMatrix& a) {
  CMatrix h(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) h(j, i) = std::conj(a(i, j));
  return h;
}

inline CMatrix add(const CMatrix& a, const CMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("add: dimension mismatch");
  CMatrix c = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) += b(i, j);
  return c;
}

inline CMatrix sub(const CMatrix& a, const CMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("sub: dimension mismatch");
  CMatrix c = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) -= b(i, j);
  return c;
}

inline CMatrix scale(const CMatrix& a, cplx s) {
  CMatrix c = a;
  for (cplx& v : c.entries()) v *= s;
  return c;
}

inline double frobenius_norm(const CMatrix& a) {
  double s = 0.0;
  for (const cplx& v : a.entries()) s += std::norm(v);
  return std::sqrt(s);
}

/// Inverse by Gauss-Jordan elimination with partial pivoting. A pivot is
/// declared singular when its magnitude falls below 1e-12 times the largest
/// entry magnitude of the input.
inline CMatrix invert(const CMatrix& z) {
  if (z.rows() != z.cols()) throw ShapeError("invert: matrix not square");
  const std::size_t n = z.rows();
  opcount::invert_calls.fetch_add(1);

  double max_mag = 0.0;
  for (const cplx& v : z.entries()) max_mag = std::max(max_mag, std::abs(v));
  const double threshold = 1e-12 * max_mag;

  CMatrix a = z;
  CMatrix inv = CMatrix::identity(n);
  for (std::size_t p = 0; p < n; ++p) {
    opcount::pivot_ops.fetch_add(1);
    std::size_t best = p;
    double best_mag = std::abs(a(p, p));
    for (std::size_t r = p + 1; r < n; ++r) {
      double mag = std::abs(a(r, p));
      if (mag > best_mag) {
        best_mag = mag;
        best = r;
      }
    }
    if (best_mag <= threshold)
      throw SingularMatrixError(
          "singular matrix: pivot magnitude " + std::to_string(best_mag) +
              " below threshold " + std::to_string(threshold),
          best_mag);
    if (best != p) {
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(a(p, j), a(best, j));
        std::swap(inv(p, j), inv(best, j));
      }
    }
    const cplx pivot = a(p, p);
    for (std::size_t j = 0; j < n; ++j) {
      a(p, j) /= pivot;
      inv(p, j) /= pivot;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == p) continue;
      const cplx factor = a(r, p);
      if (factor == cplx{}) continue;
      for (std::size_t j = 0; j < n; ++j) {
        a(r, j) -= factor * a(p, j);
        inv(r, j) -= factor * inv(p, j);
      }
    }
  }
  return inv;
}

/// Dominant eigenvector of a Hermitian PSD matrix by power iteration
/// (deterministic all-ones start, cap 10000 iterations). Iterates to a
/// residual of 1e-14 * max(1, lambda), well inside the 1e-8 contract, so
/// the vector itself is accurate to ~1e-10 for non-degenerate spectra.
/// The phase is fixed by rotating the largest-magnitude component to the
/// positive real axis, ties broken by lowest index.
inline CMatrix max_eigenvector(const CMatrix& a) {
  if (a.rows() != a.cols())
    throw ShapeError("max_eigenvector: matrix not square");
  const std::size_t n = a.rows();
  if (frobenius_norm(a) == 0.0)
    throw DegenerateInputError("max_eigenvector: zero matrix");

  std::vector<cplx> v(n, cplx{1.0 / std::sqrt(static_cast<double>(n)), 0.0});
  std::vector<cplx> w(n);
  std::size_t fallback = 0;
  double lambda = 0.0;
  for (int iter = 0; iter < 10000; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      cplx s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += a(i, j) * v[j];
      w[i] = s;
    }
    // Rayleigh quotient; real for Hermitian inputs.
    cplx lam{};
    for (std::size_t i = 0; i < n; ++i) lam += std::conj(v[i]) * w[i];
    lambda = lam.real();
    double resid = 0.0;
    for (std::size_t i = 0; i < n; ++i) resid += std::norm(w[i] - lambda * v[i]);
    resid = std::sqrt(resid);
    if (resid <= 1e-14 * std::max(1.0, std::abs(lambda))) break;
    double wn = 0.0;
    for (const cplx& x : w) wn += std::norm(x);
    wn = std::sqrt(wn);
    if (wn == 0.0) {
      // Start vector was in the nullspace; restart from the next basis axis.
      if (fallback >= n)
        throw DegenerateInputError("max_eigenvector: no dominant direction");
      std::fill(v.begin(), v.end(), cplx{});
      v[fallback++] = 1.0;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / wn;
  }

  // Phase convention.
  std::size_t imax = 0;
  double mmax = std::abs(v[0]);
  for (std::size_t i = 1; i < n; ++i) {
    double m = std::abs(v[i]);
    if (m > mmax) {
      mmax = m;
      imax = i;
    }
  }
  const cplx phase = v[imax] / mmax;
  CMatrix out(n, 1);
  for (std::size_t i = 0; i < n; ++i) out(i, 0) = v[i] * std::conj(phase);
  // Re-normalize so the result is unit length to machine precision.
  double norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) norm += std::norm(out(i, 0));
  norm = std::sqrt(norm);
  for (std::size_t i = 0; i < n; ++i) out(i, 0) /= norm;
  return out;
}

}  // namespace ipnet
