#pragma once

// Independent oracle implementations used only by tests. Each one computes
// its result through a different route than the library code it checks:
// scalar triple loops instead of the production matmul, a Cholesky solve
// instead of Gaussian elimination, the 2x2 closed-form eigendecomposition
// instead of power iteration, and central finite differences instead of
// backpropagation.

#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

#include "ipnet/linalg.hpp"
#include "ipnet/rng.hpp"

namespace oracle {

using ipnet::CMatrix;
using ipnet::cplx;

/// Entry-wise triple-loop product.
inline CMatrix matmul_loops(const CMatrix& a, const CMatrix& b) {
  CMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      cplx s{};
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

/// Cholesky factorization of a Hermitian positive-definite matrix
/// (A = L L^H, L lower triangular).
inline CMatrix cholesky(const CMatrix& a) {
  const std::size_t n = a.rows();
  CMatrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      cplx s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * std::conj(l(j, k));
      if (i == j) {
        const double d = s.real();
        if (d <= 0.0) throw std::runtime_error("cholesky: not HPD");
        l(i, i) = std::sqrt(d);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return l;
}

/// Solves A x = b for HPD A via Cholesky (forward + back substitution).
inline std::vector<cplx> cholesky_solve(const CMatrix& l,
                                        const std::vector<cplx>& b) {
  const std::size_t n = l.rows();
  std::vector<cplx> y(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    cplx s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    cplx s = y[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= std::conj(l(k, i)) * x[k];
    x[i] = s / std::conj(l(i, i));
  }
  return x;
}

/// MMSE precoder through an independent path: W = H Z^-1 with Z^-1 applied
/// column-by-column via Cholesky solves, then Frobenius-normalized.
inline CMatrix mmse_by_solves(const CMatrix& h, double rho, double p_t) {
  const std::size_t m = h.rows(), k = h.cols();
  CMatrix z(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      cplx s{};
      for (std::size_t r = 0; r < m; ++r) s += std::conj(h(r, i)) * h(r, j);
      z(i, j) = s;
    }
  for (std::size_t i = 0; i < k; ++i) z(i, i) += rho;
  const CMatrix l = cholesky(z);
  CMatrix zinv(k, k);
  for (std::size_t col = 0; col < k; ++col) {
    std::vector<cplx> e(k, cplx{});
    e[col] = 1.0;
    auto x = cholesky_solve(l, e);
    for (std::size_t rr = 0; rr < k; ++rr) zinv(rr, col) = x[rr];
  }
  CMatrix w = matmul_loops(h, zinv);
  double norm = 0.0;
  for (const cplx& v : w.entries()) norm += std::norm(v);
  norm = std::sqrt(norm);
  const double s = std::sqrt(p_t) / norm;
  for (cplx& v : w.entries()) v *= s;
  return w;
}

/// Per-user scalar-loop sum rate (no shared code with the library metric).
inline double sum_rate_loops(const CMatrix& h, const CMatrix& w,
                             double sigma2) {
  const std::size_t m = h.rows(), k = h.cols();
  double total = 0.0;
  for (std::size_t user = 0; user < k; ++user) {
    double sig = 0.0, intf = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      double re = 0.0, im = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double hr = h(i, user).real(), hi = h(i, user).imag();
        const double wr = w(i, j).real(), wi = w(i, j).imag();
        // conj(h) * w accumulated in real arithmetic
        re += hr * wr + hi * wi;
        im += hr * wi - hi * wr;
      }
      const double p = re * re + im * im;
      if (j == user)
        sig = p;
      else
        intf += p;
    }
    total += std::log(1.0 + sig / (intf + sigma2)) / std::log(2.0);
  }
  return total;
}

struct Eig2 {
  double lambda_max = 0.0;
  cplx v0, v1;  // dominant eigenvector (unit norm)
};

/// Closed-form dominant eigenpair of a 2x2 Hermitian matrix.
inline Eig2 eig2_hermitian(const CMatrix& a) {
  const double p = a(0, 0).real();
  const double q = a(1, 1).real();
  const cplx b = a(0, 1);
  const double disc = std::sqrt((p - q) * (p - q) + 4.0 * std::norm(b));
  Eig2 e;
  e.lambda_max = 0.5 * (p + q + disc);
  if (std::abs(b) > 0.0) {
    e.v0 = b;
    e.v1 = cplx{e.lambda_max - p, 0.0};
  } else {
    // Diagonal: pick the axis of the larger entry.
    if (p >= q) {
      e.v0 = 1.0;
      e.v1 = 0.0;
    } else {
      e.v0 = 0.0;
      e.v1 = 1.0;
    }
  }
  const double norm = std::sqrt(std::norm(e.v0) + std::norm(e.v1));
  e.v0 /= norm;
  e.v1 /= norm;
  return e;
}

/// Gaussian tail probability Q(x).
inline double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

/// Central finite difference of f at x with step h.
inline double central_diff(const std::function<double(double)>& f, double x,
                           double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Random complex matrix with CN(0,1) entries from a seeded generator.
inline CMatrix random_cmatrix(std::size_t rows, std::size_t cols,
                              std::uint64_t seed) {
  ipnet::Xoshiro256pp rng(seed);
  CMatrix a(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) a(i, j) = rng.cgaussian();
  return a;
}

/// Random Hermitian PSD matrix G^H G.
inline CMatrix random_hpsd(std::size_t n, std::uint64_t seed) {
  CMatrix g = random_cmatrix(n + 1, n, seed);
  CMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      cplx s{};
      for (std::size_t r = 0; r < n + 1; ++r)
        s += std::conj(g(r, i)) * g(r, j);
      a(i, j) = s;
    }
  return a;
}

}  // namespace oracle
