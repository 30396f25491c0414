#pragma once

// Closed-form linear precoders (MMSE, ZF, MRT), the diagonal-expansion
// approximate-inverse precoder, and the downlink sum-rate metric.
//
// Every precoder output is Frobenius-normalized to sqrt(P_T) so all
// compared schemes satisfy the same transmit power budget.

#include <cmath>
#include <complex>

#include "ipnet/errors.hpp"
#include "ipnet/linalg.hpp"

namespace ipnet {

/// Link-level constants: noise variance sigma^2, power budget P_T, and the
/// MMSE regularizer rho. Default rho is the reciprocal of the SNR,
/// rho = sigma^2 / P_T; pass an explicit value to override (e.g. K*sigma^2/P_T).
struct LinkConfig {
  double noise_variance = 1.0;
  double power_budget = 1.0;
  double rho = 1.0;

  static LinkConfig from_snr(double power_budget, double noise_variance = 1.0) {
    if (!(power_budget > 0.0) || !(noise_variance > 0.0))
      throw ValidationError("LinkConfig: P_T and sigma^2 must be positive");
    return {noise_variance, power_budget, noise_variance / power_budget};
  }

  static LinkConfig with_rho(double power_budget, double noise_variance,
                             double rho) {
    if (!(power_budget > 0.0) || !(noise_variance > 0.0) || !(rho > 0.0))
      throw ValidationError("LinkConfig: parameters must be positive");
    return {noise_variance, power_budget, rho};
  }
};

/// An M x K precoder together with the power budget it was normalized to;
/// construction enforces ||w||_F^2 <= P_T + 1e-9.
struct PrecoderMatrix {
  CMatrix w;
  double power_budget = 0.0;

  PrecoderMatrix(CMatrix w_in, double p_t) : w(std::move(w_in)), power_budget(p_t) {
    const double norm = frobenius_norm(w);
    if (norm * norm > p_t + 1e-9)
      throw ValidationError("precoder exceeds power budget");
  }
};

namespace detail {
inline PrecoderMatrix normalize_to_budget(CMatrix w_raw, double p_t) {
  const double norm = frobenius_norm(w_raw);
  if (norm == 0.0)
    throw DegenerateInputError("precoder normalization: zero matrix");
  const double s = std::sqrt(p_t) / norm;
  for (cplx& v : w_raw.entries()) v *= s;
  return PrecoderMatrix(std::move(w_raw), p_t);
}
}  // namespace detail

/// MMSE (regularized channel inverse): W ~ H (H^H H + rho I)^-1, scaled to
/// the power budget.
inline PrecoderMatrix mmse_precode(const CMatrix& h, const LinkConfig& cfg) {
  if (!(cfg.rho > 0.0)) throw ValidationError("mmse_precode: rho must be > 0");
  CMatrix z = matmul(hermitian(h), h);
  for (std::size_t i = 0; i < z.rows(); ++i) z(i, i) += cfg.rho;
  return detail::normalize_to_budget(matmul(h, invert(z)),
                                     cfg.power_budget);
}

/// Zero-forcing: W ~ H (H^H H)^-1. Throws SingularMatrixError for
/// rank-deficient channels.
inline PrecoderMatrix zf_precode(const CMatrix& h, double p_t) {
  if (!(p_t > 0.0)) throw ValidationError("zf_precode: P_T must be > 0");
  CMatrix z = matmul(hermitian(h), h);
  return detail::normalize_to_budget(matmul(h, invert(z)), p_t);
}

/// Maximum ratio transmission: W = sqrt(P_T) H / ||H||_F.
inline PrecoderMatrix mrt_precode(const CMatrix& h, double p_t) {
  if (!(p_t > 0.0)) throw ValidationError("mrt_precode: P_T must be > 0");
  if (frobenius_norm(h) == 0.0)
    throw DegenerateInputError("mrt_precode: zero channel");
  return detail::normalize_to_budget(h, p_t);
}

/// First-order expansion of Z^-1 around its diagonal part:
/// 2 Zd^-1 - Z Zd^-2. Exact whenever Z is diagonal.
inline CMatrix taylor_inverse_approx(const CMatrix& z) {
  if (z.rows() != z.cols())
    throw ShapeError("taylor_inverse_approx: matrix not square");
  const std::size_t n = z.rows();
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(z(i, i)) == 0.0)
      throw DegenerateInputError("taylor_inverse_approx: zero diagonal entry");
  CMatrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const cplx dj = z(j, j);
      cplx v = -z(i, j) / (dj * dj);
      if (i == j) v += 2.0 / dj;
      out(i, j) = v;
    }
  }
  return out;
}

/// MMSE with the matrix inverse replaced by its diagonal expansion; no
/// elimination is performed.
inline PrecoderMatrix taylor_mmse_precode(const CMatrix& h,
                                          const LinkConfig& cfg) {
  if (!(cfg.rho > 0.0))
    throw ValidationError("taylor_mmse_precode: rho must be > 0");
  CMatrix z = matmul(hermitian(h), h);
  for (std::size_t i = 0; i < z.rows(); ++i) z(i, i) += cfg.rho;
  return detail::normalize_to_budget(matmul(h, taylor_inverse_approx(z)),
                                     cfg.power_budget);
}

/// Downlink sum rate sum_k log2(1 + SINR_k) in bits/s/Hz, where user k is
/// served by column k of W and interfered by the other columns.
inline double sum_rate(const CMatrix& h, const CMatrix& w,
                       double noise_variance) {
  if (h.rows() != w.rows() || h.cols() != w.cols())
    throw ShapeError("sum_rate: H and W dimensions differ");
  if (!(noise_variance > 0.0))
    throw ValidationError("sum_rate: noise variance must be > 0");
  const std::size_t m = h.rows(), k = h.cols();
  double rate = 0.0;
  for (std::size_t user = 0; user < k; ++user) {
    double desired = 0.0;
    double interference = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      cplx g{};
      for (std::size_t i = 0; i < m; ++i)
        g += std::conj(h(i, user)) * w(i, j);
      if (j == user)
        desired = std::norm(g);
      else
        interference += std::norm(g);
    }
    rate += std::log2(1.0 + desired / (interference + noise_variance));
  }
  return rate;
}

inline double sum_rate(const CMatrix& h, const PrecoderMatrix& w,
                       double noise_variance) {
  return sum_rate(h, w.w, noise_variance);
}

}  // namespace ipnet
