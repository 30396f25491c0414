#pragma once

// The single complex<->real layout used throughout the project, by the
// network inputs/outputs and by the evaluation harness alike:
//
//   realvec(A) = [Re(A) column-major..., Im(A) column-major...]
//
// i.e. all real parts first, then all imaginary parts, each half ordered
// column by column. A rows x cols complex matrix maps to 2*rows*cols reals.

#include <cstddef>
#include <span>
#include <vector>

#include "ipnet/errors.hpp"
#include "ipnet/linalg.hpp"

namespace ipnet {

inline std::size_t realvec_size(const CMatrix& a) {
  return 2 * a.rows() * a.cols();
}

inline void cmat_to_realvec(const CMatrix& a, std::span<double> out) {
  const std::size_t rc = a.rows() * a.cols();
  if (out.size() != 2 * rc)
    throw ShapeError("cmat_to_realvec: output span has wrong length");
  std::size_t idx = 0;
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i < a.rows(); ++i, ++idx) {
      out[idx] = a(i, j).real();
      out[rc + idx] = a(i, j).imag();
    }
}

inline std::vector<double> cmat_to_realvec(const CMatrix& a) {
  std::vector<double> v(realvec_size(a));
  cmat_to_realvec(a, v);
  return v;
}

inline CMatrix realvec_to_cmat(std::span<const double> v, std::size_t rows,
                               std::size_t cols) {
  const std::size_t rc = rows * cols;
  if (v.size() != 2 * rc)
    throw ShapeError("realvec_to_cmat: input span has wrong length");
  CMatrix a(rows, cols);
  std::size_t idx = 0;
  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t i = 0; i < rows; ++i, ++idx)
      a(i, j) = cplx{v[idx], v[rc + idx]};
  return a;
}

}  // namespace ipnet
