#pragma once

#include <cmath>
#include <numbers>

#include "poisonbench/layers.hpp"

namespace pb {

// Orthonormal DCT-II basis: basis(k, i) = a_k cos(pi (2i + 1) k / 2N).
inline MatrixRM<double> dct_basis(std::size_t n) {
  MatrixRM<double> c(n, n);
  const double nd = static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double a = k == 0 ? std::sqrt(1.0 / nd) : std::sqrt(2.0 / nd);
    for (std::size_t i = 0; i < n; ++i)
      c(k, i) = a * std::cos(std::numbers::pi * (2.0 * static_cast<double>(i) + 1.0) * static_cast<double>(k) / (2.0 * nd));
  }
  return c;
}

namespace detail {
inline void require_square(const Tensor<double>& t, const char* what) {
  if (t.rank() != 2 || t.dim(0) != t.dim(1) || t.dim(0) == 0)
    throw shape_error(std::string(what) + ": expected a non-empty square block, got " + shape_str(t.shape()));
}
}  // namespace detail

// 2-D orthonormal DCT-II, separable: C X C^T.
inline Tensor<double> dct2(const Tensor<double>& block) {
  detail::require_square(block, "dct2");
  const std::size_t n = block.dim(0);
  const MatrixRM<double> c = dct_basis(n);
  Tensor<double> out(block.shape());
  MapRM<double>(out.ptr(), n, n).noalias() = c * ConstMapRM<double>(block.ptr(), n, n) * c.transpose();
  return out;
}

// Inverse (DCT-III): C^T Y C.
inline Tensor<double> idct2(const Tensor<double>& coeffs) {
  detail::require_square(coeffs, "idct2");
  const std::size_t n = coeffs.dim(0);
  const MatrixRM<double> c = dct_basis(n);
  Tensor<double> out(coeffs.shape());
  MapRM<double>(out.ptr(), n, n).noalias() = c.transpose() * ConstMapRM<double>(coeffs.ptr(), n, n) * c;
  return out;
}

}  // namespace pb
