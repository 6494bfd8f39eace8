#pragma once

#include <span>
#include <stdexcept>

#include "nesa/linalg.hpp"

namespace nesa {

/// Direct O(N^2) product phi = K q with k_ij = -log|x_i - x_j| and k_ii = 0.
/// Rows are streamed so K is never stored. Always serial; summation runs in
/// index order.
inline Vector dense_matvec(std::span<const Point2> points, std::span<const double> q) {
  if (points.size() != q.size()) throw std::invalid_argument("dense_matvec: size mismatch");
  const std::size_t n = points.size();
  Vector phi(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += kernel_eval(points[i], points[j], i == j) * q[j];
    phi[i] = sum;
  }
  return phi;
}

}  // namespace nesa
