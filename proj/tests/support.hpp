#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "nesa/geometry.hpp"
#include "nesa/linalg.hpp"

namespace nesa::testing {

inline Vector random_vector(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Vector v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

inline DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  const Vector v = random_vector(rows * cols, seed);
  DenseMatrix a(rows, cols);
  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t i = 0; i < rows; ++i) a(i, j) = v[j * rows + i];
  return a;
}

inline std::vector<Point2> random_points(std::size_t n, std::uint64_t seed, double lo = 0.0,
                                         double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<Point2> pts(n);
  for (Point2& p : pts) p = {dist(rng), dist(rng)};
  return pts;
}

// Cell centers of a side x side grid filling the unit square.
inline std::vector<Point2> grid_points(std::size_t side) {
  std::vector<Point2> pts;
  for (std::size_t j = 0; j < side; ++j)
    for (std::size_t i = 0; i < side; ++i)
      pts.push_back({(static_cast<double>(i) + 0.5) / static_cast<double>(side),
                     (static_cast<double>(j) + 0.5) / static_cast<double>(side)});
  return pts;
}

}  // namespace nesa::testing
