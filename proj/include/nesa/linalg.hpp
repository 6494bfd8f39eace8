#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "nesa/geometry.hpp"

namespace nesa {

using Vector = std::vector<double>;

/// Dense matrix, column-major contiguous storage.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[j * rows_ + i]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[j * rows_ + i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<const double> column(std::size_t j) const {
    return std::span<const double>(data_).subspan(j * rows_, rows_);
  }

  DenseMatrix transpose() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t j = 0; j < cols_; ++j)
      for (std::size_t i = 0; i < rows_; ++i) t(j, i) = (*this)(i, j);
    return t;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// -log|a - b|, or 0 on the diagonal of a same-set matrix.
inline double kernel_eval(Point2 a, Point2 b, bool same_index = false) {
  if (same_index) return 0.0;
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double r2 = dx * dx + dy * dy;
  if (r2 == 0.0) throw std::domain_error("kernel_eval: coincident points");
  return -0.5 * std::log(r2);
}

/// Entry (i, j) = kernel_eval(targets[i], sources[j]). With `same_set`, targets and
/// sources are the same indexed set and the diagonal is zero.
inline DenseMatrix kernel_matrix(std::span<const Point2> targets, std::span<const Point2> sources,
                                 bool same_set = false) {
  if (same_set && targets.size() != sources.size()) {
    throw std::invalid_argument("kernel_matrix: same_set requires equal sizes");
  }
  DenseMatrix k(targets.size(), sources.size());
  for (std::size_t j = 0; j < sources.size(); ++j)
    for (std::size_t i = 0; i < targets.size(); ++i)
      k(i, j) = kernel_eval(targets[i], sources[j], same_set && i == j);
  return k;
}

/// y <- A x, or y <- y + A x with `accumulate`.
inline void gemv(const DenseMatrix& a, std::span<const double> x, std::span<double> y,
                 bool accumulate) {
  if (x.size() != a.cols() || y.size() != a.rows()) {
    throw std::invalid_argument("gemv: dimension mismatch");
  }
  if (!accumulate) std::fill(y.begin(), y.end(), 0.0);
  const std::size_t m = a.rows();
  const double* col = a.data().data();
  double* out = y.data();
  for (std::size_t j = 0; j < a.cols(); ++j, col += m) {
    const double xj = x[j];
    for (std::size_t i = 0; i < m; ++i) out[i] += col[i] * xj;
  }
}

inline Vector gemv(const DenseMatrix& a, std::span<const double> x) {
  Vector y(a.rows(), 0.0);
  gemv(a, x, y, true);
  return y;
}

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: dimension mismatch");
  DenseMatrix c(a.rows(), b.cols());
  using Map = Eigen::Map<Eigen::MatrixXd>;
  using CMap = Eigen::Map<const Eigen::MatrixXd>;
  Map(c.data().data(), c.rows(), c.cols()).noalias() =
      CMap(a.data().data(), a.rows(), a.cols()) * CMap(b.data().data(), b.rows(), b.cols());
  return c;
}

/// Moore-Penrose pseudoinverse; singular values below rel_cutoff * sigma_max are dropped.
inline DenseMatrix pinv(const DenseMatrix& a, double rel_cutoff = 1e-12) {
  if (!(rel_cutoff > 0.0 && rel_cutoff < 1.0)) {
    throw std::invalid_argument("pinv: rel_cutoff must lie in (0, 1)");
  }
  DenseMatrix result(a.cols(), a.rows());
  if (a.empty()) return result;

  Eigen::Map<const Eigen::MatrixXd> src(a.data().data(), a.rows(), a.cols());
  Eigen::BDCSVD<Eigen::MatrixXd> svd(src, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sigma = svd.singularValues();
  if (sigma.size() == 0 || sigma(0) == 0.0) return result;

  const double threshold = rel_cutoff * sigma(0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sigma.size());
  for (Eigen::Index k = 0; k < sigma.size(); ++k)
    if (sigma(k) > threshold) inv(k) = 1.0 / sigma(k);

  Eigen::Map<Eigen::MatrixXd>(result.data().data(), a.cols(), a.rows()).noalias() =
      svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  return result;
}

/// `count` points uniformly spaced in angle, counter-clockwise from angle 0.
inline std::vector<Point2> circle_points(Point2 center, double radius, std::size_t count) {
  if (!(radius > 0.0)) throw std::invalid_argument("circle_points: radius must be > 0");
  if (count < 3) throw std::invalid_argument("circle_points: count must be >= 3");
  std::vector<Point2> points(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(count);
    points[k] = {center.x + radius * std::cos(theta), center.y + radius * std::sin(theta)};
  }
  return points;
}

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double frobenius_norm(const DenseMatrix& a) { return norm2(a.data()); }

/// ||a - b||_2 / ||b||_2 (absolute difference norm when b is zero).
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("relative_error: size mismatch");
  double diff = 0.0;
  double ref = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    ref += b[i] * b[i];
  }
  return ref > 0.0 ? std::sqrt(diff / ref) : std::sqrt(diff);
}

}  // namespace nesa
