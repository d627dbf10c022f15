#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace prognoses {

/// Rows are samples, columns are features.
using Matrix = Eigen::MatrixXd;

/// Binary labels stored as 0/1 bytes.
using Labels = std::vector<std::uint8_t>;

inline Matrix to_matrix(std::span<const std::vector<double>> rows) {
  if (rows.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw std::invalid_argument("ragged feature rows");
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

/// Per-feature centering and scaling fit on training rows only. Constant
/// features get scale 1.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer fit(const Matrix& x) {
    Standardizer s;
    const auto n = x.rows();
    const auto d = x.cols();
    s.mean = Eigen::VectorXd::Zero(d);
    s.scale = Eigen::VectorXd::Ones(d);
    if (n == 0) return s;
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto col = x.col(j);
      if (col.minCoeff() == col.maxCoeff()) {
        s.mean(j) = col(0);
        continue;
      }
      double sum = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) sum += col(i);
      const double m = sum / static_cast<double>(n);
      double ss = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) ss += (col(i) - m) * (col(i) - m);
      const double sd = std::sqrt(ss / static_cast<double>(n));
      s.mean(j) = m;
      s.scale(j) = sd > 0.0 ? sd : 1.0;
    }
    return s;
  }

  Matrix apply(const Matrix& x) const {
    if (x.cols() != mean.size())
      throw std::invalid_argument("dimension mismatch: model expects " + std::to_string(mean.size()) +
                                  " features, got " + std::to_string(x.cols()));
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      for (Eigen::Index i = 0; i < x.rows(); ++i) out(i, j) = (x(i, j) - mean(j)) / scale(j);
    return out;
  }
};

/// Per-sample weights normalized to mean 1; inverse class frequency when
/// `balanced`, otherwise all ones.
inline std::vector<double> class_weights(std::span<const std::uint8_t> y, bool balanced) {
  std::vector<double> w(y.size(), 1.0);
  if (!balanced || y.empty()) return w;
  std::size_t pos = 0;
  for (auto v : y) pos += v != 0;
  const std::size_t neg = y.size() - pos;
  const double n = static_cast<double>(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const std::size_t count = y[i] ? pos : neg;
    w[i] = n / (2.0 * static_cast<double>(count));
  }
  return w;
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace prognoses
