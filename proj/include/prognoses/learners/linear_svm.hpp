#pragma once

// Linear SVM: L2-regularized hinge loss minimized by full-batch subgradient
// descent, followed by Platt scaling of the training margins.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "prognoses/learners/common.hpp"

namespace prognoses {

/// p = sigmoid(alpha * margin + beta), fit by 1-d logistic regression against
/// Platt's smoothed targets with damped Newton steps.
struct PlattCalibration {
  double alpha = 1.0;
  double beta = 0.0;

  static constexpr int kNewtonSteps = 100;

  double operator()(double margin) const { return sigmoid(alpha * margin + beta); }

  static PlattCalibration fit(std::span<const double> margins, std::span<const std::uint8_t> y) {
    if (margins.size() != y.size() || margins.empty())
      throw std::invalid_argument("PlattCalibration::fit: bad input sizes");
    double n_pos = 0, n_neg = 0;
    for (auto v : y) (v ? n_pos : n_neg) += 1;
    const double t_pos = (n_pos + 1.0) / (n_pos + 2.0);
    const double t_neg = 1.0 / (n_neg + 2.0);

    auto loss = [&](double a, double b) {
      double l = 0.0;
      for (std::size_t i = 0; i < margins.size(); ++i) {
        const double z = a * margins[i] + b;
        const double t = y[i] ? t_pos : t_neg;
        l += softplus(z) - t * z;
      }
      return l;
    };

    PlattCalibration c{0.0, std::log((n_pos + 1.0) / (n_neg + 1.0))};
    double current = loss(c.alpha, c.beta);
    for (int step = 0; step < kNewtonSteps; ++step) {
      double ga = 0, gb = 0, haa = 0, hab = 0, hbb = 0;
      for (std::size_t i = 0; i < margins.size(); ++i) {
        const double m = margins[i];
        const double p = sigmoid(c.alpha * m + c.beta);
        const double r = p - (y[i] ? t_pos : t_neg);
        const double w = p * (1.0 - p);
        ga += r * m;
        gb += r;
        haa += w * m * m;
        hab += w * m;
        hbb += w;
      }
      if (std::abs(ga) + std::abs(gb) < 1e-12) break;
      haa += 1e-12;
      hbb += 1e-12;
      const double det = haa * hbb - hab * hab;
      double da, db;
      if (det > 1e-300) {
        da = -(hbb * ga - hab * gb) / det;
        db = -(haa * gb - hab * ga) / det;
      } else {
        da = -ga;
        db = -gb;
      }
      double scale = 1.0;
      bool improved = false;
      for (int k = 0; k < 60; ++k, scale *= 0.5) {
        const double l = loss(c.alpha + scale * da, c.beta + scale * db);
        if (l < current) {
          c.alpha += scale * da;
          c.beta += scale * db;
          current = l;
          improved = true;
          break;
        }
      }
      if (!improved) break;
    }
    return c;
  }
};

struct SvmParams {
  double lambda = 1e-2;
  int iterations = 2000;
  double eta0 = 1.0;
  bool balanced = false;
};

class LinearSvm {
public:
  LinearSvm() = default;
  LinearSvm(Eigen::VectorXd weights, double bias, PlattCalibration platt)
      : weights_(std::move(weights)), bias_(bias), platt_(platt) {}

  /// Expects standardized features. Returns the iterate with the lowest
  /// primal objective seen (subgradient steps are not monotone).
  static LinearSvm fit(const Matrix& x, std::span<const std::uint8_t> y, const SvmParams& params) {
    const auto n = x.rows();
    const auto d = x.cols();
    if (n == 0) throw std::invalid_argument("LinearSvm::fit: no samples");
    const auto cw = class_weights(y, params.balanced);
    Eigen::VectorXd sign(n), c(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      sign(i) = y[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
      c(i) = cw[static_cast<std::size_t>(i)];
    }
    const double inv_n = 1.0 / static_cast<double>(n);

    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    double b = 0.0;
    Eigen::VectorXd best_w = w;
    double best_b = b;
    double best_obj = std::numeric_limits<double>::infinity();

    for (int t = 0; t <= params.iterations; ++t) {
      const Eigen::VectorXd margins = (x * w).array() + b;
      double hinge = 0.0;
      Eigen::VectorXd coef = Eigen::VectorXd::Zero(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double slack = 1.0 - sign(i) * margins(i);
        if (slack > 0) {
          hinge += c(i) * slack;
          coef(i) = -c(i) * sign(i) * inv_n;
        }
      }
      const double obj = 0.5 * params.lambda * w.squaredNorm() + hinge * inv_n;
      if (obj < best_obj) {
        best_obj = obj;
        best_w = w;
        best_b = b;
      }
      if (t == params.iterations) break;
      const double eta = params.eta0 / (1.0 + params.lambda * static_cast<double>(t));
      const Eigen::VectorXd gw = params.lambda * w + x.transpose() * coef;
      const double gb = coef.sum();
      w -= eta * gw;
      b -= eta * gb;
    }

    const Eigen::VectorXd margins = (x * best_w).array() + best_b;
    const std::vector<double> m(margins.data(), margins.data() + margins.size());
    return LinearSvm(best_w, best_b, PlattCalibration::fit(m, y));
  }

  std::vector<double> decision(const Matrix& x) const {
    const Eigen::VectorXd m = (x * weights_).array() + bias_;
    return {m.data(), m.data() + m.size()};
  }

  std::vector<double> predict(const Matrix& x) const {
    auto m = decision(x);
    for (double& v : m) v = platt_(v);
    return m;
  }

  const Eigen::VectorXd& weights() const noexcept { return weights_; }
  double bias() const noexcept { return bias_; }
  const PlattCalibration& calibration() const noexcept { return platt_; }

private:
  Eigen::VectorXd weights_;
  double bias_ = 0.0;
  PlattCalibration platt_;
};

}  // namespace prognoses
