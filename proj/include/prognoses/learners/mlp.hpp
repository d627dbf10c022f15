#pragma once

// Fully connected ReLU network with a single logistic output, trained by
// full-batch gradient descent with momentum on mean cross-entropy plus an L2
// penalty on weights (biases unpenalized).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/QR>

#include "prognoses/core/rng.hpp"
#include "prognoses/learners/common.hpp"

namespace prognoses {

struct MlpLayer {
  Eigen::MatrixXd weights;  ///< fan_in x fan_out
  Eigen::VectorXd bias;     ///< fan_out
};

struct MlpParams {
  std::vector<MlpLayer> layers;

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
  }

  /// Layer by layer: weights (column-major), then bias.
  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(size());
    for (const auto& l : layers) {
      out.insert(out.end(), l.weights.data(), l.weights.data() + l.weights.size());
      out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
    }
    return out;
  }

  void unflatten(std::span<const double> flat) {
    if (flat.size() != size()) throw std::invalid_argument("MlpParams::unflatten: size mismatch");
    std::size_t k = 0;
    for (auto& l : layers) {
      for (Eigen::Index i = 0; i < l.weights.size(); ++i) l.weights.data()[i] = flat[k++];
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = flat[k++];
    }
  }

  MlpParams zeros_like() const {
    MlpParams z;
    for (const auto& l : layers)
      z.layers.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                          Eigen::VectorXd::Zero(l.bias.size())});
    return z;
  }

  /// this += scale * other
  void axpy(double scale, const MlpParams& other) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].weights += scale * other.layers[i].weights;
      layers[i].bias += scale * other.layers[i].bias;
    }
  }

  void scale(double s) {
    for (auto& l : layers) {
      l.weights *= s;
      l.bias *= s;
    }
  }
};

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
inline MlpParams init_mlp(std::size_t input_dim, std::span<const std::size_t> hidden, std::uint64_t seed) {
  Rng rng(seed);
  MlpParams p;
  std::size_t fan_in = input_dim;
  auto add = [&](std::size_t fan_out) {
    const double r = 1.0 / std::sqrt(static_cast<double>(fan_in));
    MlpLayer l{Eigen::MatrixXd(fan_in, fan_out), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fan_out))};
    for (Eigen::Index i = 0; i < l.weights.size(); ++i) l.weights.data()[i] = rng.uniform(-r, r);
    p.layers.push_back(std::move(l));
    fan_in = fan_out;
  };
  for (auto h : hidden) add(h);
  add(1);
  return p;
}

/// Positive-class probabilities for each row of x.
inline Eigen::VectorXd mlp_forward(const MlpParams& p, const Matrix& x) {
  Matrix a = x;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    Matrix z = a * p.layers[l].weights;
    z.rowwise() += p.layers[l].bias.transpose();
    if (l + 1 < p.layers.size())
      a = z.cwiseMax(0.0);
    else
      a = std::move(z);
  }
  Eigen::VectorXd out(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) out(i) = sigmoid(a(i, 0));
  return out;
}

struct MlpGradient {
  double loss = 0.0;
  MlpParams grad;
};

/// Loss = sum_i w_i * CE_i / sum_i w_i + (l2 / 2) * sum ||W||^2 and its
/// analytic gradient. Empty `weights` means uniform; an empty batch (or zero
/// total weight) contributes no data term.
inline MlpGradient mlp_gradient(const MlpParams& p, const Matrix& x, std::span<const std::uint8_t> y,
                                std::span<const double> weights, double l2) {
  const auto n = x.rows();
  const std::size_t L = p.layers.size();
  MlpGradient g{0.0, p.zeros_like()};

  for (const auto& l : p.layers) g.loss += 0.5 * l2 * l.weights.squaredNorm();
  for (std::size_t l = 0; l < L; ++l) g.grad.layers[l].weights = l2 * p.layers[l].weights;

  double total_w = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) total_w += weights.empty() ? 1.0 : weights[static_cast<std::size_t>(i)];
  if (n == 0 || total_w <= 0.0) return g;

  // Forward, keeping pre-activations.
  std::vector<Matrix> acts;  // acts[l] = input to layer l
  std::vector<Matrix> pre;   // pre[l] = layer l pre-activation
  acts.push_back(x);
  for (std::size_t l = 0; l < L; ++l) {
    Matrix z = acts.back() * p.layers[l].weights;
    z.rowwise() += p.layers[l].bias.transpose();
    pre.push_back(z);
    if (l + 1 < L) acts.push_back(z.cwiseMax(0.0));
  }

  Matrix delta(n, 1);
  double data_loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = weights.empty() ? 1.0 : weights[static_cast<std::size_t>(i)];
    const double z = pre.back()(i, 0);
    const double t = y[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    data_loss += w * (softplus(z) - t * z);
    delta(i, 0) = w * (sigmoid(z) - t) / total_w;
  }
  g.loss += data_loss / total_w;

  for (std::size_t l = L; l-- > 0;) {
    g.grad.layers[l].weights.noalias() += acts[l].transpose() * delta;
    g.grad.layers[l].bias = delta.colwise().sum().transpose();
    if (l == 0) break;
    Matrix back = delta * p.layers[l].weights.transpose();
    const Matrix& z = pre[l - 1];
    for (Eigen::Index i = 0; i < back.size(); ++i)
      if (!(z.data()[i] > 0.0)) back.data()[i] = 0.0;
    delta = std::move(back);
  }
  return g;
}

struct MlpTrainOptions {
  std::vector<std::size_t> hidden = {64};
  double learning_rate = 1e-2;
  double l2 = 0.0;
  double momentum = 0.9;
  int max_epochs = 500;
  bool balanced = false;
  /// Training stops after `patience` consecutive epochs that fail to improve
  /// the best loss by more than `tolerance`.
  double tolerance = 1e-4;
  int patience = 10;
};

struct MlpTrace {
  std::vector<double> losses;  ///< loss after each accepted epoch, starting with the initial loss
  int halvings = 0;
};

class Mlp {
public:
  Mlp() = default;
  explicit Mlp(MlpParams params) : params_(std::move(params)) {}

  /// Expects standardized features. An epoch that would increase the loss is
  /// retried with half the step and the velocity reset, so the recorded loss
  /// sequence is non-increasing.
  ///
  /// With fewer rows than columns the first layer is trained in the row space
  /// of x. Its orthogonal complement only sees the L2 decay, so it stays a
  /// scalar multiple of its initial value and is tracked as one number.
  static Mlp fit(const Matrix& x, std::span<const std::uint8_t> y, const MlpTrainOptions& opt,
                 std::uint64_t seed, MlpTrace* trace = nullptr) {
    MlpParams params = init_mlp(static_cast<std::size_t>(x.cols()), opt.hidden, seed);
    if (opt.hidden.empty() || x.rows() >= x.cols()) {
      train(params, x, y, opt, 0.0, trace);
      return Mlp(std::move(params));
    }
    const Eigen::HouseholderQR<Matrix> qr(x.transpose());
    const Matrix q = qr.householderQ() * Matrix::Identity(x.cols(), x.rows());
    const Matrix z = x * q;
    Matrix& w0 = params.layers[0].weights;
    MlpParams reduced = params;
    reduced.layers[0].weights = q.transpose() * w0;
    const Matrix perp = w0 - q * reduced.layers[0].weights;
    const double c = train(reduced, z, y, opt, perp.squaredNorm(), trace);
    params = std::move(reduced);
    params.layers[0].weights = q * params.layers[0].weights + c * perp;
    return Mlp(std::move(params));
  }

  std::vector<double> predict(const Matrix& x) const {
    const Eigen::VectorXd p = mlp_forward(params_, x);
    return {p.data(), p.data() + p.size()};
  }

  const MlpParams& params() const noexcept { return params_; }

private:
  /// Trains in place; `perp_norm2` is the squared norm of a first-layer
  /// component scaled by a free scalar c (initially 1). Returns c.
  static double train(MlpParams& params, const Matrix& x, std::span<const std::uint8_t> y,
                      const MlpTrainOptions& opt, double perp_norm2, MlpTrace* trace) {
    const auto weights = class_weights(y, opt.balanced);
    auto evaluate = [&](const MlpParams& p, double c) {
      MlpGradient g = mlp_gradient(p, x, y, weights, opt.l2);
      g.loss += 0.5 * opt.l2 * c * c * perp_norm2;
      return g;
    };
    double c = 1.0, vc = 0.0;
    MlpGradient current = evaluate(params, c);
    MlpParams velocity = params.zeros_like();
    double lr = opt.learning_rate;
    if (trace) trace->losses.push_back(current.loss);

    constexpr int kMaxHalvings = 40;
    double best = current.loss;
    int stale = 0;
    for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
      bool accepted = false;
      for (int attempt = 0; attempt <= kMaxHalvings; ++attempt) {
        MlpParams step = velocity;
        step.scale(opt.momentum);
        step.axpy(-lr, current.grad);
        const double step_c = opt.momentum * vc - lr * opt.l2 * c;
        MlpParams candidate = params;
        candidate.axpy(1.0, step);
        MlpGradient next = evaluate(candidate, c + step_c);
        if (next.loss <= current.loss) {
          params = std::move(candidate);
          velocity = std::move(step);
          c += step_c;
          vc = step_c;
          current = std::move(next);
          accepted = true;
          if (trace) trace->losses.push_back(current.loss);
          break;
        }
        lr *= 0.5;
        velocity = params.zeros_like();
        vc = 0.0;
        if (trace) ++trace->halvings;
      }
      if (!accepted) break;
      if (current.loss < best - opt.tolerance) {
        best = current.loss;
        stale = 0;
      } else if (++stale >= opt.patience) {
        break;
      }
    }
    return c;
  }

  MlpParams params_;
};

}  // namespace prognoses
