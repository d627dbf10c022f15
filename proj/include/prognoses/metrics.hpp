#pragma once

// Support-weighted binary F1 and percentile bootstrap confidence intervals.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "prognoses/core/rng.hpp"

namespace prognoses {

struct BinaryConfusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  static BinaryConfusion of(std::span<const std::uint8_t> y_true, std::span<const std::uint8_t> y_pred) {
    if (y_true.size() != y_pred.size()) throw std::invalid_argument("length mismatch between y_true and y_pred");
    BinaryConfusion c;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      const bool t = y_true[i] != 0, p = y_pred[i] != 0;
      if (t && p) ++c.tp;
      else if (!t && p) ++c.fp;
      else if (!t && !p) ++c.tn;
      else ++c.fn;
    }
    return c;
  }

  std::size_t total() const noexcept { return tp + fp + tn + fn; }

  /// F1 of the positive (or, with `positive=false`, the negative) class;
  /// 0 when precision or recall is 0/0.
  double f1(bool positive) const noexcept {
    const std::size_t hit = positive ? tp : tn;
    const std::size_t miss = fp + fn;
    if (hit == 0) return 0.0;
    return 2.0 * static_cast<double>(hit) / static_cast<double>(2 * hit + miss);
  }

  double weighted_f1() const {
    const std::size_t n = total();
    if (n == 0) throw std::invalid_argument("weighted_f1: empty input");
    const double pos = static_cast<double>(tp + fn), neg = static_cast<double>(tn + fp);
    return (pos * f1(true) + neg * f1(false)) / static_cast<double>(n);
  }
};

inline double weighted_f1(std::span<const std::uint8_t> y_true, std::span<const std::uint8_t> y_pred) {
  if (y_true.empty()) throw std::invalid_argument("weighted_f1: empty input");
  return BinaryConfusion::of(y_true, y_pred).weighted_f1();
}

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Empirical quantile with linear interpolation between order statistics
/// (position q * (n - 1)).
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile: empty input");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

struct BootstrapOptions {
  int iterations = 2000;
  double lower = 0.025;
  double upper = 0.975;
  std::uint64_t seed = 0;
};

/// Percentile bootstrap of weighted F1 over prediction samples. Each
/// resample draws n samples with replacement.
inline ConfidenceInterval bootstrap_ci(std::span<const std::uint8_t> y_true, std::span<const std::uint8_t> y_pred,
                                       const BootstrapOptions& opt = {}) {
  if (y_true.size() != y_pred.size()) throw std::invalid_argument("bootstrap_ci: length mismatch");
  if (y_true.empty()) throw std::invalid_argument("bootstrap_ci: empty input");
  const std::size_t n = y_true.size();
  Rng rng(opt.seed);
  std::vector<double> stats;
  stats.reserve(static_cast<std::size_t>(opt.iterations));
  for (int it = 0; it < opt.iterations; ++it) {
    BinaryConfusion c;
    for (std::size_t k = 0; k < n; ++k) {
      const auto i = static_cast<std::size_t>(rng.index(n));
      const bool t = y_true[i] != 0, p = y_pred[i] != 0;
      if (t && p) ++c.tp;
      else if (!t && p) ++c.fp;
      else if (!t && !p) ++c.tn;
      else ++c.fn;
    }
    stats.push_back(c.weighted_f1());
  }
  return {percentile(stats, opt.lower), percentile(stats, opt.upper)};
}

/// Cluster (patient-level) variant: resamples whole clusters with
/// replacement, keeping all predictions of each drawn cluster.
inline ConfidenceInterval bootstrap_ci_clustered(std::span<const std::uint8_t> y_true,
                                                 std::span<const std::uint8_t> y_pred,
                                                 std::span<const std::string> cluster,
                                                 const BootstrapOptions& opt = {}) {
  if (y_true.size() != y_pred.size() || y_true.size() != cluster.size())
    throw std::invalid_argument("bootstrap_ci_clustered: length mismatch");
  if (y_true.empty()) throw std::invalid_argument("bootstrap_ci_clustered: empty input");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < cluster.size(); ++i) groups[cluster[i]].push_back(i);
  std::vector<const std::vector<std::size_t>*> members;
  for (const auto& [id, idx] : groups) members.push_back(&idx);

  Rng rng(opt.seed);
  std::vector<double> stats;
  for (int it = 0; it < opt.iterations; ++it) {
    BinaryConfusion c;
    for (std::size_t k = 0; k < members.size(); ++k) {
      for (auto i : *members[static_cast<std::size_t>(rng.index(members.size()))]) {
        const bool t = y_true[i] != 0, p = y_pred[i] != 0;
        if (t && p) ++c.tp;
        else if (!t && p) ++c.fp;
        else if (!t && !p) ++c.tn;
        else ++c.fn;
      }
    }
    stats.push_back(c.weighted_f1());
  }
  return {percentile(stats, opt.lower), percentile(stats, opt.upper)};
}

}  // namespace prognoses
