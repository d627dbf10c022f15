#pragma once

// CART classification tree with Gini impurity. Split search is exhaustive
// over midpoints of consecutive distinct values; candidate splits are compared
// in exact integer arithmetic, so ties resolve to the lowest feature index and
// then the lowest threshold.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "prognoses/core/rng.hpp"
#include "prognoses/learners/common.hpp"

namespace prognoses {

struct TreeParams {
  int max_depth = -1;  ///< -1: unlimited
  std::size_t min_samples_leaf = 1;
  std::size_t max_features = 0;  ///< features drawn per split; 0: all
};

struct TreeNode {
  int feature = -1;  ///< -1 for leaves
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  ///< positive-class fraction of the training samples reaching the node
  std::size_t samples = 0;
  /// Weighted Gini decrease contributed by this split (0 for leaves).
  double impurity_decrease = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class DecisionTree {
public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.empty()) throw std::invalid_argument("DecisionTree: no nodes");
    for (const auto& n : nodes_) {
      if (n.is_leaf()) continue;
      const auto size = static_cast<int>(nodes_.size());
      if (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size)
        throw std::invalid_argument("DecisionTree: child index out of range");
    }
  }

  /// Grows a tree on rows `sample` of `x` (repeats allowed, e.g. bootstrap).
  /// `rng` is required when params.max_features limits the candidates.
  static DecisionTree fit(const Matrix& x, std::span<const std::uint8_t> y,
                          std::vector<std::size_t> sample, const TreeParams& params,
                          Rng* rng = nullptr) {
    if (sample.empty()) throw std::invalid_argument("DecisionTree::fit: no samples");
    Builder b{x, y, params, rng, {}};
    b.grow(sample, 0);
    return DecisionTree(std::move(b.nodes));
  }

  static DecisionTree fit(const Matrix& x, std::span<const std::uint8_t> y, const TreeParams& params) {
    std::vector<std::size_t> all(static_cast<std::size_t>(x.rows()));
    std::iota(all.begin(), all.end(), std::size_t{0});
    return fit(x, y, std::move(all), params);
  }

  template <typename Row>
  double predict(const Row& row) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
      const auto& n = nodes_[i];
      i = static_cast<std::size_t>(row(n.feature) <= n.threshold ? n.left : n.right);
    }
    return nodes_[i].value;
  }

  std::vector<double> predict(const Matrix& x) const {
    std::vector<double> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = predict(x.row(i));
    return out;
  }

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

  std::size_t depth() const {
    std::vector<std::size_t> d(nodes_.size(), 0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      best = std::max(best, d[i]);
      if (!nodes_[i].is_leaf()) {
        d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
        d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
      }
    }
    return best;
  }

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

private:
  using Wide = __int128;

  struct Split {
    int feature = -1;
    double threshold = 0.0;
    // Score numerator/denominator: (l0^2+l1^2)/nl + (r0^2+r1^2)/nr.
    Wide num = 0;
    Wide den = 1;
  };

  struct Builder {
    const Matrix& x;
    std::span<const std::uint8_t> y;
    const TreeParams& params;
    Rng* rng;
    std::vector<TreeNode> nodes;

    int grow(std::vector<std::size_t>& sample, int depth) {
      const auto id = static_cast<int>(nodes.size());
      nodes.emplace_back();
      std::size_t pos = 0;
      for (auto i : sample) pos += y[i] != 0;
      const std::size_t n = sample.size();
      nodes[id].samples = n;
      nodes[id].value = static_cast<double>(pos) / static_cast<double>(n);

      const bool pure = pos == 0 || pos == n;
      const bool depth_limited = params.max_depth >= 0 && depth >= params.max_depth;
      if (pure || depth_limited || n < 2 * params.min_samples_leaf) return id;

      const auto split = best_split(sample, pos);
      if (!split) return id;

      std::vector<std::size_t> left, right;
      for (auto i : sample) (x(static_cast<Eigen::Index>(i), split->feature) <= split->threshold ? left : right).push_back(i);

      const double nd = static_cast<double>(n);
      const double parent_gini = 1.0 - (static_cast<double>(pos * pos) + static_cast<double>((n - pos) * (n - pos))) / (nd * nd);
      const double children = 1.0 - static_cast<double>(split->num) / static_cast<double>(split->den) / nd;
      nodes[id].feature = split->feature;
      nodes[id].threshold = split->threshold;
      nodes[id].impurity_decrease = std::max(0.0, nd * (parent_gini - children));

      std::vector<std::size_t>().swap(sample);
      const int l = grow(left, depth + 1);
      const int r = grow(right, depth + 1);
      nodes[id].left = l;
      nodes[id].right = r;
      return id;
    }

    std::vector<int> candidate_features() {
      const auto d = static_cast<std::size_t>(x.cols());
      std::vector<int> f(d);
      std::iota(f.begin(), f.end(), 0);
      if (params.max_features == 0 || params.max_features >= d) return f;
      if (!rng) throw std::invalid_argument("DecisionTree: feature subsampling requires an rng");
      // Partial Fisher-Yates: the first max_features entries are the draw.
      for (std::size_t i = 0; i < params.max_features; ++i) {
        const auto j = i + static_cast<std::size_t>(rng->index(d - i));
        std::swap(f[i], f[j]);
      }
      f.resize(params.max_features);
      std::sort(f.begin(), f.end());
      return f;
    }

    std::optional<Split> best_split(const std::vector<std::size_t>& sample, std::size_t pos) {
      const std::size_t n = sample.size();
      const std::size_t min_leaf = std::max<std::size_t>(1, params.min_samples_leaf);
      std::optional<Split> best;
      std::vector<std::pair<double, std::uint8_t>> column(n);

      for (int f : candidate_features()) {
        for (std::size_t k = 0; k < n; ++k)
          column[k] = {x(static_cast<Eigen::Index>(sample[k]), f), y[sample[k]]};
        std::sort(column.begin(), column.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });

        std::size_t l1 = 0;
        for (std::size_t k = 1; k < n; ++k) {
          l1 += column[k - 1].second != 0;
          if (column[k - 1].first == column[k].first) continue;
          const std::size_t nl = k, nr = n - k;
          if (nl < min_leaf || nr < min_leaf) continue;
          const std::size_t l0 = nl - l1;
          const std::size_t r1 = pos - l1, r0 = nr - r1;
          const Wide a = static_cast<Wide>(l0 * l0 + l1 * l1);
          const Wide b = static_cast<Wide>(r0 * r0 + r1 * r1);
          Split s;
          s.feature = f;
          s.num = a * static_cast<Wide>(nr) + b * static_cast<Wide>(nl);
          s.den = static_cast<Wide>(nl) * static_cast<Wide>(nr);
          if (best && !(s.num * best->den > best->num * s.den)) continue;
          const double lo = column[k - 1].first, hi = column[k].first;
          double mid = lo + (hi - lo) / 2.0;
          if (!(mid < hi)) mid = lo;
          s.threshold = mid;
          best = s;
        }
      }
      return best;
    }
  };

  std::vector<TreeNode> nodes_;
};

}  // namespace prognoses
