#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "prognoses/core/rng.hpp"
#include "prognoses/learners/common.hpp"
#include "prognoses/learners/decision_tree.hpp"

namespace prognoses {

struct ForestParams {
  std::size_t n_trees = 100;
  std::size_t min_samples_leaf = 1;
};

/// Bagged CART trees: n-of-n bootstrap per tree, floor(sqrt(d)) candidate
/// features per split, unlimited depth. Tree t is seeded by (seed, t).
class RandomForest {
public:
  RandomForest() = default;
  explicit RandomForest(std::vector<DecisionTree> trees) : trees_(std::move(trees)) {}

  static std::size_t mtry(std::size_t d) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d)))));
  }

  static RandomForest fit(const Matrix& x, std::span<const std::uint8_t> y, const ForestParams& params,
                          std::uint64_t seed) {
    if (params.n_trees == 0) throw std::invalid_argument("RandomForest: n_trees must be positive");
    const auto n = static_cast<std::size_t>(x.rows());
    TreeParams tp;
    tp.max_depth = -1;
    tp.min_samples_leaf = params.min_samples_leaf;
    tp.max_features = mtry(static_cast<std::size_t>(x.cols()));

    std::vector<DecisionTree> trees;
    trees.reserve(params.n_trees);
    for (std::size_t t = 0; t < params.n_trees; ++t) {
      Rng rng(derive_seed(seed, {t}));
      std::vector<std::size_t> sample(n);
      for (auto& s : sample) s = static_cast<std::size_t>(rng.index(n));
      trees.push_back(DecisionTree::fit(x, y, std::move(sample), tp, &rng));
    }
    return RandomForest(std::move(trees));
  }

  std::vector<double> predict(const Matrix& x) const {
    std::vector<double> out(static_cast<std::size_t>(x.rows()), 0.0);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double sum = 0.0;
      for (const auto& t : trees_) sum += t.predict(x.row(i));
      out[static_cast<std::size_t>(i)] = sum / static_cast<double>(trees_.size());
    }
    return out;
  }

  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }

  friend bool operator==(const RandomForest&, const RandomForest&) = default;

private:
  std::vector<DecisionTree> trees_;
};

}  // namespace prognoses
