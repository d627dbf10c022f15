#include <cmath>

#include <gtest/gtest.h>

#include "prognoses/learners/common.hpp"
#include "prognoses/metrics.hpp"

using namespace prognoses;

namespace {

// Independent oracle: per-class precision/recall from explicit counting.
double brute_weighted_f1(const Labels& t, const Labels& p) {
  double total = 0.0;
  for (int cls = 0; cls <= 1; ++cls) {
    double support = 0, predicted = 0, correct = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      support += t[i] == cls;
      predicted += p[i] == cls;
      correct += t[i] == cls && p[i] == cls;
    }
    const double precision = predicted > 0 ? correct / predicted : 0.0;
    const double recall = support > 0 ? correct / support : 0.0;
    const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    total += support * f1;
  }
  return total / static_cast<double>(t.size());
}

}  // namespace

TEST(WeightedF1, HandExample) {
  const Labels t = {1, 1, 0, 0, 0}, p = {1, 0, 0, 0, 1};
  EXPECT_NEAR(weighted_f1(t, p), 0.6, 1e-15);
}

TEST(WeightedF1, PerfectAndSingleClass) {
  const Labels t = {1, 0, 1, 1};
  EXPECT_EQ(weighted_f1(t, t), 1.0);
  const Labels z(7, 0);
  EXPECT_EQ(weighted_f1(z, z), 1.0);
}

TEST(WeightedF1, Errors) {
  EXPECT_THROW(weighted_f1(Labels{}, Labels{}), std::invalid_argument);
  EXPECT_THROW(weighted_f1(Labels{1}, Labels{1, 0}), std::invalid_argument);
}

TEST(WeightedF1, MatchesBruteForceOracle) {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = 1 + rng.index(200);
    const double bias = rng.uniform();
    Labels t(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = rng.bernoulli(bias);
      p[i] = rng.bernoulli(0.5);
    }
    ASSERT_NEAR(weighted_f1(t, p), brute_weighted_f1(t, p), 1e-12) << "trial " << trial;
  }
}

TEST(Percentile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4, 5}, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(percentile({0, 10}, 0.25), 2.5);
  EXPECT_DOUBLE_EQ(percentile({7}, 0.975), 7.0);
}

TEST(Bootstrap, DeterministicPerSeed) {
  Rng rng(1);
  Labels t(60), p(60);
  for (std::size_t i = 0; i < 60; ++i) {
    t[i] = rng.bernoulli(0.3);
    p[i] = rng.bernoulli(0.4);
  }
  const auto a = bootstrap_ci(t, p, {2000, 0.025, 0.975, 9});
  const auto b = bootstrap_ci(t, p, {2000, 0.025, 0.975, 9});
  const auto c = bootstrap_ci(t, p, {2000, 0.025, 0.975, 10});
  EXPECT_EQ(a.lo, b.lo);
  EXPECT_EQ(a.hi, b.hi);
  EXPECT_LE(a.lo, a.hi);
  EXPECT_TRUE(a.lo != c.lo || a.hi != c.hi);
}

TEST(Bootstrap, AllCorrectGivesOne) {
  const Labels t = {1, 0, 0, 1, 0, 0, 0};
  const auto ci = bootstrap_ci(t, t);
  EXPECT_EQ(ci.lo, 1.0);
  EXPECT_EQ(ci.hi, 1.0);
}

TEST(Bootstrap, SingletonIsItsOwnMetric) {
  const auto ci = bootstrap_ci(Labels{1}, Labels{0});
  EXPECT_EQ(ci.lo, 0.0);
  EXPECT_EQ(ci.hi, 0.0);
  const auto ok = bootstrap_ci(Labels{0}, Labels{0});
  EXPECT_EQ(ok.lo, 1.0);
}

TEST(Bootstrap, EmptyRejected) { EXPECT_THROW(bootstrap_ci(Labels{}, Labels{}), std::invalid_argument); }

TEST(Bootstrap, ClusteredAllCorrect) {
  const Labels t = {1, 1, 0, 0};
  const std::vector<std::string> ids = {"a", "a", "b", "c"};
  const auto ci = bootstrap_ci_clustered(t, t, ids);
  EXPECT_EQ(ci.lo, 1.0);
  EXPECT_EQ(ci.hi, 1.0);
}
