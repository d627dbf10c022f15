#include <algorithm>

#include <gtest/gtest.h>

#include "prognoses/fusion.hpp"
#include "test_support.hpp"

using namespace prognoses;

namespace {

PerView<std::span<const double>> spans(const PerView<std::vector<double>>& v) {
  PerView<std::span<const double>> out;
  for (std::size_t i = 0; i < kNumViews; ++i) out[i] = v[i];
  return out;
}

}  // namespace

TEST(FuseFeatures, IdenticalViewsAreIdempotent) {
  PerView<std::vector<double>> v;
  v.fill({0.5, -1.0, 2.0});
  EXPECT_EQ(*fuse_features(spans(v), FeatureFusion::Average), v[0]);
  EXPECT_EQ(*fuse_features(spans(v), FeatureFusion::Max), v[0]);
}

TEST(FuseFeatures, ElementwiseMax) {
  PerView<std::vector<double>> v;
  v.fill({0, 0});
  v[view_index(ViewId::L1)] = {1, 0};
  v[view_index(ViewId::L2)] = {0, 2};
  EXPECT_EQ(*fuse_features(spans(v), FeatureFusion::Max), (std::vector<double>{1, 2}));
}

TEST(FuseFeatures, ConcatenateSix512) {
  PerView<std::vector<double>> v;
  for (std::size_t i = 0; i < kNumViews; ++i) v[i].assign(512, static_cast<double>(i));
  const auto out = *fuse_features(spans(v), FeatureFusion::Concatenate);
  ASSERT_EQ(out.size(), 3072u);
  for (std::size_t b = 0; b < kNumViews; ++b) EXPECT_EQ(out[b * 512 + 7], static_cast<double>(b));
  EXPECT_EQ(fused_dim(512, 6, FeatureFusion::Concatenate), 3072u);
}

TEST(FuseFeatures, BruteForceOnRandomSets) {
  Rng rng(21);
  for (int t = 0; t < 100; ++t) {
    PerView<std::vector<double>> v;
    for (auto& x : v) {
      x.resize(9);
      for (auto& e : x) e = rng.normal();
    }
    const auto avg = *fuse_features(spans(v), FeatureFusion::Average);
    const auto mx = *fuse_features(spans(v), FeatureFusion::Max);
    const auto cat = *fuse_features(spans(v), FeatureFusion::Concatenate);
    for (std::size_t j = 0; j < 9; ++j) {
      double s = 0, m = -1e300;
      for (std::size_t k = 0; k < kNumViews; ++k) {
        s += v[k][j];
        m = std::max(m, v[k][j]);
      }
      ASSERT_NEAR(avg[j], s / 6.0, 1e-12);
      ASSERT_EQ(mx[j], m);
      for (std::size_t k = 0; k < kNumViews; ++k) ASSERT_EQ(cat[k * 9 + j], v[k][j]);
    }
  }
}

TEST(FuseFeatures, AverageAndMaxArePermutationInvariant) {
  Rng rng(2);
  PerView<std::vector<double>> v;
  for (auto& x : v) {
    x.resize(5);
    for (auto& e : x) e = rng.normal() * 1e6;
  }
  const auto avg = *fuse_features(spans(v), FeatureFusion::Average);
  const auto mx = *fuse_features(spans(v), FeatureFusion::Max);
  std::array<std::size_t, 6> perm = {0, 1, 2, 3, 4, 5};
  for (int t = 0; t < 30; ++t) {
    rng.shuffle(std::span<std::size_t>(perm));
    PerView<std::vector<double>> w;
    for (std::size_t i = 0; i < kNumViews; ++i) w[i] = v[perm[i]];
    EXPECT_EQ(*fuse_features(spans(w), FeatureFusion::Average), avg);
    EXPECT_EQ(*fuse_features(spans(w), FeatureFusion::Max), mx);
  }
}

TEST(FuseFeatures, MissingViewPolicies) {
  PerView<std::vector<double>> v;
  v.fill({2.0, 4.0});
  v[view_index(ViewId::R1)].clear();
  EXPECT_FALSE(fuse_features(spans(v), FeatureFusion::Average, MissingViewPolicy::Skip));
  EXPECT_EQ(*fuse_features(spans(v), FeatureFusion::Average, MissingViewPolicy::ZeroImpute),
            (std::vector<double>{2.0, 4.0}));
  const auto cat = *fuse_features(spans(v), FeatureFusion::Concatenate, MissingViewPolicy::ZeroImpute);
  ASSERT_EQ(cat.size(), 12u);
  EXPECT_EQ(cat[6], 0.0);
  EXPECT_EQ(cat[7], 0.0);
  PerView<std::vector<double>> none;
  EXPECT_THROW(fuse_features(spans(none), FeatureFusion::Max, MissingViewPolicy::ZeroImpute), std::invalid_argument);
}

TEST(FuseDecisions, TiedVoteWithMeanAtThresholdIsNegative) {
  const std::vector<double> p = {0.9, 0.9, 0.9, 0.1, 0.1, 0.1};
  const auto d = fuse_decisions(p, DecisionFusion::MaxVotes);
  EXPECT_FALSE(d.label);
  EXPECT_DOUBLE_EQ(d.proba, 0.5);
}

TEST(FuseDecisions, ConstantAverage) {
  const std::vector<double> p(6, 0.7);
  const auto d = fuse_decisions(p, DecisionFusion::AverageProba);
  EXPECT_TRUE(d.label);
  EXPECT_NEAR(d.proba, 0.7, 1e-15);
}

TEST(FuseDecisions, VoteFraction) {
  const std::vector<double> p = {0.6, 0.6, 0.6, 0.6, 0.4, 0.4};
  const auto d = fuse_decisions(p, DecisionFusion::MaxVotes);
  EXPECT_TRUE(d.label);
  EXPECT_DOUBLE_EQ(d.proba, 4.0 / 6.0);
}

TEST(FuseDecisions, TieBrokenByMean) {
  const std::vector<double> p = {0.9, 0.9, 0.9, 0.4, 0.4, 0.4};
  EXPECT_TRUE(fuse_decisions(p, DecisionFusion::MaxVotes).label);
}

TEST(FuseDecisions, Errors) {
  EXPECT_THROW(fuse_decisions(std::vector<double>{}, DecisionFusion::AverageProba), std::invalid_argument);
  EXPECT_THROW(fuse_decisions(std::vector<double>{1.5}, DecisionFusion::AverageProba), std::invalid_argument);
}

TEST(FuseDecisions, AverageIsPermutationInvariant) {
  std::vector<double> p = {0.11, 0.93, 0.47, 0.5, 0.02, 0.77};
  const auto base = fuse_decisions(p, DecisionFusion::AverageProba);
  std::sort(p.begin(), p.end());
  do {
    const auto d = fuse_decisions(p, DecisionFusion::AverageProba);
    ASSERT_EQ(d.proba, base.proba);
    ASSERT_EQ(d.label, base.label);
  } while (std::next_permutation(p.begin(), p.end()));
}

namespace {

std::vector<DayPairSample> view_samples(ViewId v, int n, double offset) {
  std::vector<DayPairSample> out;
  for (int i = 0; i < n; ++i)
    out.push_back({"P" + std::to_string(i), v, 1, 2, {offset + i}, i % 3 == 0});
  return out;
}

}  // namespace

TEST(CrossLung, DisabledIsIdentity) {
  const auto s = view_samples(ViewId::L3, 5, 0);
  EXPECT_EQ(cross_lung_expand(s, ViewId::L3, false), s);
}

TEST(CrossLung, UnionCount) {
  auto s = view_samples(ViewId::L3, 20, 0);
  const auto r = view_samples(ViewId::R3, 20, 100);
  s.insert(s.end(), r.begin(), r.end());
  const auto out = cross_lung_expand(s, ViewId::L3, true);
  EXPECT_EQ(out.size(), 40u);
  for (const auto& x : out) EXPECT_EQ(x.view, ViewId::L3);
}

TEST(CrossLung, MirrorExpansionsShareFeatureMultiset) {
  auto s = view_samples(ViewId::L2, 7, 0);
  const auto r = view_samples(ViewId::R2, 9, 50);
  s.insert(s.end(), r.begin(), r.end());
  auto vectors = [](const std::vector<DayPairSample>& xs) {
    std::vector<std::vector<double>> out;
    for (const auto& x : xs) out.push_back(x.vector);
    std::sort(out.begin(), out.end());
    return out;
  };
  EXPECT_EQ(vectors(cross_lung_expand(s, ViewId::L2, true)), vectors(cross_lung_expand(s, ViewId::R2, true)));
}

TEST(CrossLung, RejectsFusedSamples) {
  std::vector<DayPairSample> s = {{"P", std::nullopt, 1, 2, {0.0}, false}};
  EXPECT_THROW(cross_lung_expand(s, ViewId::L1, true), std::invalid_argument);
}

TEST(MultiViewPairs, SkipPolicyDropsIncompletePairs) {
  auto c = prognoses::testing::random_cohort(3, 1, {1, 2}, 4);
  std::vector<ClipRecord> rs;
  for (const auto& r : c.records())
    if (!(r.patient_id == "P100" && r.view == ViewId::R3 && r.day == 2)) rs.push_back(r);
  const Cohort cut(rs, c.outcomes(), FeatureSource::Biomarker);
  const auto pairs = build_multiview_pairs(cut, kAllViews, DayPairPolicy::FirstPair, TemporalMode::Difference,
                                           cut.patients());
  ASSERT_EQ(pairs.size(), 3u);
  std::vector<std::string> warnings;
  const auto skip = build_fused_samples(pairs, kAllViews, FeatureFusion::Concatenate, MissingViewPolicy::Skip, &warnings);
  EXPECT_EQ(skip.size(), 2u);
  EXPECT_EQ(warnings.size(), 1u);
  const auto imp = build_fused_samples(pairs, kAllViews, FeatureFusion::Concatenate, MissingViewPolicy::ZeroImpute);
  EXPECT_EQ(imp.size(), 3u);
  EXPECT_EQ(imp[0].vector.size(), 6u * 38u);
}
