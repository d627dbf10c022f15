#include <algorithm>
#include <map>

#include <gtest/gtest.h>

#include "prognoses/evaluation.hpp"
#include "prognoses/synthcohort.hpp"
#include "test_support.hpp"

using namespace prognoses;

namespace {

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("P" + std::to_string(1000 + i));
  return out;
}

Cohort easy_cohort(std::uint64_t seed, std::vector<int> days = {1, 2}) {
  auto p = GeneratorParams::easy(seed);
  p.days = std::move(days);
  return generate(p).cohort;
}

ExperimentConfig tree_config(std::uint64_t seed) {
  ExperimentConfig c;
  c.classifier = ClassifierKind::DecisionTree;
  c.grid.axes = {{"max_depth", {2, 4}}, {"min_samples_leaf", {1, 3}}};
  c.bootstrap_iterations = 200;
  c.seed = seed;
  return c;
}

std::multiset<std::string> prediction_keys(const EvaluationReport& r) {
  std::multiset<std::string> out;
  for (const auto& p : r.predictions)
    out.insert(p.patient_id + "/" + p.view + "/" + std::to_string(p.day_a) + "-" + std::to_string(p.day_b));
  return out;
}

}  // namespace

TEST(OuterFolds, ThirtyPatientsNinePositive) {
  const auto p = ids(30);
  Labels y(30, 0);
  std::fill(y.begin(), y.begin() + 9, 1);
  const auto plan = make_outer_folds(p, y, 5, 3);
  std::vector<int> pos;
  for (const auto& f : plan.folds) {
    EXPECT_EQ(f.size(), 6u);
    int k = 0;
    for (const auto& id : f) k += y[static_cast<std::size_t>(std::stoi(id.substr(1)) - 1000)];
    pos.push_back(k);
  }
  std::sort(pos.begin(), pos.end());
  EXPECT_EQ(pos, (std::vector<int>{1, 2, 2, 2, 2}));
}

TEST(OuterFolds, FiveSingletons) {
  const auto p = ids(5);
  const Labels y = {1, 0, 1, 0, 0};
  const auto plan = make_outer_folds(p, y, 5, 0);
  for (const auto& f : plan.folds) EXPECT_EQ(f.size(), 1u);
}

TEST(OuterFolds, DeterministicPerSeed) {
  const auto p = ids(30);
  Labels y(30, 0);
  for (std::size_t i = 0; i < 30; i += 3) y[i] = 1;
  EXPECT_EQ(make_outer_folds(p, y, 5, 8).folds, make_outer_folds(p, y, 5, 8).folds);
  EXPECT_NE(make_outer_folds(p, y, 5, 8).folds, make_outer_folds(p, y, 5, 9).folds);
}

TEST(OuterFolds, PartitionAndStratificationProperty) {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 5 + rng.index(60);
    const std::size_t k = 3 + rng.index(3);
    if (k > n) continue;
    const auto p = ids(n);
    Labels y(n);
    for (auto& v : y) v = rng.bernoulli(0.3);
    y[0] = 1;
    y[1] = 0;
    const auto plan = make_outer_folds(p, y, k, t);
    std::map<std::string, int> seen;
    std::size_t lo = n, hi = 0, plo = n, phi = 0;
    for (const auto& f : plan.folds) {
      std::size_t pos = 0;
      for (const auto& id : f) {
        ++seen[id];
        pos += y[static_cast<std::size_t>(std::stoi(id.substr(1)) - 1000)];
      }
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
      plo = std::min(plo, pos);
      phi = std::max(phi, pos);
    }
    ASSERT_EQ(seen.size(), n);
    for (const auto& [id, c] : seen) ASSERT_EQ(c, 1);
    ASSERT_LE(hi - lo, 1u);
    ASSERT_LE(phi - plo, 1u);
    for (std::size_t f = 0; f < k; ++f) {
      const auto train = plan.train_patients(f);
      for (const auto& id : plan.test_patients(f))
        ASSERT_FALSE(std::binary_search(train.begin(), train.end(), id));
    }
  }
}

TEST(OuterFolds, Errors) {
  const auto p = ids(4);
  EXPECT_THROW(make_outer_folds(p, Labels{1, 0, 0, 1}, 5, 0), InputError);
  EXPECT_THROW(make_outer_folds(p, Labels{0, 0, 0, 0}, 2, 0), InputError);
}

TEST(InnerRotations, ThreeTrainOneValidation) {
  const auto p = ids(30);
  Labels y(30, 0);
  std::fill(y.begin(), y.begin() + 9, 1);
  const auto plan = make_outer_folds(p, y, 5, 1);
  for (std::size_t f = 0; f < 5; ++f) {
    ASSERT_EQ(plan.rotations(f), 4u);
    std::set<std::string> validated;
    for (std::size_t r = 0; r < 4; ++r) {
      const auto val = plan.inner_validation(f, r);
      const auto train = plan.inner_train(f, r);
      EXPECT_EQ(val.size(), 6u);
      EXPECT_EQ(train.size(), 18u);
      validated.insert(val.begin(), val.end());
    }
    EXPECT_EQ(validated.size(), 24u);
  }
}

TEST(NestedCv, AuditPassesAndCountsMatch) {
  const auto cohort = easy_cohort(1);
  const auto r = nested_cv(tree_config(1), cohort);
  EXPECT_TRUE(r.audit_result.passed);
  EXPECT_EQ(r.predictions.size(), 30u);
  std::size_t pooled = 0;
  for (const auto& f : r.folds) pooled += f.test_samples;
  EXPECT_EQ(pooled, r.predictions.size());
  EXPECT_LE(r.ci.lo, r.ci.hi);
  std::size_t inner = 0;
  for (const auto& e : r.audit) inner += e.phase == AuditPhase::InnerTrain;
  EXPECT_EQ(inner, 5u * 4u * 4u);
}

TEST(NestedCv, AuditorCatchesInjectedLeak) {
  const auto cohort = easy_cohort(2);
  const auto cfg = tree_config(2);
  auto r = nested_cv(cfg, cohort);
  const auto plan = fold_plan_for(cfg, cohort);
  ASSERT_TRUE(audit_leakage(r, plan).passed);
  auto leaked = r;
  for (auto& e : leaked.audit)
    if (e.outer_fold == 0 && e.phase == AuditPhase::InnerTrain) {
      e.patients.push_back(plan.test_patients(0).front());
      break;
    }
  EXPECT_FALSE(audit_leakage(leaked, plan).passed);
  auto late = r;
  for (auto& e : late.audit)
    if (e.outer_fold == 1 && e.phase == AuditPhase::RefitTrain) e.sequence = late.audit.size() + 10;
  EXPECT_FALSE(audit_leakage(late, plan).passed);
}

TEST(NestedCv, BitReproducibleAcrossJobCounts) {
  const auto cohort = easy_cohort(3);
  auto cfg = tree_config(3);
  cfg.classifier = ClassifierKind::RandomForest;
  cfg.grid.axes = {{"n_trees", {100}}, {"min_samples_leaf", {1, 3}}};
  const auto a = nested_cv(cfg, cohort, 1);
  const auto b = nested_cv(cfg, cohort, 4);
  ASSERT_EQ(a.predictions.size(), b.predictions.size());
  for (std::size_t i = 0; i < a.predictions.size(); ++i) {
    EXPECT_EQ(a.predictions[i].patient_id, b.predictions[i].patient_id);
    EXPECT_EQ(a.predictions[i].proba, b.predictions[i].proba);
  }
  EXPECT_EQ(a.f1, b.f1);
  EXPECT_EQ(a.ci.lo, b.ci.lo);
  EXPECT_EQ(a.ci.hi, b.ci.hi);
  for (std::size_t f = 0; f < a.folds.size(); ++f) EXPECT_EQ(a.folds[f].importance, b.folds[f].importance);
}

TEST(NestedCv, ForestRecordsImportancePerFold) {
  const auto cohort = easy_cohort(4);
  auto cfg = tree_config(4);
  cfg.classifier = ClassifierKind::RandomForest;
  cfg.grid.axes = {{"n_trees", {100}}, {"min_samples_leaf", {3}}};
  const auto r = nested_cv(cfg, cohort);
  for (const auto& f : r.folds) EXPECT_EQ(f.importance.size(), 38u);
}

TEST(NestedCv, ConstantFeaturesGiveMajorityPredictor) {
  std::vector<ClipRecord> rs;
  std::vector<PatientOutcome> outs;
  for (int i = 0; i < 20; ++i) {
    const std::string pid = "Q" + std::to_string(10 + i);
    outs.push_back({pid, i < 6});
    for (int d : {1, 2}) rs.push_back({pid, ViewId::L3, d, FeatureSource::Biomarker, std::vector<double>(38, 0.25)});
  }
  const Cohort cohort(rs, outs, FeatureSource::Biomarker);
  Labels yt(20, 0);
  std::fill(yt.begin(), yt.begin() + 6, 1);
  const double constant = weighted_f1(yt, Labels(20, 0));
  for (auto kind : kAllClassifiers) {
    ExperimentConfig c;
    c.classifier = kind;
    c.bootstrap_iterations = 50;
    if (kind == ClassifierKind::RandomForest) c.grid.axes = {{"n_trees", {100}}, {"min_samples_leaf", {1}}};
    if (kind == ClassifierKind::MLPLarge) c.grid.axes = {{"learning_rate", {1e-2}}, {"l2", {0}}};
    const auto r = nested_cv(c, cohort);
    for (const auto& p : r.predictions) EXPECT_FALSE(p.y_pred) << to_string(kind);
    EXPECT_DOUBLE_EQ(r.f1, constant) << to_string(kind);
  }
}

TEST(NestedCv, CrossLungDoublesTrainingButNotEvaluation) {
  const auto cohort = easy_cohort(5);
  auto off = tree_config(5);
  off.views = {ViewId::R2};
  auto on = off;
  on.cross_lung = true;
  const auto a = nested_cv(off, cohort);
  const auto b = nested_cv(on, cohort);
  EXPECT_EQ(prediction_keys(a), prediction_keys(b));
  for (std::size_t f = 0; f < a.folds.size(); ++f) EXPECT_EQ(b.folds[f].train_samples, 2 * a.folds[f].train_samples);
  EXPECT_TRUE(b.audit_result.passed);
}

TEST(NestedCv, AllViewsConcatenationDimension) {
  const auto cohort = easy_cohort(6);
  auto c = tree_config(6);
  c.views.assign(kAllViews.begin(), kAllViews.end());
  c.feature_fusion = FeatureFusion::Concatenate;
  const auto r = nested_cv(c, cohort);
  EXPECT_EQ(r.evaluation_dim, 6u * 38u);
  EXPECT_EQ(r.predictions.size(), 30u);
  EXPECT_EQ(r.predictions.front().view, "all");
}

TEST(NestedCv, DecisionFusionOnePredictionPerPair) {
  const auto cohort = easy_cohort(7);
  auto c = tree_config(7);
  c.views.assign(kAllViews.begin(), kAllViews.end());
  c.decision_fusion = DecisionFusion::MaxVotes;
  const auto r = nested_cv(c, cohort);
  EXPECT_EQ(r.predictions.size(), 30u);
  for (const auto& p : r.predictions) {
    const double votes = p.proba * 6.0;
    EXPECT_NEAR(votes, std::round(votes), 1e-12);
  }
}

TEST(NestedCv, AllDaysModelEvaluatedOnFirstPair) {
  const auto cohort = easy_cohort(8, {1, 2, 3});
  auto c = tree_config(8);
  c.day_policy = DayPairPolicy::AllSequentialPairs;
  const auto all = nested_cv(c, cohort);
  EXPECT_EQ(all.predictions.size(), 60u);
  c.eval_first_pair_only = true;
  const auto first = nested_cv(c, cohort);
  EXPECT_EQ(first.predictions.size(), 30u);
  for (const auto& p : first.predictions) EXPECT_EQ(std::make_pair(p.day_a, p.day_b), std::make_pair(1, 2));
  for (std::size_t f = 0; f < all.folds.size(); ++f) EXPECT_EQ(first.folds[f].train_samples, all.folds[f].train_samples);
}

TEST(NestedCv, PatientBootstrapOption) {
  const auto cohort = easy_cohort(9, {1, 2, 3});
  auto c = tree_config(9);
  c.day_policy = DayPairPolicy::AllSequentialPairs;
  c.bootstrap_unit = BootstrapUnit::Patient;
  const auto r = nested_cv(c, cohort);
  EXPECT_LE(r.ci.lo, r.ci.hi);
}

TEST(NestedCv, SingleClassOuterTrainingFoldNamed) {
  std::vector<ClipRecord> rs;
  std::vector<PatientOutcome> outs;
  Rng rng(1);
  for (int i = 0; i < 5; ++i) {
    const std::string pid = "S" + std::to_string(i);
    outs.push_back({pid, i == 0});
    for (int d : {1, 2}) {
      std::vector<double> f(38);
      for (auto& x : f) x = rng.normal();
      rs.push_back({pid, ViewId::L3, d, FeatureSource::Biomarker, f});
    }
  }
  const Cohort cohort(rs, outs, FeatureSource::Biomarker);
  try {
    nested_cv(tree_config(0), cohort);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("outer fold"), std::string::npos) << e.what();
  }
}

TEST(NestedCv, EmptyEvaluationSetRejected) {
  const auto base = prognoses::testing::random_cohort(10, 4, {1, 3}, 2);
  auto c = tree_config(0);
  c.day_policy = DayPairPolicy::AllSequentialPairs;
  c.eval_first_pair_only = true;
  try {
    nested_cv(c, base);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("empty evaluation set"), std::string::npos) << e.what();
  }
}

TEST(ExperimentConfig, Validation) {
  ExperimentConfig c;
  c.views.assign(kAllViews.begin(), kAllViews.end());
  EXPECT_THROW(c.validate(), InputError);
  c.feature_fusion = FeatureFusion::Average;
  c.decision_fusion = DecisionFusion::AverageProba;
  EXPECT_THROW(c.validate(), InputError);
  c.decision_fusion.reset();
  c.validate();
  c.cross_lung = true;
  EXPECT_THROW(c.validate(), InputError);
  ExperimentConfig s;
  s.feature_fusion = FeatureFusion::Max;
  EXPECT_THROW(s.validate(), InputError);
}
