#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "prognoses/learners/classifier.hpp"
#include "test_support.hpp"

using namespace prognoses;
using namespace prognoses::testing;

namespace {

ClassifierSpec spec(ClassifierKind k, Hyperparameters h = {}, std::uint64_t seed = 1) { return {k, std::move(h), seed}; }

}  // namespace

TEST(DecisionTree, SeparableBlobsZeroTrainingError) {
  const auto d = blobs(100, 1);
  for (double depth : {2.0, 4.0, 8.0}) {
    const auto m = fit(spec(ClassifierKind::DecisionTree, {{"max_depth", depth}, {"min_samples_leaf", 1}}), d.x, d.y);
    EXPECT_EQ(accuracy(m.predict_proba(d.x), d.y), 1.0);
  }
}

TEST(DecisionTree, PureLeafGivesProbabilityOne) {
  Matrix x(4, 1);
  x << 0, 1, 10, 11;
  const Labels y = {0, 0, 1, 1};
  const auto m = fit(spec(ClassifierKind::DecisionTree, {{"max_depth", 2}, {"min_samples_leaf", 1}}), x, y);
  Matrix q(2, 1);
  q << 10.5, 0.5;
  const auto p = m.predict_proba(q);
  EXPECT_EQ(p[0], 1.0);
  EXPECT_EQ(p[1], 0.0);
}

TEST(DecisionTree, SplitAtMidpointLowestFeatureOnTies) {
  Matrix x(4, 2);
  x << 0, 0, 1, 1, 2, 2, 3, 3;
  const Labels y = {0, 0, 1, 1};
  const auto t = DecisionTree::fit(x, y, TreeParams{1, 1, 0});
  ASSERT_EQ(t.nodes().size(), 3u);
  EXPECT_EQ(t.nodes()[0].feature, 0);
  EXPECT_DOUBLE_EQ(t.nodes()[0].threshold, 1.5);
}

TEST(RandomForest, OneTreeMatchesThatTree) {
  const auto d = blobs(60, 3, 5);
  const auto m = fit(spec(ClassifierKind::RandomForest, {{"n_trees", 100}, {"min_samples_leaf", 1}}), d.x, d.y);
  const auto& forest = std::get<RandomForest>(m.model());
  const RandomForest one({forest.trees().front()});
  const Matrix z = m.standardizer().apply(d.x);
  const auto pf = one.predict(z);
  const auto pt = forest.trees().front().predict(z);
  EXPECT_EQ(pf, pt);
}

TEST(RandomForest, MtryIsFloorSqrt) {
  EXPECT_EQ(RandomForest::mtry(512), 22u);
  EXPECT_EQ(RandomForest::mtry(38), 6u);
  EXPECT_EQ(RandomForest::mtry(1), 1u);
}

TEST(RandomForest, BootstrapHasNDraws) {
  const auto d = blobs(40, 5, 3);
  const auto f = RandomForest::fit(d.x, d.y, ForestParams{10, 1}, 7);
  for (const auto& t : f.trees()) EXPECT_EQ(t.nodes().front().samples, 40u);
}

TEST(LinearSvm, XorIsNearChance) {
  const auto train = xor_data(200, 1), test = xor_data(200, 2);
  const auto m = fit(spec(ClassifierKind::LinearSVM, {{"lambda", 1e-2}}), train.x, train.y);
  EXPECT_NEAR(accuracy(m.predict_proba(test.x), test.y), 0.5, 0.1);
}

TEST(LinearSvm, SeparableIsAccurate) {
  const auto train = blobs(100, 1), test = blobs(200, 2);
  for (double lambda : {1e-3, 1e-2, 1e-1}) {
    const auto m = fit(spec(ClassifierKind::LinearSVM, {{"lambda", lambda}}), train.x, train.y);
    EXPECT_GE(accuracy(m.predict_proba(test.x), test.y), 0.95) << lambda;
  }
}

TEST(Platt, SymmetricMarginsCalibrateToHalfAtZero) {
  std::vector<double> m;
  Labels y;
  for (int i = 1; i <= 50; ++i) {
    m.push_back(0.1 * i);
    y.push_back(i % 5 != 0);
    m.push_back(-0.1 * i);
    y.push_back(i % 5 == 0);
  }
  const auto c = PlattCalibration::fit(m, y);
  EXPECT_NEAR(c(0.0), 0.5, 0.05);
  EXPECT_GT(c.alpha, 0.0);
}

TEST(Mlp, LearnsXor) {
  const auto train = xor_data(200, 1), test = xor_data(200, 2);
  const auto m = fit(spec(ClassifierKind::MLP, {{"learning_rate", 1e-2}, {"l2", 0}}), train.x, train.y);
  EXPECT_GE(accuracy(m.predict_proba(test.x), test.y), 0.95);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed + 100);
    Matrix x(5, 4);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    const Labels y = {1, 0, 1, 1, 0};
    const std::vector<std::size_t> hidden = {8};
    auto p = init_mlp(4, hidden, seed);
    for (auto& l : p.layers)
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = 0.1 * rng.normal();
    const double l2 = 1e-2;
    const auto g = mlp_gradient(p, x, y, {}, l2).grad.flatten();
    auto flat = p.flatten();
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t k = 0; k < flat.size(); ++k) {
      auto q = p;
      auto plus = flat, minus = flat;
      plus[k] += h;
      minus[k] -= h;
      q.unflatten(plus);
      const double lp = mlp_gradient(q, x, y, {}, l2).loss;
      q.unflatten(minus);
      const double lm = mlp_gradient(q, x, y, {}, l2).loss;
      const double num = (lp - lm) / (2 * h);
      const double denom = std::max({std::abs(num), std::abs(g[k]), 1e-7});
      worst = std::max(worst, std::abs(num - g[k]) / denom);
    }
    EXPECT_LT(worst, 1e-4) << "seed " << seed;
  }
}

TEST(Mlp, ZeroNetworkBalancedBatchHasZeroOutputBiasGradient) {
  auto p = init_mlp(3, std::vector<std::size_t>{4}, 1).zeros_like();
  Matrix x = Matrix::Random(6, 3);
  const Labels y = {1, 0, 1, 0, 1, 0};
  const auto g = mlp_gradient(p, x, y, {}, 0.0);
  EXPECT_EQ(g.grad.layers.back().bias(0), 0.0);
}

TEST(Mlp, PenaltyOnlyGradientIsLambdaTimesWeights) {
  const auto p = init_mlp(5, std::vector<std::size_t>{6, 3}, 9);
  const double l2 = 0.37;
  const auto g = mlp_gradient(p, Matrix(0, 5), {}, {}, l2);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    EXPECT_TRUE(g.grad.layers[l].weights.isApprox(l2 * p.layers[l].weights));
    EXPECT_EQ(g.grad.layers[l].bias.norm(), 0.0);
  }
}

TEST(Mlp, LossNeverIncreases) {
  const auto d = xor_data(80, 4);
  for (double lr : {1e-3, 1e-2, 1.0, 50.0}) {
    MlpTrainOptions o;
    o.learning_rate = lr;
    o.l2 = 1e-4;
    MlpTrace trace;
    Mlp::fit(d.x, d.y, o, 3, &trace);
    ASSERT_GE(trace.losses.size(), 2u);
    for (std::size_t i = 1; i < trace.losses.size(); ++i) ASSERT_LE(trace.losses[i], trace.losses[i - 1]) << lr;
  }
}

TEST(Mlp, RowSpaceTrainingMatchesFullTraining) {
  // Wide data takes the reduced path; the reference is the same optimizer
  // written out over the full parameter space.
  Rng rng(12);
  const Eigen::Index n = 12, d = 40;
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  Labels y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = x(i, 0) + x(i, 1) > 0;
  MlpTrainOptions o;
  o.learning_rate = 1e-2;
  o.l2 = 1e-2;
  o.max_epochs = 50;
  o.patience = 1000;
  const auto reduced = Mlp::fit(x, y, o, 5);

  auto p = init_mlp(static_cast<std::size_t>(d), o.hidden, 5);
  auto train_full = [&] {
    MlpParams v = p.zeros_like();
    double lr = o.learning_rate;
    auto cur = mlp_gradient(p, x, y, {}, o.l2);
    for (int e = 0; e < o.max_epochs; ++e) {
      for (;;) {
        MlpParams step = v;
        step.scale(o.momentum);
        step.axpy(-lr, cur.grad);
        MlpParams cand = p;
        cand.axpy(1.0, step);
        auto next = mlp_gradient(cand, x, y, {}, o.l2);
        if (next.loss <= cur.loss) {
          p = cand;
          v = step;
          cur = next;
          break;
        }
        lr *= 0.5;
        v = p.zeros_like();
      }
    }
  };
  train_full();
  const Mlp full(p);
  Matrix q(20, d);
  for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = rng.normal();
  const auto a = reduced.predict(q), b = full.predict(q);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-8);
}

TEST(Fit, DegenerateLabelsRejected) {
  const auto d = blobs(10, 1);
  const Labels ones(10, 1);
  EXPECT_THROW(fit(spec(ClassifierKind::MLP), d.x, ones), std::invalid_argument);
  EXPECT_THROW(fit(spec(ClassifierKind::MLP), d.x.topRows(1), Labels{1}), std::invalid_argument);
}

TEST(Fit, HyperparameterOutsideDomain) {
  const auto d = blobs(10, 1);
  EXPECT_THROW(fit(spec(ClassifierKind::DecisionTree, {{"max_depth", 3}}), d.x, d.y), InputError);
  EXPECT_THROW(fit(spec(ClassifierKind::LinearSVM, {{"learning_rate", 1e-2}}), d.x, d.y), InputError);
}

TEST(Fit, PredictDimensionMismatch) {
  const auto d = blobs(10, 1);
  const auto m = fit(spec(ClassifierKind::DecisionTree), d.x, d.y);
  EXPECT_THROW(m.predict_proba(Matrix::Zero(2, 3)), std::invalid_argument);
}

class AllKinds : public ::testing::TestWithParam<ClassifierKind> {};

TEST_P(AllKinds, DeterministicRefit) {
  const auto d = blobs(40, 8, 6);
  const auto q = blobs(30, 9, 6);
  const auto a = fit(spec(GetParam(), {}, 77), d.x, d.y).predict_proba(q.x);
  const auto b = fit(spec(GetParam(), {}, 77), d.x, d.y).predict_proba(q.x);
  EXPECT_EQ(a, b);
}

TEST_P(AllKinds, ProbabilitiesInUnitInterval) {
  const auto d = xor_data(60, 2);
  const auto m = fit(spec(GetParam()), d.x, d.y);
  Matrix q = 100.0 * Matrix::Random(50, 2);
  for (double p : m.predict_proba(q)) {
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
}

TEST_P(AllKinds, AffineFeatureMapLeavesPredictionsUnchanged) {
  const auto d = blobs(50, 4, 4);
  const auto q = blobs(40, 5, 4);
  Matrix xs = d.x, qs = q.x;
  const std::array<double, 4> a = {3.0, 0.01, 250.0, 1.0}, b = {-7.0, 0.5, 1e3, 0.0};
  for (int j = 0; j < 4; ++j) {
    xs.col(j) = (a[j] * d.x.col(j)).array() + b[j];
    qs.col(j) = (a[j] * q.x.col(j)).array() + b[j];
  }
  const auto p0 = fit(spec(GetParam()), d.x, d.y).predict_proba(q.x);
  const auto p1 = fit(spec(GetParam()), xs, d.y).predict_proba(qs);
  for (std::size_t i = 0; i < p0.size(); ++i) EXPECT_NEAR(p0[i], p1[i], 1e-6);
}

TEST_P(AllKinds, JsonRoundTripPreservesPredictions) {
  const auto d = blobs(30, 6, 3);
  const auto m = fit(spec(GetParam()), d.x, d.y);
  const auto back = model_from_json(nlohmann::json::parse(to_json(m).dump()));
  EXPECT_EQ(back.predict_proba(d.x), m.predict_proba(d.x));
}

INSTANTIATE_TEST_SUITE_P(Learners, AllKinds, ::testing::ValuesIn(kAllClassifiers),
                         [](const auto& info) { return std::string(to_string(info.param)); });
