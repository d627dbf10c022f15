#pragma once

// Nested patient-level cross-validation. Outer folds are stratified; within
// an outer iteration the remaining folds serve as the inner loop (one
// validation fold, rotated). The grid candidate with the highest mean inner
// weighted F1 is refit on all training folds and scored on the held-out fold.
// Outer predictions are pooled and summarized by weighted F1 with a
// percentile bootstrap interval.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "prognoses/cohort.hpp"
#include "prognoses/core/error.hpp"
#include "prognoses/core/parallel.hpp"
#include "prognoses/core/rng.hpp"
#include "prognoses/fusion.hpp"
#include "prognoses/importance.hpp"
#include "prognoses/learners/classifier.hpp"
#include "prognoses/metrics.hpp"
#include "prognoses/temporal.hpp"

namespace prognoses {

enum class BootstrapUnit { Sample, Patient };

inline constexpr std::string_view to_string(BootstrapUnit u) noexcept {
  return u == BootstrapUnit::Sample ? "sample" : "patient";
}

struct ExperimentConfig {
  std::string name;
  std::vector<ViewId> views = {ViewId::L3};
  TemporalMode temporal = TemporalMode::Difference;
  std::optional<FeatureFusion> feature_fusion;
  std::optional<DecisionFusion> decision_fusion;
  MissingViewPolicy missing_views = MissingViewPolicy::Skip;
  bool cross_lung = false;
  DayPairPolicy day_policy = DayPairPolicy::FirstPair;
  /// Restrict evaluation (inner validation and outer test) to day-pair (1, 2).
  bool eval_first_pair_only = false;
  ClassifierKind classifier = ClassifierKind::MLP;
  /// Empty axes: the classifier's default grid.
  HyperGrid grid;
  std::size_t outer_folds = 5;
  int bootstrap_iterations = 2000;
  BootstrapUnit bootstrap_unit = BootstrapUnit::Sample;
  double threshold = 0.5;
  ImportanceMode importance_mode = ImportanceMode::SplitCount;
  std::uint64_t seed = 0;

  bool multi_view() const noexcept { return views.size() > 1; }

  HyperGrid effective_grid() const { return grid.axes.empty() ? HyperGrid::defaults(classifier) : grid; }

  void validate() const {
    if (views.empty()) throw InputError("views: at least one view required");
    std::set<ViewId> unique(views.begin(), views.end());
    if (unique.size() != views.size()) throw InputError("views: duplicate view");
    if (multi_view()) {
      if (feature_fusion.has_value() == decision_fusion.has_value())
        throw InputError("multi-view runs need exactly one of feature_fusion / decision_fusion");
      if (cross_lung) throw InputError("cross_lung applies to single-view runs only");
    } else if (feature_fusion || decision_fusion) {
      throw InputError("single-view runs take no fusion strategy");
    }
    if (outer_folds < 3) throw InputError("outer_folds must be at least 3");
    if (bootstrap_iterations < 1) throw InputError("bootstrap_iterations must be positive");
    if (!(threshold > 0.0 && threshold < 1.0)) throw InputError("threshold must lie in (0,1)");
    validate_grid(classifier, effective_grid());
  }

  /// Name of the view set in prediction rows ("L3" or "all").
  std::string view_label() const {
    if (!multi_view()) return std::string(to_string(views.front()));
    return views.size() == kNumViews ? "all" : "multi";
  }

  /// Input dimension of the trained model(s) for a d-dimensional source.
  std::size_t evaluation_dim(std::size_t d) const {
    const std::size_t t = represented_dim(d, temporal);
    if (feature_fusion) return fused_dim(t, views.size(), *feature_fusion);
    return t;
  }
};

// ---------------------------------------------------------------------------
// Folds

struct FoldPlan {
  std::vector<std::vector<std::string>> folds;  ///< sorted patient ids per fold
  std::map<std::string, std::size_t> fold_of;

  std::size_t size() const noexcept { return folds.size(); }

  const std::vector<std::string>& test_patients(std::size_t outer) const { return folds.at(outer); }

  std::vector<std::string> train_patients(std::size_t outer) const {
    std::vector<std::string> out;
    for (std::size_t f = 0; f < folds.size(); ++f)
      if (f != outer) out.insert(out.end(), folds[f].begin(), folds[f].end());
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Folds forming the inner loop of `outer`, ascending.
  std::vector<std::size_t> inner_folds(std::size_t outer) const {
    std::vector<std::size_t> out;
    for (std::size_t f = 0; f < folds.size(); ++f)
      if (f != outer) out.push_back(f);
    return out;
  }

  std::size_t rotations(std::size_t /*outer*/) const noexcept { return folds.size() - 1; }

  /// Rotation r of outer fold `outer`: validation = r-th inner fold.
  std::vector<std::string> inner_validation(std::size_t outer, std::size_t r) const {
    return folds.at(inner_folds(outer).at(r));
  }

  std::vector<std::string> inner_train(std::size_t outer, std::size_t r) const {
    const auto inner = inner_folds(outer);
    std::vector<std::string> out;
    for (std::size_t k = 0; k < inner.size(); ++k)
      if (k != r) out.insert(out.end(), folds[inner[k]].begin(), folds[inner[k]].end());
    std::sort(out.begin(), out.end());
    return out;
  }
};

/// Stratified folds: each class is shuffled with the seed, then dealt
/// round-robin, negatives continuing where positives stopped so fold sizes
/// differ by at most one.
inline FoldPlan make_outer_folds(std::span<const std::string> patients, std::span<const std::uint8_t> labels,
                                 std::size_t k, std::uint64_t seed) {
  if (patients.size() != labels.size()) throw std::invalid_argument("make_outer_folds: size mismatch");
  if (k == 0 || k > patients.size())
    throw InputError("cannot split " + std::to_string(patients.size()) + " patients into " + std::to_string(k) +
                     " folds");
  std::vector<std::string> pos, neg;
  for (std::size_t i = 0; i < patients.size(); ++i) (labels[i] ? pos : neg).push_back(patients[i]);
  if (pos.empty() || neg.empty()) throw InputError("cohort needs both readmitted and non-readmitted patients");
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  Rng rng(seed);
  rng.shuffle(std::span(pos));
  rng.shuffle(std::span(neg));

  FoldPlan plan;
  plan.folds.resize(k);
  std::size_t next = 0;
  for (const auto* group : {&pos, &neg})
    for (const auto& pid : *group) {
      plan.folds[next].push_back(pid);
      plan.fold_of[pid] = next;
      next = (next + 1) % k;
    }
  for (auto& f : plan.folds) std::sort(f.begin(), f.end());
  return plan;
}

// ---------------------------------------------------------------------------
// Audit log

enum class AuditPhase { InnerTrain, InnerValidate, RefitTrain, OuterTest };

inline constexpr std::string_view to_string(AuditPhase p) noexcept {
  switch (p) {
    case AuditPhase::InnerTrain: return "inner_train";
    case AuditPhase::InnerValidate: return "inner_validate";
    case AuditPhase::RefitTrain: return "refit_train";
    default: return "outer_test";
  }
}

/// One materialization of samples. Training entries also fit the
/// standardizer on exactly these samples.
struct AuditEntry {
  std::size_t sequence = 0;
  std::size_t outer_fold = 0;
  AuditPhase phase = AuditPhase::InnerTrain;
  int rotation = -1;
  int candidate = -1;
  std::vector<std::string> sample_ids;
  std::vector<std::string> patients;
  bool standardizer_fit = false;
};

struct AuditResult {
  bool passed = true;
  std::vector<std::string> violations;
};

// ---------------------------------------------------------------------------
// Report

struct Prediction {
  std::string patient_id;
  std::string view;
  int day_a = 0;
  int day_b = 0;
  bool y_true = false;
  double proba = 0.0;
  bool y_pred = false;
  std::size_t outer_fold = 0;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

struct CandidateScore {
  Hyperparameters hyperparameters;
  std::vector<double> rotation_scores;  ///< NaN-free; skipped rotations omitted
  double mean = 0.0;
};

struct FoldResult {
  std::size_t fold = 0;
  std::vector<std::string> test_patients;
  std::vector<std::string> train_patients;
  Hyperparameters selected;
  std::vector<CandidateScore> candidates;
  std::size_t train_samples = 0;
  std::size_t test_samples = 0;
  /// Per-feature importance of the refit forest (RandomForest, single model).
  std::vector<double> importance;
};

struct EvaluationReport {
  ExperimentConfig config;
  std::size_t feature_dim = 0;
  std::size_t evaluation_dim = 0;
  std::vector<Prediction> predictions;
  double f1 = 0.0;
  ConfidenceInterval ci;
  std::vector<FoldResult> folds;
  std::vector<AuditEntry> audit;
  AuditResult audit_result;
  std::vector<std::string> warnings;
  std::size_t gap_pairs = 0;
  double runtime_seconds = 0.0;
};

/// Checks the audit log: disjoint train/test patients, no outer-test sample
/// materialized before the final prediction of its fold, and standardizers
/// fit on training samples only.
inline AuditResult audit_leakage(const EvaluationReport& report, const FoldPlan& plan) {
  AuditResult r;
  auto fail = [&](std::string msg) {
    r.passed = false;
    r.violations.push_back(std::move(msg));
  };
  for (std::size_t f = 0; f < plan.size(); ++f) {
    const auto& test = plan.test_patients(f);
    const std::set<std::string> test_set(test.begin(), test.end());
    for (const auto& p : plan.train_patients(f))
      if (test_set.count(p)) fail("fold " + std::to_string(f) + ": patient " + p + " in train and test");

    std::optional<std::size_t> test_seq;
    for (const auto& e : report.audit)
      if (e.outer_fold == f && e.phase == AuditPhase::OuterTest) test_seq = e.sequence;
    if (!test_seq) {
      fail("fold " + std::to_string(f) + ": no outer-test entry");
      continue;
    }
    for (const auto& e : report.audit) {
      if (e.outer_fold != f) continue;
      if (e.phase == AuditPhase::OuterTest) {
        if (e.standardizer_fit) fail("fold " + std::to_string(f) + ": standardizer fit on test samples");
        for (const auto& p : e.patients)
          if (!test_set.count(p)) fail("fold " + std::to_string(f) + ": non-test patient " + p + " in outer test");
        continue;
      }
      if (e.sequence > *test_seq) fail("fold " + std::to_string(f) + ": access after final prediction");
      for (const auto& p : e.patients)
        if (test_set.count(p))
          fail("fold " + std::to_string(f) + ": test patient " + p + " accessed in phase " +
               std::string(to_string(e.phase)));
    }
  }
  return r;
}

namespace detail {

inline std::string sample_id(const std::string& patient, std::string_view view, int a, int b) {
  return patient + "/" + std::string(view) + "/" + std::to_string(a) + "-" + std::to_string(b);
}

struct TrainingSet {
  Matrix x;
  Labels y;
  std::vector<std::string> ids;
};

struct FitOutcome {
  std::optional<TrainedModel> model;  ///< empty: constant predictor
  double constant = 0.0;

  std::vector<double> predict(const Matrix& x) const {
    if (model) return model->predict_proba(x);
    return std::vector<double>(static_cast<std::size_t>(x.rows()), constant);
  }
};

class Runner {
public:
  Runner(const ExperimentConfig& cfg, const Cohort& cohort) : cfg_(cfg), cohort_(cohort) {}

  /// Number of independently trained models (views for decision fusion).
  std::size_t slots() const { return cfg_.decision_fusion ? cfg_.views.size() : 1; }

  TrainingSet training_set(std::size_t slot, std::span<const std::string> patients,
                           std::vector<std::string>& warnings) const {
    std::vector<DayPairSample> samples;
    if (cfg_.decision_fusion) {
      samples = build_samples(cohort_, cfg_.views[slot], cfg_.day_policy, cfg_.temporal, patients, &warnings);
    } else if (cfg_.feature_fusion) {
      const auto pairs = build_multiview_pairs(cohort_, cfg_.views, cfg_.day_policy, cfg_.temporal, patients);
      samples = build_fused_samples(pairs, cfg_.views, *cfg_.feature_fusion, cfg_.missing_views, &warnings);
    } else {
      const ViewId v = cfg_.views.front();
      samples = build_samples(cohort_, v, cfg_.day_policy, cfg_.temporal, patients, &warnings);
      if (cfg_.cross_lung) {
        auto m = build_samples(cohort_, mirror(v), cfg_.day_policy, cfg_.temporal, patients, &warnings);
        samples.insert(samples.end(), m.begin(), m.end());
        samples = cross_lung_expand(samples, v, true);
      }
    }
    TrainingSet t;
    std::vector<std::vector<double>> rows;
    for (auto& s : samples) {
      t.ids.push_back(sample_id(s.patient_id, s.view ? to_string(*s.view) : cfg_.view_label(), s.day_a, s.day_b));
      t.y.push_back(s.label);
      rows.push_back(std::move(s.vector));
    }
    t.x = to_matrix(rows);
    return t;
  }

  /// Degenerate (single-class or tiny) training sets give a constant
  /// predictor and a warning when `tolerate_degenerate`.
  FitOutcome fit_slot(const TrainingSet& t, const Hyperparameters& h, std::uint64_t seed, bool tolerate_degenerate,
                      std::vector<std::string>& warnings, const std::string& where) const {
    std::size_t pos = 0;
    for (auto v : t.y) pos += v;
    if (t.y.size() < 2 || pos == 0 || pos == t.y.size()) {
      if (!tolerate_degenerate) throw std::runtime_error(where + ": single-class training labels");
      warnings.push_back(where + ": single-class training labels, constant predictor used");
      return {std::nullopt, t.y.empty() ? 0.0 : static_cast<double>(pos) / static_cast<double>(t.y.size())};
    }
    ClassifierSpec spec{cfg_.classifier, h, seed};
    return {fit(spec, t.x, t.y), 0.0};
  }

  bool keep_for_eval(int a, int b) const { return !cfg_.eval_first_pair_only || (a == 1 && b == 2); }

  /// Predictions on `patients`; ids receives the evaluated sample ids.
  std::vector<Prediction> evaluate(std::span<const FitOutcome> models, std::span<const std::string> patients,
                                   std::vector<std::string>& ids, std::vector<std::string>& warnings) const {
    std::vector<Prediction> out;
    if (!cfg_.decision_fusion) {
      std::vector<DayPairSample> samples;
      if (cfg_.feature_fusion) {
        const auto pairs = build_multiview_pairs(cohort_, cfg_.views, cfg_.day_policy, cfg_.temporal, patients);
        samples = build_fused_samples(pairs, cfg_.views, *cfg_.feature_fusion, cfg_.missing_views, &warnings);
      } else {
        samples = build_samples(cohort_, cfg_.views.front(), cfg_.day_policy, cfg_.temporal, patients, &warnings);
      }
      std::vector<std::vector<double>> rows;
      for (auto& s : samples) {
        if (!keep_for_eval(s.day_a, s.day_b)) continue;
        out.push_back({s.patient_id, cfg_.view_label(), s.day_a, s.day_b, s.label, 0.0, false, 0});
        rows.push_back(std::move(s.vector));
      }
      if (!rows.empty()) {
        const auto p = models.front().predict(to_matrix(rows));
        for (std::size_t i = 0; i < out.size(); ++i) {
          out[i].proba = p[i];
          out[i].y_pred = p[i] >= cfg_.threshold;
        }
      }
    } else {
      auto pairs = build_multiview_pairs(cohort_, cfg_.views, cfg_.day_policy, cfg_.temporal, patients);
      std::erase_if(pairs, [&](const MultiViewPair& p) {
        if (!keep_for_eval(p.day_a, p.day_b)) return true;
        const bool skip = cfg_.missing_views == MissingViewPolicy::Skip ? !p.complete(cfg_.views)
                                                                         : std::none_of(cfg_.views.begin(), cfg_.views.end(), [&](ViewId v) {
                                                                             return !p.views[view_index(v)].empty();
                                                                           });
        if (skip)
          warnings.push_back(p.patient_id + ": day-pair (" + std::to_string(p.day_a) + "," + std::to_string(p.day_b) +
                             ") skipped, missing views");
        return skip;
      });
      // Batch each view's rows through its model.
      std::vector<std::vector<double>> per_pair(pairs.size());
      for (std::size_t s = 0; s < cfg_.views.size(); ++s) {
        std::vector<std::vector<double>> rows;
        std::vector<std::size_t> owner;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
          const auto& v = pairs[i].views[view_index(cfg_.views[s])];
          if (v.empty()) continue;
          rows.push_back(v);
          owner.push_back(i);
        }
        if (rows.empty()) continue;
        const auto p = models[s].predict(to_matrix(rows));
        for (std::size_t k = 0; k < owner.size(); ++k) per_pair[owner[k]].push_back(p[k]);
      }
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto fused = fuse_decisions(per_pair[i], *cfg_.decision_fusion, cfg_.threshold);
        out.push_back({pairs[i].patient_id, cfg_.view_label(), pairs[i].day_a, pairs[i].day_b, pairs[i].label,
                       fused.proba, fused.label, 0});
      }
    }
    for (const auto& p : out) ids.push_back(sample_id(p.patient_id, p.view, p.day_a, p.day_b));
    return out;
  }

private:
  const ExperimentConfig& cfg_;
  const Cohort& cohort_;
};

inline std::vector<std::string> dedupe(std::vector<std::string> v) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (auto& s : v)
    if (seen.insert(s).second) out.push_back(std::move(s));
  return out;
}

inline constexpr std::uint64_t kRefitRotation = 1000;
inline constexpr std::uint64_t kFoldPlanStream = 0xf01d;
inline constexpr std::uint64_t kBootstrapStream = 0xb007;

}  // namespace detail

inline FoldPlan fold_plan_for(const ExperimentConfig& cfg, const Cohort& cohort) {
  Labels labels;
  for (const auto& pid : cohort.patients()) labels.push_back(cohort.label(pid));
  return make_outer_folds(cohort.patients(), labels, cfg.outer_folds, derive_seed(cfg.seed, {detail::kFoldPlanStream}));
}

/// Full nested cross-validation of one configuration. `jobs` bounds the
/// worker threads; results do not depend on it.
inline EvaluationReport nested_cv(const ExperimentConfig& cfg, const Cohort& cohort, std::size_t jobs = 1) {
  const auto started = std::chrono::steady_clock::now();
  cfg.validate();
  const FoldPlan plan = fold_plan_for(cfg, cohort);
  const detail::Runner runner(cfg, cohort);
  const auto candidates = cfg.effective_grid().candidates();
  const std::size_t k = plan.size();
  const std::size_t rotations = k - 1;
  const std::size_t slots = runner.slots();

  EvaluationReport report;
  report.config = cfg;
  report.feature_dim = cohort.dim();
  report.evaluation_dim = cfg.evaluation_dim(cohort.dim());

  // Outer training folds must contain both classes.
  for (std::size_t f = 0; f < k; ++f) {
    std::size_t pos = 0;
    const auto train = plan.train_patients(f);
    for (const auto& p : train) pos += cohort.label(p);
    if (pos == 0 || pos == train.size())
      throw std::runtime_error("outer fold " + std::to_string(f) + ": single-class training labels");
  }

  // Stage 1: inner rotations for every (fold, candidate).
  struct InnerTask {
    std::size_t fold, candidate, rotation;
    std::optional<double> score;
    std::vector<AuditEntry> audit;
    std::vector<std::string> warnings;
  };
  std::vector<InnerTask> inner;
  for (std::size_t f = 0; f < k; ++f)
    for (std::size_t c = 0; c < candidates.size(); ++c)
      for (std::size_t r = 0; r < rotations; ++r) inner.push_back({f, c, r, std::nullopt, {}, {}});

  parallel_for(inner.size(), jobs, [&](std::size_t t) {
    auto& task = inner[t];
    const auto train_p = plan.inner_train(task.fold, task.rotation);
    const auto val_p = plan.inner_validation(task.fold, task.rotation);
    const std::string where = "fold " + std::to_string(task.fold) + " rotation " + std::to_string(task.rotation);
    std::vector<detail::FitOutcome> models;
    for (std::size_t s = 0; s < slots; ++s) {
      const auto ts = runner.training_set(s, train_p, task.warnings);
      task.audit.push_back({0, task.fold, AuditPhase::InnerTrain, static_cast<int>(task.rotation),
                            static_cast<int>(task.candidate), ts.ids, train_p, true});
      const auto seed = derive_seed(cfg.seed, {task.fold, task.rotation, task.candidate, s});
      models.push_back(runner.fit_slot(ts, candidates[task.candidate], seed, true, task.warnings, where));
    }
    std::vector<std::string> ids;
    const auto preds = runner.evaluate(models, val_p, ids, task.warnings);
    task.audit.push_back({0, task.fold, AuditPhase::InnerValidate, static_cast<int>(task.rotation),
                          static_cast<int>(task.candidate), ids, val_p, false});
    if (preds.empty()) return;
    Labels yt, yp;
    for (const auto& p : preds) {
      yt.push_back(p.y_true);
      yp.push_back(p.y_pred);
    }
    task.score = weighted_f1(yt, yp);
  });

  // Selection per fold.
  report.folds.resize(k);
  for (std::size_t f = 0; f < k; ++f) {
    auto& fr = report.folds[f];
    fr.fold = f;
    fr.test_patients = plan.test_patients(f);
    fr.train_patients = plan.train_patients(f);
    for (std::size_t c = 0; c < candidates.size(); ++c) fr.candidates.push_back({candidates[c], {}, 0.0});
  }
  for (const auto& task : inner)
    if (task.score) report.folds[task.fold].candidates[task.candidate].rotation_scores.push_back(*task.score);
  for (auto& fr : report.folds) {
    std::size_t best = 0;
    for (std::size_t c = 0; c < fr.candidates.size(); ++c) {
      auto& cs = fr.candidates[c];
      double sum = 0.0;
      for (double s : cs.rotation_scores) sum += s;
      cs.mean = cs.rotation_scores.empty() ? 0.0 : sum / static_cast<double>(cs.rotation_scores.size());
      if (cs.mean > fr.candidates[best].mean) best = c;
    }
    fr.selected = fr.candidates[best].hyperparameters;
  }

  // Stage 2: refit on all training folds, predict the held-out fold.
  struct OuterTask {
    std::vector<Prediction> predictions;
    std::vector<AuditEntry> audit;
    std::vector<std::string> warnings;
    std::vector<double> importance;
    std::size_t train_samples = 0;
    std::size_t gap_pairs = 0;
  };
  std::vector<OuterTask> outer(k);
  parallel_for(k, jobs, [&](std::size_t f) {
    auto& task = outer[f];
    const auto& fr = report.folds[f];
    std::vector<detail::FitOutcome> models;
    for (std::size_t s = 0; s < slots; ++s) {
      const auto ts = runner.training_set(s, fr.train_patients, task.warnings);
      task.audit.push_back({0, f, AuditPhase::RefitTrain, -1, -1, ts.ids, fr.train_patients, true});
      task.train_samples += ts.ids.size();
      const auto seed = derive_seed(cfg.seed, {f, detail::kRefitRotation, 0, s});
      models.push_back(runner.fit_slot(ts, fr.selected, seed, false, task.warnings, "outer fold " + std::to_string(f)));
    }
    if (cfg.classifier == ClassifierKind::RandomForest && slots == 1 && models.front().model)
      task.importance = feature_importance(*models.front().model, cfg.importance_mode);
    std::vector<std::string> ids;
    task.predictions = runner.evaluate(models, fr.test_patients, ids, task.warnings);
    for (auto& p : task.predictions) p.outer_fold = f;
    task.audit.push_back({0, f, AuditPhase::OuterTest, -1, -1, ids, fr.test_patients, false});
  });

  // Reduction in a fixed order.
  std::vector<std::string> warnings;
  for (auto& task : inner) {
    for (auto& e : task.audit) report.audit.push_back(std::move(e));
    warnings.insert(warnings.end(), task.warnings.begin(), task.warnings.end());
  }
  for (std::size_t f = 0; f < k; ++f) {
    auto& task = outer[f];
    for (auto& e : task.audit) report.audit.push_back(std::move(e));
    warnings.insert(warnings.end(), task.warnings.begin(), task.warnings.end());
    report.folds[f].train_samples = task.train_samples;
    report.folds[f].test_samples = task.predictions.size();
    report.folds[f].importance = std::move(task.importance);
    for (auto& p : task.predictions) report.predictions.push_back(std::move(p));
  }
  for (std::size_t i = 0; i < report.audit.size(); ++i) report.audit[i].sequence = i;
  report.warnings = detail::dedupe(std::move(warnings));

  if (report.predictions.empty()) throw std::runtime_error("empty evaluation set after filtering");

  // Count gap pairs in the evaluated day-pairs.
  for (const auto& p : report.predictions) report.gap_pairs += (p.day_b - p.day_a) > 1;

  Labels yt, yp;
  std::vector<std::string> clusters;
  for (const auto& p : report.predictions) {
    yt.push_back(p.y_true);
    yp.push_back(p.y_pred);
    clusters.push_back(p.patient_id);
  }
  report.f1 = weighted_f1(yt, yp);
  BootstrapOptions bo;
  bo.iterations = cfg.bootstrap_iterations;
  bo.seed = derive_seed(cfg.seed, {detail::kBootstrapStream});
  report.ci = cfg.bootstrap_unit == BootstrapUnit::Sample ? bootstrap_ci(yt, yp, bo)
                                                          : bootstrap_ci_clustered(yt, yp, clusters, bo);
  report.audit_result = audit_leakage(report, plan);
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace prognoses
