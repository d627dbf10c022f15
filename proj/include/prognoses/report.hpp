#pragma once

// JSON and CSV serialization of evaluation reports.

#include <ctime>
#include <ostream>
#include <string>

#include <json.hpp>

#include "prognoses/core/text.hpp"
#include "prognoses/evaluation.hpp"
#include "prognoses/version.hpp"

namespace prognoses {

inline nlohmann::ordered_json to_json(const HyperGrid& g) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [name, values] : g.axes) j[name] = values;
  return j;
}

inline nlohmann::ordered_json to_json(const Hyperparameters& h) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [name, v] : h) j[name] = v;
  return j;
}

inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json views = nlohmann::ordered_json::array();
  for (auto v : c.views) views.push_back(std::string(to_string(v)));
  j["name"] = c.name;
  j["views"] = views;
  j["temporal"] = std::string(to_string(c.temporal));
  j["feature_fusion"] = c.feature_fusion ? nlohmann::ordered_json(std::string(to_string(*c.feature_fusion))) : nullptr;
  j["decision_fusion"] = c.decision_fusion ? nlohmann::ordered_json(std::string(to_string(*c.decision_fusion))) : nullptr;
  j["missing_views"] = std::string(to_string(c.missing_views));
  j["cross_lung"] = c.cross_lung;
  j["day_policy"] = std::string(to_string(c.day_policy));
  j["eval_first_pair_only"] = c.eval_first_pair_only;
  j["classifier"] = std::string(to_string(c.classifier));
  j["grid"] = to_json(c.effective_grid());
  j["outer_folds"] = c.outer_folds;
  j["bootstrap"] = {{"iterations", c.bootstrap_iterations}, {"unit", std::string(to_string(c.bootstrap_unit))}};
  j["threshold"] = c.threshold;
  j["importance_mode"] = std::string(to_string(c.importance_mode));
  j["seed"] = c.seed;
  return j;
}

/// Everything except `seed` and `name`: two configs with equal keys run the
/// same experiment.
inline std::string config_key(const ExperimentConfig& c) {
  auto j = to_json(c);
  j.erase("seed");
  j.erase("name");
  return j.dump();
}

inline std::string utc_timestamp(std::time_t t) {
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// The `timing` member holds the only run-dependent values.
inline nlohmann::ordered_json to_json(const EvaluationReport& r, std::time_t started = 0, std::time_t finished = 0) {
  nlohmann::ordered_json j;
  j["format"] = "prognoses.report/1";
  j["tool_version"] = kVersion;
  j["config"] = to_json(r.config);
  j["feature_dim"] = r.feature_dim;
  j["evaluation_dim"] = r.evaluation_dim;
  j["n_predictions"] = r.predictions.size();
  j["gap_pairs"] = r.gap_pairs;
  j["weighted_f1"] = r.f1;
  j["ci"] = {{"lo", r.ci.lo}, {"hi", r.ci.hi}, {"lower_percentile", 2.5}, {"upper_percentile", 97.5}};

  nlohmann::ordered_json folds = nlohmann::ordered_json::array();
  for (const auto& f : r.folds) {
    nlohmann::ordered_json fj;
    fj["fold"] = f.fold;
    fj["test_patients"] = f.test_patients;
    fj["train_samples"] = f.train_samples;
    fj["test_samples"] = f.test_samples;
    fj["selected"] = to_json(f.selected);
    nlohmann::ordered_json cands = nlohmann::ordered_json::array();
    for (const auto& c : f.candidates)
      cands.push_back({{"hyperparameters", to_json(c.hyperparameters)},
                       {"rotation_scores", c.rotation_scores},
                       {"mean", c.mean}});
    fj["candidates"] = cands;
    if (!f.importance.empty()) fj["importance"] = f.importance;
    folds.push_back(fj);
  }
  j["folds"] = folds;

  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (const auto& e : r.audit)
    entries.push_back({{"sequence", e.sequence},
                       {"fold", e.outer_fold},
                       {"phase", std::string(to_string(e.phase))},
                       {"rotation", e.rotation},
                       {"candidate", e.candidate},
                       {"standardizer_fit", e.standardizer_fit},
                       {"patients", e.patients},
                       {"n_samples", e.sample_ids.size()}});
  j["audit"] = {{"passed", r.audit_result.passed}, {"violations", r.audit_result.violations}, {"entries", entries}};
  j["warnings"] = r.warnings;
  nlohmann::ordered_json timing;
  timing["runtime_seconds"] = r.runtime_seconds;
  if (started) timing["started"] = utc_timestamp(started);
  if (finished) timing["finished"] = utc_timestamp(finished);
  j["timing"] = timing;
  return j;
}

inline void write_predictions_csv(const EvaluationReport& r, std::ostream& out) {
  out << "patient_id,view,day_a,day_b,y_true,proba,y_pred\n";
  for (const auto& p : r.predictions)
    out << p.patient_id << ',' << p.view << ',' << p.day_a << ',' << p.day_b << ',' << (p.y_true ? 1 : 0) << ','
        << text::format_roundtrip(p.proba) << ',' << (p.y_pred ? 1 : 0) << '\n';
}

/// Per-fold importance vectors as CSV `fold,feature_index,value`.
inline void write_importance_csv(const EvaluationReport& r, std::ostream& out) {
  out << "fold,feature_index,value\n";
  for (const auto& f : r.folds)
    for (std::size_t i = 0; i < f.importance.size(); ++i)
      out << f.fold << ',' << i << ',' << text::format_roundtrip(f.importance[i]) << '\n';
}

/// Per-fold importance vectors stored in a report document.
inline std::vector<std::vector<double>> importance_from_report(const nlohmann::json& report) {
  std::vector<std::vector<double>> out;
  if (!report.contains("folds")) throw InputError("report: missing folds");
  for (const auto& f : report.at("folds"))
    if (f.contains("importance")) out.push_back(f.at("importance").get<std::vector<double>>());
  if (out.empty()) throw InputError("report has no importance counts (not a RandomForest run?)");
  return out;
}

}  // namespace prognoses
