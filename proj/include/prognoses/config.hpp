#pragma once

// JSON configuration files for single runs and ablation grids. Errors carry
// the dotted field path; relative data paths resolve against the directory
// of the config file.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "prognoses/cohort.hpp"
#include "prognoses/core/error.hpp"
#include "prognoses/evaluation.hpp"
#include "prognoses/importance.hpp"
#include "prognoses/synthcohort.hpp"

namespace prognoses {

namespace config_detail {

using nlohmann::json;

inline std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

[[noreturn]] inline void fail(const std::string& path, const std::string& msg) {
  throw InputError("config: " + path + ": " + msg);
}

inline void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path.empty() ? "<root>" : path, "expected an object");
}

/// Rejects keys outside `allowed` so typos surface instead of being ignored.
inline void check_keys(const json& j, const std::string& path, std::initializer_list<std::string_view> allowed) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || k == a;
    if (!ok) fail(join(path, k), "unknown field");
  }
}

inline std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

inline bool get_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected true or false");
  return j.get<bool>();
}

inline double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

inline std::uint64_t get_uint(const json& j, const std::string& path) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<long long>() < 0))
    fail(path, "expected a non-negative integer");
  return j.get<std::uint64_t>();
}

template <class Enum, std::size_t N>
Enum get_enum(const json& j, const std::string& path, const std::array<Enum, N>& options) {
  const auto s = get_string(j, path);
  std::string names;
  for (auto o : options) {
    if (s == to_string(o)) return o;
    names += (names.empty() ? "" : ", ") + std::string(to_string(o));
  }
  fail(path, "unknown value \"" + s + "\" (expected one of: " + names + ")");
}

inline std::vector<ViewId> get_views(const json& j, const std::string& path) {
  if (j.is_string() && j.get<std::string>() == "all") return {kAllViews.begin(), kAllViews.end()};
  std::vector<ViewId> out;
  auto one = [&](const json& v, const std::string& p) {
    const auto s = get_string(v, p);
    const auto view = parse_view(s);
    if (!view) fail(p, "unknown view \"" + s + "\"");
    out.push_back(*view);
  };
  if (j.is_string()) {
    one(j, path);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) one(j[i], path + "[" + std::to_string(i) + "]");
  } else {
    fail(path, "expected a view name, a list of views, or \"all\"");
  }
  return out;
}

inline ClassifierKind get_classifier(const json& j, const std::string& path) {
  const auto s = get_string(j, path);
  const auto k = parse_classifier(s);
  if (!k) fail(path, "unknown classifier \"" + s + "\"");
  return *k;
}

inline HyperGrid get_grid(const json& j, const std::string& path, ClassifierKind kind) {
  expect_object(j, path);
  HyperGrid g;
  for (const auto& [name, values] : j.items()) {
    const auto p = join(path, name);
    std::vector<double> vs;
    if (values.is_array()) {
      for (std::size_t i = 0; i < values.size(); ++i) vs.push_back(get_number(values[i], p + "[" + std::to_string(i) + "]"));
    } else {
      vs.push_back(get_number(values, p));
    }
    g.axes[name] = vs;
  }
  try {
    validate_grid(kind, g);
  } catch (const InputError& e) {
    fail(path, e.what());
  }
  return g;
}

inline constexpr std::array<TemporalMode, 2> kTemporalModes = {TemporalMode::Difference, TemporalMode::Concatenate};
inline constexpr std::array<FeatureFusion, 3> kFeatureFusions = {FeatureFusion::Average, FeatureFusion::Max,
                                                                  FeatureFusion::Concatenate};
inline constexpr std::array<DecisionFusion, 2> kDecisionFusions = {DecisionFusion::MaxVotes,
                                                                    DecisionFusion::AverageProba};
inline constexpr std::array<MissingViewPolicy, 2> kMissingPolicies = {MissingViewPolicy::Skip,
                                                                       MissingViewPolicy::ZeroImpute};
inline constexpr std::array<DayPairPolicy, 2> kDayPolicies = {DayPairPolicy::FirstPair,
                                                               DayPairPolicy::AllSequentialPairs};
inline constexpr std::array<BootstrapUnit, 2> kBootstrapUnits = {BootstrapUnit::Sample, BootstrapUnit::Patient};
inline constexpr std::array<ImportanceMode, 3> kImportanceModes = {
    ImportanceMode::SplitCount, ImportanceMode::UniquePerTree, ImportanceMode::ImpurityWeighted};

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace config_detail

/// Where a cohort comes from: files on disk or the synthetic generator.
struct DataSpec {
  std::filesystem::path features;
  std::filesystem::path labels;
  FeatureSource source = FeatureSource::Encoder;
  std::optional<GeneratorParams> synthetic;

  Cohort load() const {
    if (synthetic) return generate(*synthetic).cohort;
    return load_cohort(features.string(), labels.string(), source);
  }

  /// Stable description used in cache keys.
  std::string key() const {
    if (synthetic) return "synthetic:" + to_json(*synthetic).dump();
    return "files:" + features.string() + "|" + labels.string() + "|" + std::string(to_string(source));
  }
};

inline DataSpec parse_data(const nlohmann::json& j, const std::string& path, const std::filesystem::path& base) {
  using namespace config_detail;
  expect_object(j, path);
  check_keys(j, path, {"features", "labels", "source", "synthetic"});
  DataSpec d;
  if (j.contains("synthetic")) {
    if (j.contains("features") || j.contains("labels")) fail(path, "give either synthetic or features/labels");
    try {
      d.synthetic = generator_params_from_json(j.at("synthetic"));
      d.synthetic->validate();
    } catch (const InputError& e) {
      fail(join(path, "synthetic"), e.what());
    }
    d.source = d.synthetic->source();
    return d;
  }
  if (!j.contains("features")) fail(join(path, "features"), "missing");
  if (!j.contains("labels")) fail(join(path, "labels"), "missing");
  d.features = resolve(base, get_string(j.at("features"), join(path, "features")));
  d.labels = resolve(base, get_string(j.at("labels"), join(path, "labels")));
  if (j.contains("source")) {
    const auto s = get_string(j.at("source"), join(path, "source"));
    const auto src = parse_source(s);
    if (!src) fail(join(path, "source"), "unknown source \"" + s + "\" (expected tsm or biomarker)");
    d.source = *src;
  }
  return d;
}

/// Fills `cfg` from an experiment object; absent fields keep their values.
inline void parse_experiment_into(ExperimentConfig& cfg, const nlohmann::json& j, const std::string& path) {
  using namespace config_detail;
  expect_object(j, path);
  check_keys(j, path,
             {"name", "views", "temporal", "feature_fusion", "decision_fusion", "missing_views", "cross_lung",
              "day_policy", "eval_first_pair_only", "classifier", "grid", "outer_folds", "bootstrap", "threshold",
              "importance_mode"});
  auto at = [&](std::string_view k) { return join(path, k); };
  if (j.contains("name")) cfg.name = get_string(j.at("name"), at("name"));
  if (j.contains("views")) cfg.views = get_views(j.at("views"), at("views"));
  if (j.contains("temporal")) cfg.temporal = get_enum(j.at("temporal"), at("temporal"), kTemporalModes);
  if (j.contains("feature_fusion")) {
    cfg.feature_fusion.reset();
    if (!j.at("feature_fusion").is_null())
      cfg.feature_fusion = get_enum(j.at("feature_fusion"), at("feature_fusion"), kFeatureFusions);
  }
  if (j.contains("decision_fusion")) {
    cfg.decision_fusion.reset();
    if (!j.at("decision_fusion").is_null())
      cfg.decision_fusion = get_enum(j.at("decision_fusion"), at("decision_fusion"), kDecisionFusions);
  }
  if (j.contains("missing_views")) cfg.missing_views = get_enum(j.at("missing_views"), at("missing_views"), kMissingPolicies);
  if (j.contains("cross_lung")) cfg.cross_lung = get_bool(j.at("cross_lung"), at("cross_lung"));
  if (j.contains("day_policy")) cfg.day_policy = get_enum(j.at("day_policy"), at("day_policy"), kDayPolicies);
  if (j.contains("eval_first_pair_only"))
    cfg.eval_first_pair_only = get_bool(j.at("eval_first_pair_only"), at("eval_first_pair_only"));
  if (j.contains("classifier")) cfg.classifier = get_classifier(j.at("classifier"), at("classifier"));
  if (j.contains("grid")) cfg.grid = get_grid(j.at("grid"), at("grid"), cfg.classifier);
  if (j.contains("outer_folds")) cfg.outer_folds = get_uint(j.at("outer_folds"), at("outer_folds"));
  if (j.contains("bootstrap")) {
    const auto& b = j.at("bootstrap");
    const auto p = at("bootstrap");
    expect_object(b, p);
    check_keys(b, p, {"iterations", "unit"});
    if (b.contains("iterations")) cfg.bootstrap_iterations = static_cast<int>(get_uint(b.at("iterations"), join(p, "iterations")));
    if (b.contains("unit")) cfg.bootstrap_unit = get_enum(b.at("unit"), join(p, "unit"), kBootstrapUnits);
  }
  if (j.contains("threshold")) cfg.threshold = get_number(j.at("threshold"), at("threshold"));
  if (j.contains("importance_mode"))
    cfg.importance_mode = get_enum(j.at("importance_mode"), at("importance_mode"), kImportanceModes);
  try {
    cfg.validate();
  } catch (const InputError& e) {
    fail(path, e.what());
  }
}

struct RunConfig {
  DataSpec data;
  ExperimentConfig experiment;
  std::uint64_t seed = 0;
};

struct ParsedFile {
  nlohmann::json json;
  std::string bytes;
  std::filesystem::path dir;
};

inline ParsedFile read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  ParsedFile f;
  f.bytes = ss.str();
  try {
    f.json = nlohmann::json::parse(f.bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string() + ": invalid JSON: " + e.what());
  }
  f.dir = path.parent_path();
  return f;
}

inline RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base) {
  using namespace config_detail;
  expect_object(j, "");
  check_keys(j, "", {"seed", "data", "experiment"});
  RunConfig rc;
  if (j.contains("seed")) rc.seed = get_uint(j.at("seed"), "seed");
  if (!j.contains("data")) fail("data", "missing");
  rc.data = parse_data(j.at("data"), "data", base);
  if (!j.contains("experiment")) fail("experiment", "missing");
  parse_experiment_into(rc.experiment, j.at("experiment"), "experiment");
  rc.experiment.seed = rc.seed;
  return rc;
}

/// Shared settings of every ablation cell plus which exhibits to build.
struct AblationConfig {
  DataSpec data;
  std::optional<DataSpec> biomarker_data;
  std::uint64_t seed = 0;
  std::size_t outer_folds = 5;
  int bootstrap_iterations = 2000;
  BootstrapUnit bootstrap_unit = BootstrapUnit::Sample;
  std::vector<ClassifierKind> classifiers = {kAllClassifiers.begin(), kAllClassifiers.end()};
  /// Classifier for the single-classifier exhibits (fusion, temporal,
  /// cross-lung, day-pair).
  ClassifierKind focus_classifier = ClassifierKind::MLP;
  std::map<ClassifierKind, HyperGrid> grids;
  std::vector<std::string> exhibits;  ///< empty: all

  bool wants(std::string_view exhibit) const {
    return exhibits.empty() || std::find(exhibits.begin(), exhibits.end(), exhibit) != exhibits.end();
  }

  HyperGrid grid_for(ClassifierKind k) const {
    const auto it = grids.find(k);
    return it == grids.end() ? HyperGrid{} : it->second;
  }
};

inline constexpr std::array<std::string_view, 6> kExhibits = {"table1", "fig3", "fig4", "fig5", "table2", "table3"};

inline AblationConfig parse_ablation_config(const nlohmann::json& j, const std::filesystem::path& base) {
  using namespace config_detail;
  expect_object(j, "");
  check_keys(j, "", {"seed", "data", "biomarker_data", "outer_folds", "bootstrap", "classifiers", "focus_classifier",
                     "grids", "exhibits"});
  AblationConfig a;
  if (j.contains("seed")) a.seed = get_uint(j.at("seed"), "seed");
  if (!j.contains("data")) fail("data", "missing");
  a.data = parse_data(j.at("data"), "data", base);
  if (j.contains("biomarker_data")) {
    a.biomarker_data = parse_data(j.at("biomarker_data"), "biomarker_data", base);
    if (a.biomarker_data->source != FeatureSource::Biomarker)
      fail("biomarker_data", "expected a 38-dimensional biomarker source");
  }
  if (j.contains("outer_folds")) {
    a.outer_folds = get_uint(j.at("outer_folds"), "outer_folds");
    if (a.outer_folds < 3) fail("outer_folds", "must be at least 3");
  }
  if (j.contains("bootstrap")) {
    const auto& b = j.at("bootstrap");
    expect_object(b, "bootstrap");
    check_keys(b, "bootstrap", {"iterations", "unit"});
    if (b.contains("iterations")) {
      a.bootstrap_iterations = static_cast<int>(get_uint(b.at("iterations"), "bootstrap.iterations"));
      if (a.bootstrap_iterations < 1) fail("bootstrap.iterations", "must be positive");
    }
    if (b.contains("unit")) a.bootstrap_unit = get_enum(b.at("unit"), "bootstrap.unit", kBootstrapUnits);
  }
  if (j.contains("classifiers")) {
    const auto& c = j.at("classifiers");
    if (!c.is_array() || c.empty()) fail("classifiers", "expected a non-empty list");
    a.classifiers.clear();
    for (std::size_t i = 0; i < c.size(); ++i)
      a.classifiers.push_back(get_classifier(c[i], "classifiers[" + std::to_string(i) + "]"));
  }
  if (j.contains("focus_classifier")) a.focus_classifier = get_classifier(j.at("focus_classifier"), "focus_classifier");
  if (j.contains("grids")) {
    const auto& g = j.at("grids");
    expect_object(g, "grids");
    for (const auto& [name, grid] : g.items()) {
      const auto kind = parse_classifier(name);
      if (!kind) fail(join("grids", name), "unknown classifier");
      a.grids[*kind] = get_grid(grid, join("grids", name), *kind);
    }
  }
  if (j.contains("exhibits")) {
    const auto& e = j.at("exhibits");
    if (!e.is_array()) fail("exhibits", "expected a list");
    for (std::size_t i = 0; i < e.size(); ++i) {
      const auto p = "exhibits[" + std::to_string(i) + "]";
      const auto s = get_string(e[i], p);
      if (std::find(kExhibits.begin(), kExhibits.end(), s) == kExhibits.end()) fail(p, "unknown exhibit \"" + s + "\"");
      a.exhibits.push_back(s);
    }
  }
  return a;
}

}  // namespace prognoses
