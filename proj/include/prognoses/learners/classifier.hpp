#pragma once

// Uniform fit / predict_proba contract over the five classifier kinds, their
// hyperparameter domains and grids, and model serialization.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "prognoses/core/error.hpp"
#include "prognoses/core/text.hpp"
#include "prognoses/core/rng.hpp"
#include "prognoses/learners/common.hpp"
#include "prognoses/learners/decision_tree.hpp"
#include "prognoses/learners/linear_svm.hpp"
#include "prognoses/learners/mlp.hpp"
#include "prognoses/learners/random_forest.hpp"

namespace prognoses {

enum class ClassifierKind { DecisionTree, RandomForest, LinearSVM, MLP, MLPLarge };

inline constexpr std::array<ClassifierKind, 5> kAllClassifiers = {
    ClassifierKind::DecisionTree, ClassifierKind::RandomForest, ClassifierKind::LinearSVM,
    ClassifierKind::MLP, ClassifierKind::MLPLarge};

inline constexpr std::string_view to_string(ClassifierKind k) noexcept {
  constexpr std::array<std::string_view, 5> names = {"DecisionTree", "RandomForest", "LinearSVM",
                                                     "MLP", "MLPLarge"};
  return names[static_cast<std::size_t>(k)];
}

/// Column header used in result tables.
inline constexpr std::string_view display_name(ClassifierKind k) noexcept {
  constexpr std::array<std::string_view, 5> names = {"Decision-Tree", "Random-Forest", "SVM", "MLP",
                                                     "MLP-Large"};
  return names[static_cast<std::size_t>(k)];
}

inline std::optional<ClassifierKind> parse_classifier(std::string_view s) noexcept {
  for (auto k : kAllClassifiers)
    if (to_string(k) == s || display_name(k) == s) return k;
  return std::nullopt;
}

using Hyperparameters = std::map<std::string, double>;

/// Allowed values per hyperparameter name.
using HyperDomain = std::map<std::string, std::vector<double>>;

inline const HyperDomain& hyper_domain(ClassifierKind k) {
  static const std::array<HyperDomain, 5> domains = {
      HyperDomain{{"max_depth", {2, 4, 8}}, {"min_samples_leaf", {1, 3, 5}}},
      HyperDomain{{"n_trees", {100, 300}}, {"min_samples_leaf", {1, 3}}},
      HyperDomain{{"lambda", {1e-3, 1e-2, 1e-1}}, {"balanced", {0, 1}}},
      HyperDomain{{"learning_rate", {1e-3, 1e-2}}, {"l2", {0, 1e-4}}, {"balanced", {0, 1}}},
      HyperDomain{{"learning_rate", {1e-3, 1e-2}}, {"l2", {0, 1e-4}}, {"balanced", {0, 1}}},
  };
  return domains[static_cast<std::size_t>(k)];
}

/// A grid is a subset of the domain per axis. Candidates are the cartesian
/// product ordered lexicographically by (axis name, value).
struct HyperGrid {
  HyperDomain axes;

  /// Full domain, except class weighting which defaults to off.
  static HyperGrid defaults(ClassifierKind k) {
    HyperGrid g{hyper_domain(k)};
    if (auto it = g.axes.find("balanced"); it != g.axes.end()) it->second = {0};
    return g;
  }

  std::vector<Hyperparameters> candidates() const {
    std::vector<Hyperparameters> out{{}};
    for (const auto& [name, values] : axes) {
      std::vector<double> sorted = values;
      std::sort(sorted.begin(), sorted.end());
      std::vector<Hyperparameters> next;
      for (const auto& partial : out)
        for (double v : sorted) {
          auto h = partial;
          h[name] = v;
          next.push_back(std::move(h));
        }
      out = std::move(next);
    }
    return out;
  }

  friend bool operator==(const HyperGrid&, const HyperGrid&) = default;
};

inline void validate_grid(ClassifierKind k, const HyperGrid& grid) {
  const auto& dom = hyper_domain(k);
  for (const auto& [name, values] : grid.axes) {
    const auto it = dom.find(name);
    if (it == dom.end())
      throw InputError("unknown hyperparameter \"" + name + "\" for " + std::string(to_string(k)));
    if (values.empty()) throw InputError("empty grid axis \"" + name + "\"");
    for (double v : values)
      if (std::find(it->second.begin(), it->second.end(), v) == it->second.end())
        throw InputError("hyperparameter " + name + "=" + text::format_roundtrip(v) +
                         " outside its domain for " + std::string(to_string(k)));
  }
}

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::MLP;
  Hyperparameters hyperparameters;
  std::uint64_t seed = 0;

  /// Value of `name`, falling back to the first value of its default grid;
  /// 0 for names the kind does not have.
  double get(const std::string& name) const {
    if (auto it = hyperparameters.find(name); it != hyperparameters.end()) return it->second;
    const auto defaults = HyperGrid::defaults(kind);
    const auto it = defaults.axes.find(name);
    return it == defaults.axes.end() ? 0.0 : it->second.front();
  }

  void validate() const {
    HyperGrid g;
    for (const auto& [name, v] : hyperparameters) g.axes[name] = {v};
    validate_grid(kind, g);
  }
};

inline std::vector<std::size_t> hidden_layers(ClassifierKind k) {
  if (k == ClassifierKind::MLP) return {64};
  if (k == ClassifierKind::MLPLarge) return {256, 64};
  return {};
}

/// Fitted classifier with its training-data standardizer.
class TrainedModel {
public:
  using Model = std::variant<DecisionTree, RandomForest, LinearSvm, Mlp>;

  TrainedModel(ClassifierSpec spec, Standardizer standardizer, Model model)
      : spec_(std::move(spec)), standardizer_(std::move(standardizer)), model_(std::move(model)) {}

  const ClassifierSpec& spec() const noexcept { return spec_; }
  const Standardizer& standardizer() const noexcept { return standardizer_; }
  const Model& model() const noexcept { return model_; }
  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(standardizer_.mean.size()); }

  std::vector<double> predict_proba(const Matrix& x) const {
    const Matrix z = standardizer_.apply(x);
    auto p = std::visit([&](const auto& m) { return m.predict(z); }, model_);
    for (double& v : p) v = std::clamp(v, 0.0, 1.0);
    return p;
  }

private:
  ClassifierSpec spec_;
  Standardizer standardizer_;
  Model model_;
};

inline TrainedModel fit(const ClassifierSpec& spec, const Matrix& x, std::span<const std::uint8_t> y) {
  spec.validate();
  if (x.rows() < 2) throw std::invalid_argument("fit: need at least 2 samples");
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw std::invalid_argument("fit: X/y size mismatch");
  std::size_t pos = 0;
  for (auto v : y) pos += v != 0;
  if (pos == 0 || pos == y.size()) throw std::invalid_argument("degenerate training labels");
  if (!x.allFinite()) throw std::invalid_argument("fit: non-finite features");

  Standardizer st = Standardizer::fit(x);
  const Matrix z = st.apply(x);
  const bool balanced = spec.get("balanced") != 0.0;

  switch (spec.kind) {
    case ClassifierKind::DecisionTree: {
      TreeParams p;
      p.max_depth = static_cast<int>(spec.get("max_depth"));
      p.min_samples_leaf = static_cast<std::size_t>(spec.get("min_samples_leaf"));
      return {spec, std::move(st), DecisionTree::fit(z, y, p)};
    }
    case ClassifierKind::RandomForest: {
      ForestParams p;
      p.n_trees = static_cast<std::size_t>(spec.get("n_trees"));
      p.min_samples_leaf = static_cast<std::size_t>(spec.get("min_samples_leaf"));
      return {spec, std::move(st), RandomForest::fit(z, y, p, spec.seed)};
    }
    case ClassifierKind::LinearSVM: {
      SvmParams p;
      p.lambda = spec.get("lambda");
      p.balanced = balanced;
      return {spec, std::move(st), LinearSvm::fit(z, y, p)};
    }
    case ClassifierKind::MLP:
    case ClassifierKind::MLPLarge: {
      MlpTrainOptions o;
      o.hidden = hidden_layers(spec.kind);
      o.learning_rate = spec.get("learning_rate");
      o.l2 = spec.get("l2");
      o.balanced = balanced;
      return {spec, std::move(st), Mlp::fit(z, y, o, spec.seed)};
    }
  }
  throw std::logic_error("unreachable");
}

inline std::vector<double> predict_proba(const TrainedModel& model, const Matrix& x) {
  return model.predict_proba(x);
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline nlohmann::json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd json_vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline nlohmann::json tree_json(const DecisionTree& t) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : t.nodes())
    nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left},
                     {"right", n.right}, {"value", n.value}, {"samples", n.samples},
                     {"impurity_decrease", n.impurity_decrease}});
  return {{"nodes", nodes}};
}

inline DecisionTree json_tree(const nlohmann::json& j) {
  std::vector<TreeNode> nodes;
  for (const auto& n : j.at("nodes"))
    nodes.push_back({n.at("feature").get<int>(), n.at("threshold").get<double>(), n.at("left").get<int>(),
                     n.at("right").get<int>(), n.at("value").get<double>(),
                     n.at("samples").get<std::size_t>(), n.value("impurity_decrease", 0.0)});
  return DecisionTree(std::move(nodes));
}

}  // namespace detail

inline nlohmann::json to_json(const TrainedModel& m) {
  nlohmann::json j;
  j["format"] = "prognoses.model/1";
  j["kind"] = to_string(m.spec().kind);
  j["hyperparameters"] = m.spec().hyperparameters;
  j["seed"] = m.spec().seed;
  j["standardizer"] = {{"mean", detail::vec_json(m.standardizer().mean)},
                       {"scale", detail::vec_json(m.standardizer().scale)}};
  j["model"] = std::visit(
      [](const auto& model) -> nlohmann::json {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, DecisionTree>) {
          return detail::tree_json(model);
        } else if constexpr (std::is_same_v<T, RandomForest>) {
          nlohmann::json trees = nlohmann::json::array();
          for (const auto& t : model.trees()) trees.push_back(detail::tree_json(t));
          return {{"trees", trees}};
        } else if constexpr (std::is_same_v<T, LinearSvm>) {
          return {{"weights", detail::vec_json(model.weights())}, {"bias", model.bias()},
                  {"platt_alpha", model.calibration().alpha}, {"platt_beta", model.calibration().beta}};
        } else {
          nlohmann::json layers = nlohmann::json::array();
          for (const auto& l : model.params().layers)
            layers.push_back({{"rows", l.weights.rows()}, {"cols", l.weights.cols()},
                              {"weights", std::vector<double>(l.weights.data(), l.weights.data() + l.weights.size())},
                              {"bias", detail::vec_json(l.bias)}});
          return {{"layers", layers}};
        }
      },
      m.model());
  return j;
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
  try {
    ClassifierSpec spec;
    const auto kind = parse_classifier(j.at("kind").get<std::string>());
    if (!kind) throw InputError("unknown classifier kind");
    spec.kind = *kind;
    spec.hyperparameters = j.at("hyperparameters").get<Hyperparameters>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    Standardizer st{detail::json_vec(j.at("standardizer").at("mean")),
                    detail::json_vec(j.at("standardizer").at("scale"))};
    const auto& m = j.at("model");
    switch (spec.kind) {
      case ClassifierKind::DecisionTree: return {spec, st, detail::json_tree(m)};
      case ClassifierKind::RandomForest: {
        std::vector<DecisionTree> trees;
        for (const auto& t : m.at("trees")) trees.push_back(detail::json_tree(t));
        return {spec, st, RandomForest(std::move(trees))};
      }
      case ClassifierKind::LinearSVM:
        return {spec, st,
                LinearSvm(detail::json_vec(m.at("weights")), m.at("bias").get<double>(),
                          PlattCalibration{m.at("platt_alpha").get<double>(), m.at("platt_beta").get<double>()})};
      default: {
        MlpParams p;
        for (const auto& l : m.at("layers")) {
          const auto w = l.at("weights").get<std::vector<double>>();
          MlpLayer layer{Eigen::Map<const Eigen::MatrixXd>(w.data(), l.at("rows").get<Eigen::Index>(),
                                                           l.at("cols").get<Eigen::Index>()),
                         detail::json_vec(l.at("bias"))};
          p.layers.push_back(std::move(layer));
        }
        return {spec, st, Mlp(std::move(p))};
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed model document: ") + e.what());
  }
}

}  // namespace prognoses
