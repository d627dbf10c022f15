#pragma once

// Random-forest selection frequencies, aggregated into biomarker groups and
// averaged over outer folds.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "prognoses/cohort.hpp"
#include "prognoses/core/error.hpp"
#include "prognoses/core/text.hpp"
#include "prognoses/learners/classifier.hpp"

namespace prognoses {

enum class ImportanceMode { SplitCount, UniquePerTree, ImpurityWeighted };

inline constexpr std::string_view to_string(ImportanceMode m) noexcept {
  switch (m) {
    case ImportanceMode::SplitCount: return "split_count";
    case ImportanceMode::UniquePerTree: return "unique_per_tree";
    default: return "impurity_weighted";
  }
}

inline std::optional<ImportanceMode> parse_importance_mode(std::string_view s) noexcept {
  for (auto m : {ImportanceMode::SplitCount, ImportanceMode::UniquePerTree, ImportanceMode::ImpurityWeighted})
    if (s == to_string(m)) return m;
  return std::nullopt;
}

/// Per-feature importance over all trees of a forest. SplitCount counts
/// internal nodes, UniquePerTree counts trees using the feature at least
/// once, ImpurityWeighted sums weighted Gini decreases.
inline std::vector<double> forest_importance(const RandomForest& forest, std::size_t dim, ImportanceMode mode) {
  std::vector<double> out(dim, 0.0);
  for (const auto& tree : forest.trees()) {
    std::set<int> used;
    for (const auto& n : tree.nodes()) {
      if (n.is_leaf()) continue;
      if (static_cast<std::size_t>(n.feature) >= dim) throw std::invalid_argument("split feature outside dimension");
      switch (mode) {
        case ImportanceMode::SplitCount: out[static_cast<std::size_t>(n.feature)] += 1.0; break;
        case ImportanceMode::UniquePerTree: used.insert(n.feature); break;
        case ImportanceMode::ImpurityWeighted: out[static_cast<std::size_t>(n.feature)] += n.impurity_decrease; break;
      }
    }
    for (int f : used) out[static_cast<std::size_t>(f)] += 1.0;
  }
  return out;
}

inline std::vector<double> feature_importance(const TrainedModel& model, ImportanceMode mode) {
  const auto* forest = std::get_if<RandomForest>(&model.model());
  if (!forest) throw std::invalid_argument("importance requires a RandomForest model");
  return forest_importance(*forest, model.input_dim(), mode);
}

/// Number of internal nodes splitting on each feature, across all trees.
inline std::vector<double> split_counts(const TrainedModel& model) {
  return feature_importance(model, ImportanceMode::SplitCount);
}

// ---------------------------------------------------------------------------
// Grouping

inline constexpr std::array<std::string_view, 9> kCanonicalGroups = {
    "PL Location", "B-Line", "A-Line", "B-Line Origin", "PL Thickness",
    "PL Breaks", "Consolidation", "Effusion", "PL Indents"};

class BiomarkerGrouping {
public:
  /// group_of[i] is the group of feature i.
  explicit BiomarkerGrouping(std::vector<std::string> group_of) : group_of_(std::move(group_of)) {
    if (group_of_.empty()) throw InputError("grouping: no features");
    for (std::size_t i = 0; i < group_of_.size(); ++i)
      if (group_of_[i].empty()) throw InputError("grouping: feature " + std::to_string(i) + " has no group");
  }

  std::size_t size() const noexcept { return group_of_.size(); }
  const std::string& group_of(std::size_t feature) const { return group_of_.at(feature); }

  /// Canonical groups that occur, in canonical order, then others sorted.
  std::vector<std::string> groups() const {
    const std::set<std::string> present(group_of_.begin(), group_of_.end());
    std::vector<std::string> out;
    for (auto g : kCanonicalGroups)
      if (present.count(std::string(g))) out.emplace_back(g);
    for (const auto& g : present)
      if (std::find(kCanonicalGroups.begin(), kCanonicalGroups.end(), g) == kCanonicalGroups.end()) out.push_back(g);
    return out;
  }

  /// Documented placeholder for the 38 biomarker outputs.
  static BiomarkerGrouping placeholder() {
    constexpr std::array<std::size_t, 9> sizes = {6, 6, 4, 4, 4, 4, 4, 3, 3};
    std::vector<std::string> g;
    for (std::size_t k = 0; k < sizes.size(); ++k)
      for (std::size_t i = 0; i < sizes[k]; ++i) g.emplace_back(kCanonicalGroups[k]);
    return BiomarkerGrouping(std::move(g));
  }

private:
  std::vector<std::string> group_of_;
};

/// CSV `feature_index,group_name`; indices must cover 0..n-1 exactly once.
inline BiomarkerGrouping read_grouping(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::map<std::size_t, std::string> entries;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto fields = text::split_csv(line);
    if (!header) {
      if (fields.size() != 2 || fields[0] != "feature_index" || fields[1] != "group_name")
        throw InputError("expected header feature_index,group_name", lineno);
      header = true;
      continue;
    }
    if (fields.size() != 2) throw InputError("expected 2 fields", lineno);
    const auto idx = text::parse_int(fields[0]);
    if (!idx || *idx < 0) throw InputError("invalid feature_index '" + fields[0] + "'", lineno);
    if (fields[1].empty()) throw InputError("empty group_name", lineno);
    if (!entries.emplace(static_cast<std::size_t>(*idx), fields[1]).second)
      throw InputError("feature_index " + fields[0] + " listed twice", lineno);
  }
  if (entries.empty()) throw InputError("grouping: no features");
  std::vector<std::string> g;
  for (const auto& [i, name] : entries) {
    if (i != g.size()) throw InputError("grouping: feature_index " + std::to_string(g.size()) + " missing");
    g.push_back(name);
  }
  return BiomarkerGrouping(std::move(g));
}

inline BiomarkerGrouping load_grouping(const std::string& path) {
  return detail::with_input_file(path, [](std::istream& in) { return read_grouping(in); });
}

inline void write_grouping(const BiomarkerGrouping& g, std::ostream& out) {
  out << "feature_index,group_name\n";
  for (std::size_t i = 0; i < g.size(); ++i) out << i << ',' << g.group_of(i) << '\n';
}

// ---------------------------------------------------------------------------
// Profile

struct GroupFrequency {
  std::string group;
  double avg_frequency = 0.0;
  double normalized = 0.0;
};

struct ImportanceProfile {
  std::vector<GroupFrequency> groups;
  double max_frequency = 0.0;
  std::size_t folds = 0;
};

/// Per-group sum of member counts, averaged over folds, normalized by the
/// largest group value (all-zero profiles stay zero).
inline ImportanceProfile profile(const std::vector<std::vector<double>>& counts_per_fold,
                                 const BiomarkerGrouping& grouping) {
  if (counts_per_fold.empty()) throw std::invalid_argument("profile: no folds");
  const std::size_t n = counts_per_fold.front().size();
  for (const auto& c : counts_per_fold)
    if (c.size() != n) throw std::invalid_argument("profile: folds differ in length");
  if (grouping.size() > n)
    throw InputError("grouping covers feature " + std::to_string(grouping.size() - 1) + " beyond counts length " +
                     std::to_string(n));
  if (grouping.size() < n)
    throw InputError("grouping covers " + std::to_string(grouping.size()) + " of " + std::to_string(n) + " features");

  const auto names = grouping.groups();
  std::map<std::string, double> sums;
  for (const auto& c : counts_per_fold)
    for (std::size_t i = 0; i < n; ++i) sums[grouping.group_of(i)] += c[i];

  ImportanceProfile p;
  p.folds = counts_per_fold.size();
  for (const auto& g : names) {
    const double avg = sums[g] / static_cast<double>(p.folds);
    p.groups.push_back({g, avg, 0.0});
    p.max_frequency = std::max(p.max_frequency, avg);
  }
  if (p.max_frequency > 0.0)
    for (auto& g : p.groups) g.normalized = g.avg_frequency / p.max_frequency;
  return p;
}

inline void write_radar(const ImportanceProfile& p, std::ostream& out) {
  out << "group,avg_frequency,normalized\n";
  for (const auto& g : p.groups)
    out << g.group << ',' << text::format_roundtrip(g.avg_frequency) << ',' << text::format_roundtrip(g.normalized)
        << '\n';
}

inline void export_radar(const ImportanceProfile& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_radar(p, out);
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline ImportanceProfile parse_radar(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  ImportanceProfile p;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto f = text::split_csv(line);
    if (lineno == 1) {
      if (f.size() != 3 || f[0] != "group" || f[1] != "avg_frequency" || f[2] != "normalized")
        throw InputError("expected header group,avg_frequency,normalized", lineno);
      continue;
    }
    if (f.size() != 3) throw InputError("expected 3 fields", lineno);
    const auto a = text::parse_double(f[1]);
    const auto b = text::parse_double(f[2]);
    if (!a || !b) throw InputError("invalid number", lineno);
    p.groups.push_back({f[0], *a, *b});
    p.max_frequency = std::max(p.max_frequency, *a);
  }
  return p;
}

}  // namespace prognoses
