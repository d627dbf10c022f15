#pragma once

// Paper-style ablation grids. Every exhibit cell is an ExperimentConfig; equal
// configurations are evaluated once. A cell's seed is derived from the
// ablation seed and a hash of the cell's configuration, so results depend on
// neither scheduling nor which exhibits are requested.

#include <cstddef>
#include <cstdint>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "prognoses/config.hpp"
#include "prognoses/core/parallel.hpp"
#include "prognoses/core/rng.hpp"
#include "prognoses/core/text.hpp"
#include "prognoses/evaluation.hpp"
#include "prognoses/report.hpp"

namespace prognoses {

struct CellResult {
  double f1 = 0.0;
  ConfidenceInterval ci;
  std::size_t n_predictions = 0;
};

/// One table: a header row and data rows of already formatted strings.
struct Exhibit {
  std::string name;  ///< file stem
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> notes;
};

struct PlannedCell {
  std::string exhibit;
  std::string row;
  std::string column;
  bool biomarker = false;
  ExperimentConfig config;
  std::string key;
};

struct AblationOutput {
  std::vector<Exhibit> exhibits;
  std::vector<PlannedCell> cells;
  std::map<std::string, CellResult> results;  ///< by cell key
  std::size_t unique_cells = 0;
};

inline std::string format_cell(const CellResult& r) {
  return text::format_fixed(r.f1, 2) + " [" + text::format_fixed(r.ci.lo, 2) + "–" + text::format_fixed(r.ci.hi, 2) +
         "]";
}

inline constexpr const char* kAllViewsLabel = "All Views";

namespace ablation_detail {

inline std::vector<std::optional<ViewId>> view_rows() {
  std::vector<std::optional<ViewId>> rows(kAllViews.begin(), kAllViews.end());
  rows.push_back(std::nullopt);
  return rows;
}

inline std::string row_label(std::optional<ViewId> v) {
  return v ? std::string(display_name(*v)) : std::string(kAllViewsLabel);
}

class Planner {
public:
  explicit Planner(const AblationConfig& a) : a_(a) {}

  ExperimentConfig base(ClassifierKind k) const {
    ExperimentConfig c;
    c.classifier = k;
    c.grid = a_.grid_for(k);
    c.outer_folds = a_.outer_folds;
    c.bootstrap_iterations = a_.bootstrap_iterations;
    c.bootstrap_unit = a_.bootstrap_unit;
    return c;
  }

  /// Single view, or all views with feature concatenation.
  ExperimentConfig for_row(std::optional<ViewId> v, ClassifierKind k) const {
    auto c = base(k);
    if (v) {
      c.views = {*v};
    } else {
      c.views.assign(kAllViews.begin(), kAllViews.end());
      c.feature_fusion = FeatureFusion::Concatenate;
    }
    return c;
  }

  void add(std::vector<PlannedCell>& cells, const std::string& exhibit, const std::string& row,
           const std::string& column, ExperimentConfig c, bool biomarker) const {
    c.name = exhibit + "/" + row + "/" + column;
    std::string key = (biomarker ? "biomarker|" : "encoder|") + config_key(c);
    c.seed = derive_seed(a_.seed, {fnv1a64(key)});
    c.validate();
    cells.push_back({exhibit, row, column, biomarker, std::move(c), std::move(key)});
  }

private:
  const AblationConfig& a_;
};

struct FusionRow {
  const char* label;
  std::optional<FeatureFusion> feature;
  std::optional<DecisionFusion> decision;
};

inline constexpr FusionRow kFusionRows[] = {
    {"Avg. Features", FeatureFusion::Average, std::nullopt},
    {"Avg. Proba.", std::nullopt, DecisionFusion::AverageProba},
    {"Concatenate", FeatureFusion::Concatenate, std::nullopt},
    {"Max. Features", FeatureFusion::Max, std::nullopt},
    {"Max. Votes", std::nullopt, DecisionFusion::MaxVotes},
};

inline constexpr const char* kDayPairSettings[] = {
    "Day 1 vs Day 2 (Single-Day Model)", "Day 1 vs Day 2 (All-Days Model)", "All Days (All-Days Model)"};

inline void apply_daypair_setting(ExperimentConfig& c, std::size_t setting) {
  c.day_policy = setting == 0 ? DayPairPolicy::FirstPair : DayPairPolicy::AllSequentialPairs;
  c.eval_first_pair_only = setting == 1;
}

inline std::string num(double v) { return text::format_fixed(v, 4); }

}  // namespace ablation_detail

/// All cells of the requested exhibits, in exhibit order.
inline std::vector<PlannedCell> plan_ablation(const AblationConfig& a) {
  using namespace ablation_detail;
  const Planner p(a);
  std::vector<PlannedCell> cells;
  const auto focus = a.focus_classifier;

  if (a.wants("table1"))
    for (auto v : view_rows())
      for (auto k : a.classifiers) p.add(cells, "table1", row_label(v), std::string(display_name(k)), p.for_row(v, k), false);

  if (a.wants("fig3"))
    for (const auto& fr : kFusionRows)
      for (auto t : {TemporalMode::Concatenate, TemporalMode::Difference}) {
        auto c = p.base(focus);
        c.views.assign(kAllViews.begin(), kAllViews.end());
        c.feature_fusion = fr.feature;
        c.decision_fusion = fr.decision;
        c.temporal = t;
        p.add(cells, "fig3", fr.label, t == TemporalMode::Concatenate ? "Concatenate" : "Difference", c, false);
      }

  if (a.wants("fig4"))
    for (auto v : view_rows())
      for (auto t : {TemporalMode::Concatenate, TemporalMode::Difference}) {
        auto c = p.for_row(v, focus);
        c.temporal = t;
        p.add(cells, "fig4", row_label(v), std::string(to_string(t)), c, false);
      }

  if (a.wants("fig5"))
    for (auto v : view_rows())
      for (bool pooled : {false, true}) {
        if (pooled && !v) continue;
        auto c = p.for_row(v, focus);
        c.cross_lung = pooled;
        p.add(cells, "fig5", row_label(v), pooled ? "with" : "without", c, false);
      }

  if (a.wants("table2"))
    for (auto v : view_rows())
      for (std::size_t s = 0; s < std::size(kDayPairSettings); ++s) {
        auto c = p.for_row(v, focus);
        apply_daypair_setting(c, s);
        p.add(cells, "table2", row_label(v), kDayPairSettings[s], c, false);
      }

  if (a.wants("table3"))
    for (bool all_days : {false, true})
      for (std::optional<ViewId> v : {std::optional<ViewId>(ViewId::L3), std::optional<ViewId>(ViewId::R3),
                                      std::optional<ViewId>()}) {
        const auto row = row_label(v) + (all_days ? " (All Days)" : " (Day 1 vs Day 2)");
        for (auto k : a.classifiers) {
          auto c = p.for_row(v, k);
          if (all_days) c.day_policy = DayPairPolicy::AllSequentialPairs;
          p.add(cells, "table3", row, std::string(display_name(k)), c, true);
        }
      }
  return cells;
}

/// Biomarker cohort for table3: the configured one, or the synthetic
/// generator re-run at 38 dimensions.
inline std::optional<DataSpec> biomarker_spec(const AblationConfig& a) {
  if (a.biomarker_data) return a.biomarker_data;
  if (a.data.synthetic) {
    DataSpec d = a.data;
    d.synthetic->dim = feature_dim(FeatureSource::Biomarker);
    d.source = FeatureSource::Biomarker;
    return d;
  }
  return std::nullopt;
}

namespace ablation_detail {

inline Exhibit build_exhibit(const std::string& name, const AblationConfig& a, const std::vector<PlannedCell>& cells,
                             const std::map<std::string, CellResult>& results) {
  auto lookup = [&](const std::string& row, const std::string& col) -> const CellResult* {
    for (const auto& c : cells)
      if (c.exhibit == name && c.row == row && c.column == col) return &results.at(c.key);
    return nullptr;
  };
  Exhibit e;
  e.name = name;
  if (name == "table1" || name == "table3") {
    e.name = name == "table1" ? "table1_view_classifier" : "table3_biomarker";
    e.title = name == "table1" ? "View-wise classifier comparison (Day 1 vs Day 2, difference, no cross-lung)"
                               : "Biomarker features (difference, no cross-lung)";
    e.header = {"view"};
    for (auto k : a.classifiers) e.header.emplace_back(display_name(k));
    std::vector<std::string> rows;
    for (const auto& c : cells)
      if (c.exhibit == name && std::find(rows.begin(), rows.end(), c.row) == rows.end()) rows.push_back(c.row);
    for (const auto& r : rows) {
      std::vector<std::string> line{r};
      for (auto k : a.classifiers) line.push_back(format_cell(*lookup(r, std::string(display_name(k)))));
      e.rows.push_back(line);
    }
  } else if (name == "fig3") {
    e.name = "fig3_fusion_heatmap";
    e.title = std::string("Fusion strategy vs temporal representation (All Views, ") +
              std::string(display_name(a.focus_classifier)) + "), weighted F1";
    e.header = {"fusion", "Concatenate", "Difference"};
    for (const auto& fr : kFusionRows)
      e.rows.push_back({fr.label, text::format_fixed(lookup(fr.label, "Concatenate")->f1, 2),
                        text::format_fixed(lookup(fr.label, "Difference")->f1, 2)});
  } else if (name == "fig4") {
    e.name = "fig4_temporal_bars";
    e.title = "Temporal concatenation vs difference (" + std::string(display_name(a.focus_classifier)) + ")";
    e.header = {"view", "concatenate_f1", "concatenate_lo", "concatenate_hi",
                "difference_f1", "difference_lo", "difference_hi"};
    for (auto v : view_rows()) {
      const auto r = row_label(v);
      const auto* c = lookup(r, "concatenate");
      const auto* d = lookup(r, "difference");
      e.rows.push_back({r, num(c->f1), num(c->ci.lo), num(c->ci.hi), num(d->f1), num(d->ci.lo), num(d->ci.hi)});
    }
  } else if (name == "fig5") {
    e.name = "fig5_crosslung_bars";
    e.title = "Cross-lung training (" + std::string(display_name(a.focus_classifier)) + ", Day 1 vs Day 2, difference)";
    e.header = {"view", "without_f1", "without_lo", "without_hi", "with_f1", "with_lo", "with_hi"};
    for (auto v : view_rows()) {
      const auto r = row_label(v);
      const auto* wo = lookup(r, "without");
      const auto* w = lookup(r, "with");
      std::vector<std::string> line{r, num(wo->f1), num(wo->ci.lo), num(wo->ci.hi)};
      for (int i = 0; i < 3; ++i) line.push_back(w ? num(i == 0 ? w->f1 : i == 1 ? w->ci.lo : w->ci.hi) : "NA");
      e.rows.push_back(line);
    }
    e.notes.push_back("All Views: cross-lung pooling applies to single-view models only (NA).");
  } else if (name == "table2") {
    e.name = "table2_daypair";
    e.title = "Day-pair modeling (" + std::string(display_name(a.focus_classifier)) + ", difference, no cross-lung)";
    e.header = {"view"};
    for (const auto* s : kDayPairSettings) e.header.emplace_back(s);
    for (auto v : view_rows()) {
      const auto r = row_label(v);
      std::vector<std::string> line{r};
      for (const auto* s : kDayPairSettings) line.push_back(format_cell(*lookup(r, s)));
      e.rows.push_back(line);
    }
  }
  return e;
}

}  // namespace ablation_detail

/// Runs every requested exhibit. Cells run concurrently up to `jobs`;
/// output does not depend on `jobs`. A failing cell aborts the run with its
/// coordinates in the message.
inline AblationOutput run_ablation(const AblationConfig& a, std::size_t jobs = 1,
                                   const std::function<void(const PlannedCell&, const CellResult&)>& on_cell = {}) {
  AblationOutput out;
  auto cells = plan_ablation(a);

  std::optional<Cohort> encoder, biomarker;
  bool needs_encoder = false, needs_biomarker = false;
  for (const auto& c : cells) (c.biomarker ? needs_biomarker : needs_encoder) = true;
  if (needs_encoder) encoder = a.data.load();
  std::vector<std::string> notes;
  if (needs_biomarker) {
    if (const auto spec = biomarker_spec(a)) {
      biomarker = spec->load();
      if (biomarker->source() != FeatureSource::Biomarker)
        throw InputError("biomarker_data: expected 38-dimensional biomarker features");
    } else {
      std::erase_if(cells, [](const PlannedCell& c) { return c.biomarker; });
      notes.push_back("table3 skipped: no biomarker_data configured");
    }
  }

  std::vector<const PlannedCell*> unique;
  {
    std::set<std::string> seen;
    for (const auto& c : cells)
      if (seen.insert(c.key).second) unique.push_back(&c);
  }
  std::vector<CellResult> results(unique.size());
  parallel_for(unique.size(), jobs, [&](std::size_t i) {
    const auto& cell = *unique[i];
    const Cohort& cohort = cell.biomarker ? *biomarker : *encoder;
    const auto where = cell.exhibit + "[" + cell.row + ", " + cell.column + "]: ";
    try {
      const auto report = nested_cv(cell.config, cohort, 1);
      results[i] = {report.f1, report.ci, report.predictions.size()};
    } catch (const InputError& e) {
      throw InputError(where + e.what());
    } catch (const std::exception& e) {
      throw std::runtime_error(where + e.what());
    }
    if (on_cell) on_cell(cell, results[i]);
  });
  for (std::size_t i = 0; i < unique.size(); ++i) out.results[unique[i]->key] = results[i];
  out.unique_cells = unique.size();

  for (auto name : kExhibits) {
    const bool present = std::any_of(cells.begin(), cells.end(), [&](const PlannedCell& c) { return c.exhibit == name; });
    if (present) out.exhibits.push_back(ablation_detail::build_exhibit(std::string(name), a, cells, out.results));
  }
  if (!notes.empty()) out.exhibits.push_back({"notes", "", {}, {}, notes});
  out.cells = std::move(cells);
  return out;
}

// ---------------------------------------------------------------------------
// Rendering

inline void write_csv(const Exhibit& e, std::ostream& out) {
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const bool quote = fields[i].find_first_of(",\"") != std::string::npos;
      if (i) out << ',';
      if (quote) {
        out << '"';
        for (char ch : fields[i]) out << (ch == '"' ? "\"\"" : std::string(1, ch));
        out << '"';
      } else {
        out << fields[i];
      }
    }
    out << '\n';
  };
  line(e.header);
  for (const auto& r : e.rows) line(r);
}

/// Display width of a UTF-8 string (code points).
inline std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char ch : s) n += (ch & 0xC0) != 0x80;
  return n;
}

inline void write_text(const Exhibit& e, const std::string& digest, std::ostream& out) {
  out << e.title << '\n' << "config digest " << digest << "\n\n";
  std::vector<std::size_t> width(e.header.size(), 0);
  auto measure = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) width[i] = std::max(width[i], display_width(r[i]));
  };
  measure(e.header);
  for (const auto& r : e.rows) measure(r);
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      out << r[i];
      if (i + 1 < r.size()) out << std::string(width[i] - display_width(r[i]) + 2, ' ');
    }
    out << '\n';
  };
  line(e.header);
  std::size_t total = 0;
  for (auto w : width) total += w + 2;
  out << std::string(total > 2 ? total - 2 : 0, '-') << '\n';
  for (const auto& r : e.rows) line(r);
  for (const auto& n : e.notes) out << '\n' << n << '\n';
}

inline nlohmann::ordered_json cells_json(const AblationOutput& o, const std::string& digest) {
  nlohmann::ordered_json j;
  j["format"] = "prognoses.ablation_cells/1";
  j["config_digest"] = digest;
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& c : o.cells) {
    const auto& r = o.results.at(c.key);
    cells.push_back({{"exhibit", c.exhibit},
                     {"row", c.row},
                     {"column", c.column},
                     {"source", c.biomarker ? "biomarker" : "tsm"},
                     {"seed", c.config.seed},
                     {"config", to_json(c.config)},
                     {"weighted_f1", r.f1},
                     {"ci", {{"lo", r.ci.lo}, {"hi", r.ci.hi}}},
                     {"n_predictions", r.n_predictions}});
  }
  j["cells"] = cells;
  j["unique_cells"] = o.unique_cells;
  return j;
}

/// Writes `<stem>.csv` and `<stem>.txt` per exhibit plus `cells.json`;
/// returns the written paths.
inline std::vector<std::filesystem::path> write_ablation(const AblationOutput& o, const std::filesystem::path& dir,
                                                         const std::string& digest) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto open = [&](const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    written.push_back(p);
    return f;
  };
  for (const auto& e : o.exhibits) {
    if (e.name == "notes") {
      auto f = open(dir / "notes.txt");
      for (const auto& n : e.notes) f << n << '\n';
      continue;
    }
    {
      auto f = open(dir / (e.name + ".csv"));
      write_csv(e, f);
    }
    auto f = open(dir / (e.name + ".txt"));
    write_text(e, digest, f);
  }
  auto f = open(dir / "cells.json");
  f << cells_json(o, digest).dump(2) << '\n';
  return written;
}

}  // namespace prognoses
