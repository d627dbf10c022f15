#pragma once

// Multi-view combination: feature-level fusion of per-view temporal vectors,
// decision-level fusion of per-view probabilities, and left/right cross-lung
// training augmentation.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "prognoses/cohort.hpp"
#include "prognoses/temporal.hpp"

namespace prognoses {

enum class FeatureFusion { Average, Max, Concatenate };
enum class DecisionFusion { MaxVotes, AverageProba };
enum class MissingViewPolicy { Skip, ZeroImpute };

inline constexpr std::string_view to_string(FeatureFusion f) noexcept {
  switch (f) {
    case FeatureFusion::Average: return "average";
    case FeatureFusion::Max: return "max";
    default: return "concatenate";
  }
}

inline constexpr std::string_view to_string(DecisionFusion f) noexcept {
  return f == DecisionFusion::MaxVotes ? "max_votes" : "average_proba";
}

inline constexpr std::string_view to_string(MissingViewPolicy p) noexcept {
  return p == MissingViewPolicy::Skip ? "skip" : "zero_impute";
}

namespace detail {
// Sum in ascending order so the result is invariant to the order of `xs`.
inline double sorted_sum(std::span<double> xs) {
  std::sort(xs.begin(), xs.end());
  double s = 0.0;
  for (double x : xs) s += x;
  return s;
}
}  // namespace detail

/// Fuses per-view vectors (an empty span marks a missing view) over `views`.
/// Returns nullopt when a selected view is missing under the Skip policy.
inline std::optional<std::vector<double>> fuse_features(
    const PerView<std::span<const double>>& per_view, std::span<const ViewId> views,
    FeatureFusion strategy, MissingViewPolicy policy = MissingViewPolicy::Skip) {
  std::size_t dim = 0;
  std::vector<ViewId> present;
  for (ViewId v : views) {
    const auto& x = per_view[view_index(v)];
    if (x.empty()) continue;
    if (dim != 0 && x.size() != dim)
      throw std::invalid_argument("fuse_features: views have different dimensions");
    dim = x.size();
    present.push_back(v);
  }
  if (present.empty()) throw std::invalid_argument("fuse_features: zero present views");
  if (present.size() != views.size() && policy == MissingViewPolicy::Skip) return std::nullopt;

  std::vector<double> out;
  if (strategy == FeatureFusion::Concatenate) {
    out.assign(views.size() * dim, 0.0);
    // Fixed block order L1,L2,L3,R1,R2,R3 regardless of the order of `views`.
    std::vector<ViewId> ordered(views.begin(), views.end());
    std::sort(ordered.begin(), ordered.end());
    for (std::size_t b = 0; b < ordered.size(); ++b) {
      const auto& x = per_view[view_index(ordered[b])];
      std::copy(x.begin(), x.end(), out.begin() + static_cast<std::ptrdiff_t>(b * dim));
    }
    return out;
  }

  out.resize(dim);
  std::vector<double> column(present.size());
  for (std::size_t j = 0; j < dim; ++j) {
    for (std::size_t k = 0; k < present.size(); ++k) column[k] = per_view[view_index(present[k])][j];
    if (strategy == FeatureFusion::Max)
      out[j] = *std::max_element(column.begin(), column.end());
    else
      out[j] = detail::sorted_sum(column) / static_cast<double>(present.size());
  }
  return out;
}

inline std::optional<std::vector<double>> fuse_features(
    const PerView<std::span<const double>>& per_view, FeatureFusion strategy,
    MissingViewPolicy policy = MissingViewPolicy::Skip) {
  return fuse_features(per_view, kAllViews, strategy, policy);
}

inline std::size_t fused_dim(std::size_t d, std::size_t n_views, FeatureFusion f) noexcept {
  return f == FeatureFusion::Concatenate ? n_views * d : d;
}

struct FusedDecision {
  bool label = false;
  double proba = 0.0;
};

/// Combines per-view positive-class probabilities. MaxVotes: majority of
/// thresholded views, proba = vote fraction; a tied vote falls back to the
/// mean probability (strictly above threshold for a positive label).
inline FusedDecision fuse_decisions(std::span<const double> probas, DecisionFusion strategy,
                                    double threshold = 0.5) {
  if (probas.empty()) throw std::invalid_argument("fuse_decisions: empty input");
  std::vector<double> sorted(probas.begin(), probas.end());
  for (double p : sorted)
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("fuse_decisions: probability outside [0,1]");
  const double n = static_cast<double>(sorted.size());
  const double mean = detail::sorted_sum(sorted) / n;

  if (strategy == DecisionFusion::AverageProba) return {mean >= threshold, mean};

  std::size_t votes = 0;
  for (double p : sorted) votes += p >= threshold;
  const double fraction = static_cast<double>(votes) / n;
  if (2 * votes > sorted.size()) return {true, fraction};
  if (2 * votes < sorted.size()) return {false, fraction};
  return {mean > threshold, fraction};
}

/// Training augmentation for a single-view model on `target`: the result is
/// the target-view samples plus mirror-view samples relabeled as `target`.
/// Identity when disabled. Never apply to evaluation sets.
inline std::vector<DayPairSample> cross_lung_expand(std::span<const DayPairSample> train,
                                                    ViewId target, bool enabled) {
  for (const auto& s : train)
    if (!s.view) throw std::invalid_argument("cross_lung_expand: fused multi-view sample");
  if (!enabled) return {train.begin(), train.end()};
  std::vector<DayPairSample> out;
  for (const auto& s : train)
    if (*s.view == target) out.push_back(s);
  for (const auto& s : train) {
    if (*s.view != mirror(target)) continue;
    out.push_back(s);
    out.back().view = target;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Multi-view day-pairs

/// Temporal representations of every selected view for one (patient, pair).
/// Views lacking either day hold an empty vector.
struct MultiViewPair {
  std::string patient_id;
  int day_a = 0;
  int day_b = 0;
  bool label = false;
  PerView<std::vector<double>> views;

  bool complete(std::span<const ViewId> selected) const {
    return std::all_of(selected.begin(), selected.end(),
                       [&](ViewId v) { return !views[view_index(v)].empty(); });
  }

  PerView<std::span<const double>> spans() const {
    PerView<std::span<const double>> out;
    for (std::size_t i = 0; i < kNumViews; ++i) out[i] = views[i];
    return out;
  }
};

/// Day pairs come from the union of the patient's scan days over `views`.
inline std::vector<MultiViewPair> build_multiview_pairs(const Cohort& cohort,
                                                        std::span<const ViewId> views,
                                                        DayPairPolicy policy, TemporalMode mode,
                                                        std::span<const std::string> patients) {
  std::vector<MultiViewPair> out;
  for (const auto& pid : patients) {
    std::set<int> day_set;
    for (ViewId v : views)
      for (int d : cohort.days(pid, v)) day_set.insert(d);
    const std::vector<int> days(day_set.begin(), day_set.end());
    for (const auto& [a, b] : sequential_pairs(days, policy)) {
      MultiViewPair p{pid, a, b, cohort.label(pid), {}};
      for (ViewId v : views) {
        const auto* ra = cohort.find(pid, v, a);
        const auto* rb = cohort.find(pid, v, b);
        if (ra && rb) p.views[view_index(v)] = represent(ra->features, rb->features, mode);
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

/// Feature-fused samples; pairs skipped under the Skip policy are reported.
inline std::vector<DayPairSample> build_fused_samples(std::span<const MultiViewPair> pairs,
                                                      std::span<const ViewId> views,
                                                      FeatureFusion strategy,
                                                      MissingViewPolicy policy,
                                                      std::vector<std::string>* warnings = nullptr) {
  std::vector<DayPairSample> out;
  for (const auto& p : pairs) {
    bool any = false;
    for (ViewId v : views) any |= !p.views[view_index(v)].empty();
    std::optional<std::vector<double>> fused;
    if (any) fused = fuse_features(p.spans(), views, strategy, policy);
    if (!fused) {
      if (warnings)
        warnings->push_back(p.patient_id + ": day-pair (" + std::to_string(p.day_a) + "," +
                            std::to_string(p.day_b) + ") skipped, missing views");
      continue;
    }
    out.push_back({p.patient_id, std::nullopt, p.day_a, p.day_b, std::move(*fused), p.label});
  }
  return out;
}

}  // namespace prognoses
