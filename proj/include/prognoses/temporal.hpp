#pragma once

// Sequential day-pairs per patient and view, and their temporal
// representations (later-minus-earlier difference or chronological
// concatenation).

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "prognoses/cohort.hpp"

namespace prognoses {

enum class DayPairPolicy {
  FirstPair,           ///< exactly days (1, 2)
  AllSequentialPairs,  ///< every consecutive pair of the patient's available days
};

enum class TemporalMode { Difference, Concatenate };

inline constexpr std::string_view to_string(DayPairPolicy p) noexcept {
  return p == DayPairPolicy::FirstPair ? "first_pair" : "all_sequential_pairs";
}

inline constexpr std::string_view to_string(TemporalMode m) noexcept {
  return m == TemporalMode::Difference ? "difference" : "concatenate";
}

inline constexpr std::size_t represented_dim(std::size_t d, TemporalMode m) noexcept {
  return m == TemporalMode::Difference ? d : 2 * d;
}

/// Difference: b - a (later minus earlier). Concatenate: [a | b].
inline std::vector<double> represent(std::span<const double> earlier, std::span<const double> later,
                                     TemporalMode mode) {
  if (earlier.size() != later.size())
    throw std::invalid_argument("represent: dimension mismatch (" + std::to_string(earlier.size()) +
                                " vs " + std::to_string(later.size()) + ")");
  std::vector<double> out;
  if (mode == TemporalMode::Difference) {
    out.resize(earlier.size());
    for (std::size_t i = 0; i < earlier.size(); ++i) out[i] = later[i] - earlier[i];
  } else {
    out.reserve(2 * earlier.size());
    out.insert(out.end(), earlier.begin(), earlier.end());
    out.insert(out.end(), later.begin(), later.end());
  }
  return out;
}

/// Consecutive pairs over an ascending day list under `policy`.
inline std::vector<std::pair<int, int>> sequential_pairs(std::span<const int> days,
                                                         DayPairPolicy policy) {
  std::vector<std::pair<int, int>> out;
  if (policy == DayPairPolicy::FirstPair) {
    bool has1 = false, has2 = false;
    for (int d : days) {
      has1 |= d == 1;
      has2 |= d == 2;
    }
    if (has1 && has2) out.emplace_back(1, 2);
    return out;
  }
  for (std::size_t i = 1; i < days.size(); ++i) out.emplace_back(days[i - 1], days[i]);
  return out;
}

/// One day-pair for a single view. The vectors point into the cohort.
struct DayPair {
  std::string patient_id;
  int day_a = 0;
  int day_b = 0;
  std::span<const double> earlier;
  std::span<const double> later;
  bool label = false;
};

struct DayPairSet {
  std::vector<DayPair> pairs;
  std::vector<std::string> warnings;
  /// Pairs whose days are not adjacent integers, e.g. (1, 3).
  std::size_t gap_pairs = 0;
};

inline DayPairSet build_day_pairs(const Cohort& cohort, ViewId view, DayPairPolicy policy,
                                  std::span<const std::string> patients) {
  DayPairSet out;
  for (const auto& pid : patients) {
    const auto days = cohort.days(pid, view);
    const auto pairs = sequential_pairs(days, policy);
    if (pairs.empty()) {
      out.warnings.push_back(pid + ": no " + std::string(to_string(policy)) + " day-pair for view " +
                             std::string(to_string(view)));
      continue;
    }
    for (const auto& [a, b] : pairs) {
      if (b - a > 1) ++out.gap_pairs;
      out.pairs.push_back({pid, a, b, cohort.find(pid, view, a)->features,
                           cohort.find(pid, view, b)->features, cohort.label(pid)});
    }
  }
  return out;
}

inline DayPairSet build_day_pairs(const Cohort& cohort, ViewId view, DayPairPolicy policy) {
  return build_day_pairs(cohort, view, policy, cohort.patients());
}

/// A labeled unit for training or evaluation. `view` is empty for samples
/// fused over several views.
struct DayPairSample {
  std::string patient_id;
  std::optional<ViewId> view;
  int day_a = 0;
  int day_b = 0;
  std::vector<double> vector;
  bool label = false;

  friend bool operator==(const DayPairSample&, const DayPairSample&) = default;
};

/// Single-view samples for the given patients.
inline std::vector<DayPairSample> build_samples(const Cohort& cohort, ViewId view,
                                                DayPairPolicy policy, TemporalMode mode,
                                                std::span<const std::string> patients,
                                                std::vector<std::string>* warnings = nullptr) {
  auto set = build_day_pairs(cohort, view, policy, patients);
  if (warnings) warnings->insert(warnings->end(), set.warnings.begin(), set.warnings.end());
  std::vector<DayPairSample> out;
  out.reserve(set.pairs.size());
  for (const auto& p : set.pairs)
    out.push_back({p.patient_id, view, p.day_a, p.day_b, represent(p.earlier, p.later, mode), p.label});
  return out;
}

}  // namespace prognoses
