#pragma once

// Clinical data model: lung views, clip feature records, per-patient 30-day
// readmission outcomes, and the validated Cohort built from them.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "prognoses/core/error.hpp"
#include "prognoses/core/text.hpp"

namespace prognoses {

// ---------------------------------------------------------------------------
// Views

enum class ViewId : std::uint8_t { L1, L2, L3, R1, R2, R3 };

inline constexpr std::size_t kNumViews = 6;

/// Canonical order; also the block order of concatenated multi-view vectors.
inline constexpr std::array<ViewId, kNumViews> kAllViews = {ViewId::L1, ViewId::L2, ViewId::L3,
                                                            ViewId::R1, ViewId::R2, ViewId::R3};

enum class LungRegion { UpperAnterior, Lateral, Posterior };

inline constexpr std::size_t view_index(ViewId v) noexcept { return static_cast<std::size_t>(v); }

inline constexpr ViewId mirror(ViewId v) noexcept {
  const auto i = view_index(v);
  return kAllViews[i < 3 ? i + 3 : i - 3];
}

inline constexpr LungRegion region(ViewId v) noexcept {
  switch (view_index(v) % 3) {
    case 0: return LungRegion::UpperAnterior;
    case 1: return LungRegion::Lateral;
    default: return LungRegion::Posterior;
  }
}

inline constexpr std::string_view to_string(ViewId v) noexcept {
  constexpr std::array<std::string_view, kNumViews> names = {"L1", "L2", "L3", "R1", "R2", "R3"};
  return names[view_index(v)];
}

/// Long name as used in result tables ("Left-3").
inline std::string display_name(ViewId v) {
  const auto i = view_index(v);
  return std::string(i < 3 ? "Left-" : "Right-") + std::to_string(i % 3 + 1);
}

inline std::optional<ViewId> parse_view(std::string_view s) noexcept {
  for (ViewId v : kAllViews)
    if (to_string(v) == s) return v;
  return std::nullopt;
}

/// Fixed-size map keyed by view.
template <typename T>
using PerView = std::array<T, kNumViews>;

// ---------------------------------------------------------------------------
// Feature sources

enum class FeatureSource : std::uint8_t { Encoder, Biomarker };

inline constexpr std::size_t feature_dim(FeatureSource s) noexcept {
  return s == FeatureSource::Encoder ? 512 : 38;
}

/// Wire name used in the features file.
inline constexpr std::string_view to_string(FeatureSource s) noexcept {
  return s == FeatureSource::Encoder ? "tsm" : "biomarker";
}

inline std::optional<FeatureSource> parse_source(std::string_view s) noexcept {
  if (s == "tsm") return FeatureSource::Encoder;
  if (s == "biomarker") return FeatureSource::Biomarker;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Records

struct ClipRecord {
  std::string patient_id;
  ViewId view = ViewId::L1;
  int day = 1;
  FeatureSource source = FeatureSource::Encoder;
  std::vector<double> features;

  auto key() const { return std::tie(patient_id, view, day); }
  friend bool operator==(const ClipRecord&, const ClipRecord&) = default;
};

struct PatientOutcome {
  std::string patient_id;
  bool readmitted_30d = false;

  friend bool operator==(const PatientOutcome&, const PatientOutcome&) = default;
};

/// Element-wise mean of records sharing (patient, view, day). The mean is
/// accumulated over the records in sorted feature order so the result does
/// not depend on input order.
inline ClipRecord collapse_clips(std::span<const ClipRecord> records) {
  if (records.empty()) throw std::invalid_argument("collapse_clips: no records");
  const ClipRecord& first = records.front();
  for (const auto& r : records) {
    if (r.patient_id != first.patient_id || r.view != first.view || r.day != first.day)
      throw std::invalid_argument("collapse_clips: records disagree on (patient, view, day)");
    if (r.source != first.source) throw InputError("collapse_clips: mixed feature sources for " +
                                                   first.patient_id + "/" +
                                                   std::string(to_string(first.view)) +
                                                   "/day " + std::to_string(first.day));
    if (r.features.size() != first.features.size())
      throw std::invalid_argument("collapse_clips: feature length mismatch");
  }
  if (records.size() == 1) return first;

  ClipRecord out = first;
  std::vector<double> column(records.size());
  for (std::size_t j = 0; j < first.features.size(); ++j) {
    for (std::size_t k = 0; k < records.size(); ++k) column[k] = records[k].features[j];
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (double x : column) sum += x;
    out.features[j] = sum / static_cast<double>(records.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cohort

/// Validated, immutable set of clip records and outcomes. Records are sorted
/// by (patient_id, view, day) and unique on that key.
class Cohort {
public:
  Cohort(std::vector<ClipRecord> records, std::vector<PatientOutcome> outcomes,
         FeatureSource source)
      : source_(source) {
    if (records.empty()) throw InputError("no records");
    for (const auto& r : records) validate_record(r);

    std::sort(records.begin(), records.end(),
              [](const ClipRecord& a, const ClipRecord& b) { return a.key() < b.key(); });
    for (std::size_t i = 0; i < records.size();) {
      std::size_t j = i + 1;
      while (j < records.size() && records[j].key() == records[i].key()) ++j;
      records_.push_back(collapse_clips(std::span(records).subspan(i, j - i)));
      i = j;
    }

    for (const auto& o : outcomes) {
      if (!labels_.emplace(o.patient_id, o.readmitted_30d).second)
        throw InputError("duplicate outcome for patient " + o.patient_id);
    }
    std::set<std::string> with_records;
    for (const auto& r : records_) {
      with_records.insert(r.patient_id);
      if (!labels_.count(r.patient_id))
        throw InputError("label missing for patient " + r.patient_id);
    }
    for (const auto& [pid, label] : labels_) {
      if (!with_records.count(pid)) throw InputError("label for patient " + pid + " has no records");
      patients_.push_back(pid);
      outcomes_.push_back({pid, label});
    }
  }

  FeatureSource source() const noexcept { return source_; }
  std::size_t dim() const noexcept { return feature_dim(source_); }
  const std::vector<ClipRecord>& records() const noexcept { return records_; }
  const std::vector<PatientOutcome>& outcomes() const noexcept { return outcomes_; }

  /// Patient ids in sorted order.
  const std::vector<std::string>& patients() const noexcept { return patients_; }

  bool label(const std::string& patient_id) const {
    const auto it = labels_.find(patient_id);
    if (it == labels_.end()) throw std::out_of_range("unknown patient " + patient_id);
    return it->second;
  }

  const ClipRecord* find(const std::string& patient_id, ViewId view, int day) const {
    const auto it = std::lower_bound(
        records_.begin(), records_.end(), std::tie(patient_id, view, day),
        [](const ClipRecord& r, const auto& key) { return r.key() < key; });
    if (it == records_.end() || it->key() != std::tie(patient_id, view, day)) return nullptr;
    return &*it;
  }

  /// Ascending days on which the patient has a record for `view`.
  std::vector<int> days(const std::string& patient_id, ViewId view) const {
    std::vector<int> out;
    for (const auto& r : patient_records(patient_id))
      if (r.view == view) out.push_back(r.day);
    return out;
  }

  /// Ascending days on which the patient has a record for any view.
  std::vector<int> days(const std::string& patient_id) const {
    std::set<int> s;
    for (const auto& r : patient_records(patient_id)) s.insert(r.day);
    return {s.begin(), s.end()};
  }

  std::span<const ClipRecord> patient_records(const std::string& patient_id) const {
    const auto lo = std::lower_bound(records_.begin(), records_.end(), patient_id,
                                     [](const ClipRecord& r, const std::string& p) {
                                       return r.patient_id < p;
                                     });
    auto hi = lo;
    while (hi != records_.end() && hi->patient_id == patient_id) ++hi;
    return {lo, hi};
  }

  friend bool operator==(const Cohort& a, const Cohort& b) {
    return a.source_ == b.source_ && a.records_ == b.records_ && a.outcomes_ == b.outcomes_;
  }

private:
  void validate_record(const ClipRecord& r) const {
    if (r.source != source_)
      throw InputError("record for " + r.patient_id + " has source " +
                       std::string(to_string(r.source)) + ", cohort expects " +
                       std::string(to_string(source_)));
    if (r.day < 1) throw InputError("day must be a positive integer");
    if (r.features.size() != feature_dim(source_))
      throw InputError("vector length " + std::to_string(r.features.size()) + " != " +
                       std::to_string(feature_dim(source_)));
    for (double x : r.features)
      if (!std::isfinite(x)) throw InputError("non-finite feature value");
  }

  FeatureSource source_;
  std::vector<ClipRecord> records_;
  std::vector<PatientOutcome> outcomes_;
  std::vector<std::string> patients_;
  std::map<std::string, bool> labels_;
};

// ---------------------------------------------------------------------------
// Parsing and serialization

/// Parses one features-file line. Validation failures carry the line number.
inline ClipRecord parse_clip_line(std::string_view line, std::size_t line_no,
                                  FeatureSource expected) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed JSON: ") + e.what(), line_no);
  }
  if (!j.is_object()) throw InputError("expected a JSON object", line_no);

  auto field = [&](const char* name) -> const nlohmann::json& {
    const auto it = j.find(name);
    if (it == j.end()) throw InputError(std::string("missing field \"") + name + "\"", line_no);
    return *it;
  };

  ClipRecord r;
  const auto& pid = field("patient_id");
  if (!pid.is_string() || pid.get<std::string>().empty())
    throw InputError("patient_id must be a non-empty string", line_no);
  r.patient_id = pid.get<std::string>();

  const auto& view = field("view");
  const auto parsed_view = view.is_string() ? parse_view(view.get<std::string>()) : std::nullopt;
  if (!parsed_view) throw InputError("view must be one of L1,L2,L3,R1,R2,R3", line_no);
  r.view = *parsed_view;

  const auto& day = field("day");
  if (!day.is_number_integer() || day.get<long long>() < 1)
    throw InputError("day must be a positive integer", line_no);
  r.day = static_cast<int>(day.get<long long>());

  const auto& src = field("source");
  const auto parsed_src = src.is_string() ? parse_source(src.get<std::string>()) : std::nullopt;
  if (!parsed_src) throw InputError("source must be \"tsm\" or \"biomarker\"", line_no);
  if (*parsed_src != expected)
    throw InputError("source \"" + std::string(to_string(*parsed_src)) + "\" but cohort expects \"" +
                         std::string(to_string(expected)) + "\"",
                     line_no);
  r.source = *parsed_src;

  const auto& feats = field("features");
  if (!feats.is_array()) throw InputError("features must be an array", line_no);
  if (feats.size() != feature_dim(expected))
    throw InputError("vector length " + std::to_string(feats.size()) + " != " +
                         std::to_string(feature_dim(expected)),
                     line_no);
  r.features.reserve(feats.size());
  for (const auto& x : feats) {
    if (!x.is_number()) throw InputError("features must be numbers", line_no);
    const double v = x.get<double>();
    if (!std::isfinite(v)) throw InputError("non-finite feature value", line_no);
    r.features.push_back(v);
  }
  return r;
}

inline std::vector<ClipRecord> read_features(std::istream& in, FeatureSource source) {
  std::vector<ClipRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    out.push_back(parse_clip_line(line, line_no, source));
  }
  if (out.empty()) throw InputError("no records");
  return out;
}

inline std::optional<bool> parse_label(std::string_view s) noexcept {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  return std::nullopt;
}

inline std::vector<PatientOutcome> read_labels(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  std::vector<PatientOutcome> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto fields = text::split_csv(line);
    if (!header) {
      if (fields.size() != 2 || fields[0] != "patient_id" || fields[1] != "readmitted")
        throw InputError("labels header must be patient_id,readmitted", line_no);
      header = true;
      continue;
    }
    if (fields.size() != 2 || fields[0].empty())
      throw InputError("expected patient_id,readmitted", line_no);
    const auto label = parse_label(fields[1]);
    if (!label)
      throw InputError("label value \"" + fields[1] + "\" not in {0,1,true,false}", line_no);
    out.push_back({fields[0], *label});
  }
  if (!header) throw InputError("labels file is empty");
  return out;
}

inline Cohort load_cohort(std::istream& features, std::istream& labels, FeatureSource source) {
  auto records = read_features(features, source);
  return Cohort(std::move(records), read_labels(labels), source);
}

namespace detail {
template <typename Fn>
auto with_input_file(const std::string& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return fn(in);
  } catch (const InputError& e) {
    throw InputError::in_file(path, e);
  }
}
}  // namespace detail

inline Cohort load_cohort(const std::string& features_path, const std::string& labels_path,
                          FeatureSource source) {
  auto records = detail::with_input_file(
      features_path, [&](std::istream& in) { return read_features(in, source); });
  auto outcomes = detail::with_input_file(labels_path, [](std::istream& in) { return read_labels(in); });
  return Cohort(std::move(records), std::move(outcomes), source);
}

inline void write_features(const Cohort& cohort, std::ostream& out) {
  for (const auto& r : cohort.records()) {
    nlohmann::ordered_json j;
    j["patient_id"] = r.patient_id;
    j["view"] = to_string(r.view);
    j["day"] = r.day;
    j["source"] = to_string(r.source);
    j["features"] = r.features;
    out << j.dump() << '\n';
  }
}

inline void write_labels(const Cohort& cohort, std::ostream& out) {
  out << "patient_id,readmitted\n";
  for (const auto& o : cohort.outcomes()) out << o.patient_id << ',' << (o.readmitted_30d ? 1 : 0) << '\n';
}

// ---------------------------------------------------------------------------
// Summary

struct CohortSummary {
  std::size_t patients = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t records = 0;
  std::map<int, std::size_t> per_day;
  PerView<std::size_t> per_view{};
  /// Patients missing a view on a day they were otherwise scanned.
  std::vector<std::string> warnings;
};

inline CohortSummary summarize(const Cohort& cohort) {
  CohortSummary s;
  s.patients = cohort.patients().size();
  for (const auto& o : cohort.outcomes()) (o.readmitted_30d ? s.positives : s.negatives) += 1;
  s.records = cohort.records().size();
  for (const auto& r : cohort.records()) {
    ++s.per_day[r.day];
    ++s.per_view[view_index(r.view)];
  }
  for (const auto& pid : cohort.patients()) {
    for (int day : cohort.days(pid)) {
      std::string missing;
      for (ViewId v : kAllViews)
        if (!cohort.find(pid, v, day)) missing += (missing.empty() ? "" : ",") + std::string(to_string(v));
      if (!missing.empty())
        s.warnings.push_back(pid + ": day " + std::to_string(day) + " missing views " + missing);
    }
    if (cohort.days(pid).size() < 2) s.warnings.push_back(pid + ": fewer than two scan days");
  }
  return s;
}

}  // namespace prognoses
