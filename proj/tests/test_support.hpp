#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "prognoses/cohort.hpp"
#include "prognoses/core/rng.hpp"
#include "prognoses/learners/common.hpp"

namespace prognoses::testing {

inline ClipRecord record(const std::string& pid, ViewId v, int day, std::vector<double> f,
                         FeatureSource s = FeatureSource::Biomarker) {
  return {pid, v, day, s, std::move(f)};
}

/// Biomarker-dim cohort: every patient has all six views on `days`, features
/// drawn from N(0,1). Patient i is positive when i < positives.
inline Cohort random_cohort(std::size_t patients, std::size_t positives, std::vector<int> days,
                            std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ClipRecord> recs;
  std::vector<PatientOutcome> outs;
  for (std::size_t i = 0; i < patients; ++i) {
    const std::string pid = "P" + std::to_string(100 + i);
    outs.push_back({pid, i < positives});
    for (int d : days)
      for (ViewId v : kAllViews) {
        std::vector<double> f(38);
        for (auto& x : f) x = rng.normal();
        recs.push_back(record(pid, v, d, std::move(f)));
      }
  }
  return Cohort(std::move(recs), std::move(outs), FeatureSource::Biomarker);
}

struct Data {
  Matrix x;
  Labels y;
};

/// Two Gaussian blobs along the first axis, centers 2 apart plus a gap so
/// the classes are separable.
inline Data blobs(std::size_t n, std::uint64_t seed, std::size_t d = 2) {
  Rng rng(seed);
  Data out{Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d)), Labels(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = i % 2 == 0;
    out.y[i] = pos;
    for (std::size_t j = 0; j < d; ++j) out.x(i, j) = 0.3 * rng.normal();
    const double c = std::clamp(out.x(i, 0), -0.9, 0.9);
    out.x(i, 0) = (pos ? 2.0 : -2.0) + c;
  }
  return out;
}

/// Four clusters at (+-1, +-1); label = sign(x0) != sign(x1).
inline Data xor_data(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Data out{Matrix(static_cast<Eigen::Index>(n), 2), Labels(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double a = (i % 2) ? 1.0 : -1.0;
    const double b = ((i / 2) % 2) ? 1.0 : -1.0;
    out.x(i, 0) = a + 0.2 * rng.normal();
    out.x(i, 1) = b + 0.2 * rng.normal();
    out.y[i] = (a > 0) != (b > 0);
  }
  return out;
}

inline double accuracy(const std::vector<double>& p, const Labels& y) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hit += (p[i] >= 0.5) == (y[i] != 0);
  return static_cast<double>(hit) / static_cast<double>(y.size());
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("prognoses_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

}  // namespace prognoses::testing
