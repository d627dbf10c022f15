#pragma once

// Synthetic multi-view longitudinal cohorts with planted effects, plus a
// Monte-Carlo estimate of the weighted F1 reached by the Bayes-optimal rule.
//
// Generative model, per patient i:
//   label_i    ~ Bernoulli(prevalence)
//   s_i        ~ Normal(static_effect * label_i, 1)
//   s_{i,t}    = s_i + trajectory_effect * label_i * (t - 1) + Normal(0, day_noise_variance)
//   x_{i,v,t}  = signal_gain * strength_v * s_{i,t} * u_v + Normal(0, noise_sigma^2 I)
// where u_1..u_6 are orthonormal directions drawn from the seed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "prognoses/cohort.hpp"
#include "prognoses/core/error.hpp"
#include "prognoses/core/rng.hpp"
#include "prognoses/fusion.hpp"
#include "prognoses/metrics.hpp"

namespace prognoses {

struct GeneratorParams {
  std::size_t n_patients = 30;
  double prevalence = 0.3;
  std::size_t dim = 512;
  std::vector<int> days = {1, 2};
  PerView<double> view_strength = {0.25, 0.5, 1.0, 0.25, 0.5, 1.0};
  double trajectory_effect = 2.0;
  double noise_sigma = 1.0;
  double static_effect = 2.0;
  /// Common multiplier on every view strength.
  double signal_gain = 1.0;
  double day_noise_variance = 0.1;
  std::uint64_t seed = 0;

  FeatureSource source() const {
    if (dim == feature_dim(FeatureSource::Encoder)) return FeatureSource::Encoder;
    if (dim == feature_dim(FeatureSource::Biomarker)) return FeatureSource::Biomarker;
    throw InputError("dim must be 512 (tsm) or 38 (biomarker)");
  }

  void validate() const {
    if (n_patients == 0) throw InputError("n_patients must be positive");
    if (!(prevalence * static_cast<double>(n_patients) >= 1.0)) throw InputError("prevalence·n_patients ≥ 1");
    if (!(prevalence > 0.0 && prevalence < 1.0)) throw InputError("prevalence must lie in (0,1)");
    (void)source();
    if (days.empty()) throw InputError("days must be non-empty");
    for (std::size_t i = 0; i < days.size(); ++i) {
      if (days[i] < 1) throw InputError("days must be positive integers");
      if (i > 0 && days[i] <= days[i - 1]) throw InputError("days must be strictly increasing");
    }
    for (double a : view_strength)
      if (!(a >= 0.0) || !std::isfinite(a)) throw InputError("view strengths must be finite and ≥ 0");
    if (!(noise_sigma > 0.0) || !std::isfinite(noise_sigma)) throw InputError("noise_sigma must be > 0");
    if (!(signal_gain >= 0.0) || !std::isfinite(signal_gain)) throw InputError("signal_gain must be ≥ 0");
    if (!(day_noise_variance >= 0.0)) throw InputError("day_noise_variance must be ≥ 0");
    if (!std::isfinite(trajectory_effect) || !std::isfinite(static_effect))
      throw InputError("effects must be finite");
  }

  /// mu = 2, tau = 2, sigma = 1 on 38-d features, view strengths tripled.
  static GeneratorParams easy(std::uint64_t seed) {
    GeneratorParams p;
    p.dim = 38;
    p.signal_gain = 3.0;
    p.static_effect = 2.0;
    p.trajectory_effect = 2.0;
    p.noise_sigma = 1.0;
    p.seed = seed;
    return p;
  }

  /// All label signal in the trajectory: mu = 0, tau = 2, sigma = 1.
  static GeneratorParams trajectory_only(std::uint64_t seed) {
    auto p = easy(seed);
    p.static_effect = 0.0;
    return p;
  }
};

struct PatientTruth {
  std::string patient_id;
  bool label = false;
  double baseline = 0.0;
  std::map<int, double> severity;
};

struct GroundTruth {
  GeneratorParams params;
  PerView<std::vector<double>> directions;
  std::vector<PatientTruth> patients;
};

struct SyntheticCohort {
  Cohort cohort;
  GroundTruth truth;
};

inline std::string synthetic_patient_id(std::size_t i, std::size_t n) {
  const std::size_t width = std::max<std::size_t>(3, std::to_string(n).size());
  std::string num = std::to_string(i + 1);
  return "P" + std::string(width - num.size(), '0') + num;
}

/// Orthonormal directions via Gram-Schmidt over seeded Gaussian vectors.
inline PerView<std::vector<double>> view_directions(std::size_t dim, std::uint64_t seed) {
  if (dim < kNumViews) throw InputError("dim must be at least 6");
  Rng rng(derive_seed(seed, {1}));
  PerView<std::vector<double>> u;
  for (std::size_t v = 0; v < kNumViews; ++v) {
    for (;;) {
      std::vector<double> x(dim);
      for (auto& e : x) e = rng.normal();
      for (std::size_t w = 0; w < v; ++w) {
        double dot = 0.0;
        for (std::size_t k = 0; k < dim; ++k) dot += x[k] * u[w][k];
        for (std::size_t k = 0; k < dim; ++k) x[k] -= dot * u[w][k];
      }
      double norm = 0.0;
      for (double e : x) norm += e * e;
      norm = std::sqrt(norm);
      if (norm < 1e-6) continue;
      for (auto& e : x) e /= norm;
      u[v] = std::move(x);
      break;
    }
  }
  return u;
}

inline SyntheticCohort generate(const GeneratorParams& params) {
  params.validate();
  const auto source = params.source();
  GroundTruth truth{params, view_directions(params.dim, params.seed), {}};

  Rng label_rng(derive_seed(params.seed, {2}));
  std::vector<ClipRecord> records;
  std::vector<PatientOutcome> outcomes;
  for (std::size_t i = 0; i < params.n_patients; ++i) {
    PatientTruth pt;
    pt.patient_id = synthetic_patient_id(i, params.n_patients);
    pt.label = label_rng.bernoulli(params.prevalence);
    outcomes.push_back({pt.patient_id, pt.label});
    truth.patients.push_back(std::move(pt));
  }

  const double y_day_sd = std::sqrt(params.day_noise_variance);
  for (std::size_t i = 0; i < params.n_patients; ++i) {
    auto& pt = truth.patients[i];
    const double y = pt.label ? 1.0 : 0.0;
    Rng rng(derive_seed(params.seed, {3, i}));
    pt.baseline = rng.normal(params.static_effect * y, 1.0);
    for (int t : params.days) {
      const double s = pt.baseline + params.trajectory_effect * y * (t - 1) + y_day_sd * rng.normal();
      pt.severity[t] = s;
      for (ViewId v : kAllViews) {
        const double amp = params.signal_gain * params.view_strength[view_index(v)] * s;
        ClipRecord r{pt.patient_id, v, t, source, std::vector<double>(params.dim)};
        const auto& u = truth.directions[view_index(v)];
        for (std::size_t k = 0; k < params.dim; ++k) r.features[k] = amp * u[k] + params.noise_sigma * rng.normal();
        records.push_back(std::move(r));
      }
    }
  }
  return {Cohort(std::move(records), std::move(outcomes), source), std::move(truth)};
}

inline nlohmann::json to_json(const GeneratorParams& p) {
  nlohmann::json strengths;
  for (ViewId v : kAllViews) strengths[std::string(to_string(v))] = p.view_strength[view_index(v)];
  return {{"n_patients", p.n_patients},
          {"prevalence", p.prevalence},
          {"dim", p.dim},
          {"days", p.days},
          {"view_strength", strengths},
          {"trajectory_effect", p.trajectory_effect},
          {"noise_sigma", p.noise_sigma},
          {"static_effect", p.static_effect},
          {"signal_gain", p.signal_gain},
          {"day_noise_variance", p.day_noise_variance},
          {"seed", p.seed}};
}

/// Reads generator parameters; absent keys keep their defaults.
inline GeneratorParams generator_params_from_json(const nlohmann::json& j) {
  GeneratorParams p;
  if (!j.is_object()) throw InputError("generator params must be a JSON object");
  auto num = [&](const char* key, auto& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number()) throw InputError(std::string(key) + ": expected a number");
    using T = std::decay_t<decltype(out)>;
    if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || v.get<long long>() < 0)
        throw InputError(std::string(key) + ": expected a non-negative integer");
      out = v.get<T>();
    } else {
      out = v.get<double>();
    }
  };
  num("n_patients", p.n_patients);
  num("prevalence", p.prevalence);
  num("dim", p.dim);
  num("trajectory_effect", p.trajectory_effect);
  num("noise_sigma", p.noise_sigma);
  num("static_effect", p.static_effect);
  num("signal_gain", p.signal_gain);
  num("day_noise_variance", p.day_noise_variance);
  num("seed", p.seed);
  if (j.contains("days")) {
    const auto& d = j.at("days");
    if (!d.is_array()) throw InputError("days: expected an array of integers");
    p.days.clear();
    for (const auto& x : d) {
      if (!x.is_number_integer()) throw InputError("days: expected integers");
      p.days.push_back(x.get<int>());
    }
  }
  if (j.contains("view_strength")) {
    const auto& s = j.at("view_strength");
    if (!s.is_object()) throw InputError("view_strength: expected an object keyed by view");
    for (const auto& [k, v] : s.items()) {
      const auto view = parse_view(k);
      if (!view) throw InputError("view_strength." + k + ": unknown view");
      if (!v.is_number()) throw InputError("view_strength." + k + ": expected a number");
      p.view_strength[view_index(*view)] = v.get<double>();
    }
  }
  return p;
}

inline nlohmann::json to_json(const GroundTruth& t) {
  nlohmann::json dirs;
  for (ViewId v : kAllViews) dirs[std::string(to_string(v))] = t.directions[view_index(v)];
  nlohmann::json patients = nlohmann::json::array();
  for (const auto& p : t.patients) {
    nlohmann::json sev;
    for (const auto& [day, s] : p.severity) sev[std::to_string(day)] = s;
    patients.push_back({{"patient_id", p.patient_id}, {"readmitted", p.label}, {"baseline_severity", p.baseline},
                        {"severity_by_day", sev}});
  }
  return {{"format", "prognoses.ground_truth/1"},
          {"params", to_json(t.params)},
          {"directions", dirs},
          {"patients", patients}};
}

// ---------------------------------------------------------------------------
// Bayes oracle

/// Sample construction evaluated by the Bayes oracle. Day-pair (1, 2).
struct BayesRepresentation {
  enum class Temporal { Difference, Concatenate, FirstDayOnly };
  std::vector<ViewId> views = {kAllViews.begin(), kAllViews.end()};
  Temporal temporal = Temporal::Difference;
  /// Multi-view combination; Max is nonlinear and not supported.
  FeatureFusion fusion = FeatureFusion::Concatenate;
};

namespace detail {

// Class-conditional Gaussian N(label * slope, cov) of a representation
// projected onto the signal subspace. Components orthogonal to the view
// directions are label-independent noise, independent of these coordinates,
// and are dropped.
struct ReducedGaussian {
  Eigen::VectorXd slope;
  Eigen::MatrixXd cov;
};

inline ReducedGaussian reduce(const GeneratorParams& p, const BayesRepresentation& rep) {
  if (rep.views.empty()) throw std::invalid_argument("bayes_f1: no views");
  if (rep.views.size() > 1 && rep.fusion == FeatureFusion::Max)
    throw std::invalid_argument("bayes_f1: max fusion is not linear-Gaussian");
  const std::size_t nv = rep.views.size();
  // Latent noise coordinates: xi0, eta_1, eta_2, then e[w][t][v].
  const std::size_t n_noise = 3 + nv * 2 * nv;
  Eigen::VectorXd noise_var(static_cast<Eigen::Index>(n_noise));
  noise_var(0) = 1.0;
  noise_var(1) = noise_var(2) = p.day_noise_variance;
  for (std::size_t k = 3; k < n_noise; ++k) noise_var(static_cast<Eigen::Index>(k)) = p.noise_sigma * p.noise_sigma;

  struct Linear {
    double slope = 0.0;
    Eigen::VectorXd coef;
  };
  auto e_index = [&](std::size_t w, int t, std::size_t v) { return 3 + (w * 2 + static_cast<std::size_t>(t - 1)) * nv + v; };
  // <x_{w,t}, u_v>
  auto projection = [&](std::size_t w, int t, std::size_t v) {
    Linear l{0.0, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_noise))};
    if (w == v) {
      const double amp = p.signal_gain * p.view_strength[view_index(rep.views[w])];
      l.slope = amp * (p.static_effect + p.trajectory_effect * (t - 1));
      l.coef(0) = amp;
      l.coef(t) = amp;
    }
    l.coef(static_cast<Eigen::Index>(e_index(w, t, v))) += 1.0;
    return l;
  };
  auto combine = [](const Linear& a, double ca, const Linear& b, double cb) {
    return Linear{ca * a.slope + cb * b.slope, ca * a.coef + cb * b.coef};
  };
  // Per-view temporal representation projected on u_v.
  auto temporal = [&](std::size_t w, std::size_t v) {
    std::vector<Linear> out;
    switch (rep.temporal) {
      case BayesRepresentation::Temporal::Difference:
        out.push_back(combine(projection(w, 2, v), 1.0, projection(w, 1, v), -1.0));
        break;
      case BayesRepresentation::Temporal::Concatenate:
        out.push_back(projection(w, 1, v));
        out.push_back(projection(w, 2, v));
        break;
      case BayesRepresentation::Temporal::FirstDayOnly:
        out.push_back(projection(w, 1, v));
        break;
    }
    return out;
  };

  std::vector<Linear> coords;
  if (nv == 1 || rep.fusion == FeatureFusion::Concatenate) {
    for (std::size_t w = 0; w < nv; ++w)
      for (auto& c : temporal(w, w)) coords.push_back(std::move(c));
  } else {
    for (std::size_t v = 0; v < nv; ++v) {
      std::vector<Linear> acc = temporal(0, v);
      for (std::size_t w = 1; w < nv; ++w) {
        const auto add = temporal(w, v);
        for (std::size_t k = 0; k < acc.size(); ++k) acc[k] = combine(acc[k], 1.0, add[k], 1.0);
      }
      for (auto& c : acc) coords.push_back(combine(c, 1.0 / static_cast<double>(nv), c, 0.0));
    }
  }

  const auto m = static_cast<Eigen::Index>(coords.size());
  Eigen::MatrixXd b(m, static_cast<Eigen::Index>(n_noise));
  ReducedGaussian g{Eigen::VectorXd(m), Eigen::MatrixXd()};
  for (Eigen::Index k = 0; k < m; ++k) {
    g.slope(k) = coords[static_cast<std::size_t>(k)].slope;
    b.row(k) = coords[static_cast<std::size_t>(k)].coef.transpose();
  }
  g.cov = b * noise_var.asDiagonal() * b.transpose();
  return g;
}

}  // namespace detail

/// Weighted F1 of the minimum-error (MAP) rule on `rep`, by Monte Carlo over
/// n_mc simulated patients. Class-conditionals share one covariance, so the
/// rule is linear and its discriminant is a 1-d Gaussian per class.
inline double bayes_f1(const GeneratorParams& params, const BayesRepresentation& rep, std::size_t n_mc,
                       std::uint64_t mc_seed = 0) {
  params.validate();
  if (n_mc < 10000) throw std::invalid_argument("bayes_f1: n_mc must be at least 1e4");
  if (params.days.size() < 2 || params.days[0] != 1 || params.days[1] != 2)
    throw std::invalid_argument("bayes_f1: generator must emit days 1 and 2");
  const auto g = detail::reduce(params, rep);
  const Eigen::VectorXd w = g.cov.ldlt().solve(g.slope);
  const double mean0 = 0.0;
  const double mean1 = w.dot(g.slope);
  const double sd = std::sqrt(std::max(0.0, w.dot(g.cov * w)));
  const double prior_logit = std::log(params.prevalence / (1.0 - params.prevalence));
  // log-odds = w.(r - slope/2) + prior_logit, with w.r the discriminant.
  const double offset = -0.5 * mean1 + prior_logit;

  Rng rng(mc_seed);
  std::vector<std::uint8_t> y(n_mc), yhat(n_mc);
  for (std::size_t i = 0; i < n_mc; ++i) {
    const bool label = rng.bernoulli(params.prevalence);
    const double s = (label ? mean1 : mean0) + sd * rng.normal();
    y[i] = label;
    yhat[i] = s + offset >= 0.0;
  }
  return weighted_f1(y, yhat);
}

}  // namespace prognoses
