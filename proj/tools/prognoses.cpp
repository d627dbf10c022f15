// prognoses command-line entry point.
//
// Exit codes: 0 success, 1 runtime failure, 2 input or schema error.

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "prognoses/ablation.hpp"
#include "prognoses/cohort.hpp"
#include "prognoses/config.hpp"
#include "prognoses/core/error.hpp"
#include "prognoses/core/text.hpp"
#include "prognoses/evaluation.hpp"
#include "prognoses/importance.hpp"
#include "prognoses/report.hpp"
#include "prognoses/synthcohort.hpp"
#include "prognoses/version.hpp"

namespace fs = std::filesystem;
using namespace prognoses;

namespace {

struct Common {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  std::string log_level = "info";
};

/// Flag beats PROGNOSES_SEED beats the config value.
std::uint64_t effective_seed(const Common& c, std::uint64_t from_config) {
  if (c.seed) return *c.seed;
  if (const char* env = std::getenv("PROGNOSES_SEED"); env && *env) {
    const auto v = text::parse_int(env);
    if (!v || *v < 0) throw InputError(std::string("PROGNOSES_SEED: not a non-negative integer: ") + env);
    return static_cast<std::uint64_t>(*v);
  }
  return from_config;
}

std::string hex_digest(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

void write_manifest(const fs::path& dir, const std::string& command, const std::string& digest, std::uint64_t seed,
                    std::time_t started, const std::vector<fs::path>& outputs) {
  nlohmann::ordered_json m;
  m["format"] = "prognoses.manifest/1";
  m["tool_version"] = kVersion;
  m["command"] = command;
  m["config_digest"] = digest;
  m["seed"] = seed;
  m["started"] = utc_timestamp(started);
  m["finished"] = utc_timestamp(std::time(nullptr));
  nlohmann::ordered_json paths = nlohmann::ordered_json::array();
  for (const auto& p : outputs) paths.push_back(p.filename().string());
  m["outputs"] = paths;
  open_out(dir / "manifest.json") << m.dump(2) << '\n';
}

void print_summary(const Cohort& cohort) {
  const auto s = summarize(cohort);
  std::cout << "patients=" << s.patients << " positive=" << s.positives << " negative=" << s.negatives
            << " records=" << s.records << " source=" << to_string(cohort.source()) << '\n';
  std::cout << "per_day";
  for (const auto& [day, n] : s.per_day) std::cout << ' ' << day << '=' << n;
  std::cout << "\nper_view";
  for (ViewId v : kAllViews) std::cout << ' ' << to_string(v) << '=' << s.per_view[view_index(v)];
  std::cout << '\n';
  for (const auto& w : s.warnings) std::cout << "warning: " << w << '\n';
}

int cmd_validate(const Common& c, const std::string& features, const std::string& labels, const std::string& source) {
  if (!c.config.empty()) {
    const auto file = read_config_file(c.config);
    const auto rc = parse_run_config(file.json, file.dir);
    print_summary(rc.data.load());
    return 0;
  }
  if (features.empty() || labels.empty()) throw InputError("validate needs --config or --features and --labels");
  const auto src = parse_source(source);
  if (!src) throw InputError("unknown --source \"" + source + "\" (expected tsm or biomarker)");
  print_summary(load_cohort(features, labels, *src));
  return 0;
}

int cmd_synth(const Common& c) {
  const auto started = std::time(nullptr);
  GeneratorParams p;
  std::string digest = hex_digest("");
  if (!c.config.empty()) {
    const auto file = read_config_file(c.config);
    p = generator_params_from_json(file.json);
    digest = hex_digest(file.bytes);
  }
  p.seed = effective_seed(c, p.seed);
  const auto sc = generate(p);
  const fs::path out(c.out);
  fs::create_directories(out);
  std::vector<fs::path> written = {out / "features.jsonl", out / "labels.csv", out / "ground_truth.json"};
  {
    auto f = open_out(written[0]);
    write_features(sc.cohort, f);
  }
  {
    auto f = open_out(written[1]);
    write_labels(sc.cohort, f);
  }
  open_out(written[2]) << to_json(sc.truth).dump(2) << '\n';
  write_manifest(out, "synth", digest, p.seed, started, written);
  spdlog::info("wrote {} records for {} patients to {}", sc.cohort.records().size(), sc.cohort.patients().size(),
               out.string());
  return 0;
}

int cmd_run(const Common& c) {
  const auto started = std::time(nullptr);
  if (c.config.empty()) throw InputError("run needs --config");
  const auto file = read_config_file(c.config);
  auto rc = parse_run_config(file.json, file.dir);
  rc.experiment.seed = effective_seed(c, rc.seed);
  const auto cohort = rc.data.load();
  spdlog::info("cohort: {} patients, {} records, dim {}", cohort.patients().size(), cohort.records().size(),
               cohort.dim());
  const auto report = nested_cv(rc.experiment, cohort, c.jobs);
  const fs::path out(c.out);
  fs::create_directories(out);
  std::vector<fs::path> written = {out / "report.json", out / "predictions.csv"};
  auto j = to_json(report, started, std::time(nullptr));
  j["config_digest"] = hex_digest(file.bytes);
  open_out(written[0]) << j.dump(2) << '\n';
  {
    auto f = open_out(written[1]);
    write_predictions_csv(report, f);
  }
  if (!report.folds.empty() && !report.folds.front().importance.empty()) {
    written.push_back(out / "importance_counts.csv");
    auto f = open_out(written.back());
    write_importance_csv(report, f);
  }
  write_manifest(out, "run", hex_digest(file.bytes), rc.experiment.seed, started, written);
  for (const auto& w : report.warnings) spdlog::warn("{}", w);
  if (!report.audit_result.passed)
    for (const auto& v : report.audit_result.violations) spdlog::error("audit: {}", v);
  std::cout << "weighted_f1=" << text::format_fixed(report.f1, 4) << " ci=[" << text::format_fixed(report.ci.lo, 4)
            << ", " << text::format_fixed(report.ci.hi, 4) << "] n=" << report.predictions.size()
            << " evaluation_dim=" << report.evaluation_dim << '\n';
  return report.audit_result.passed ? 0 : 1;
}

int cmd_ablate(const Common& c) {
  const auto started = std::time(nullptr);
  if (c.config.empty()) throw InputError("ablate needs --config");
  const auto file = read_config_file(c.config);
  auto a = parse_ablation_config(file.json, file.dir);
  a.seed = effective_seed(c, a.seed);
  const auto digest = hex_digest(file.bytes);
  const auto output = run_ablation(a, c.jobs, [](const PlannedCell& cell, const CellResult& r) {
    spdlog::debug("{} [{}, {}]: {:.4f}", cell.exhibit, cell.row, cell.column, r.f1);
  });
  const fs::path out(c.out);
  const auto written = write_ablation(output, out, digest);
  write_manifest(out, "ablate", digest, a.seed, started, written);
  spdlog::info("{} cells ({} unique) written to {}", output.cells.size(), output.unique_cells, out.string());
  return 0;
}

int cmd_importance(const Common& c, std::string report_path, std::string grouping_path) {
  const auto started = std::time(nullptr);
  std::string digest = hex_digest("");
  if (!c.config.empty()) {
    const auto file = read_config_file(c.config);
    const auto& j = file.json;
    if (!j.is_object()) throw InputError("config: <root>: expected an object");
    for (const auto& [k, v] : j.items())
      if (k != "report" && k != "grouping") throw InputError("config: " + k + ": unknown field");
    if (report_path.empty() && j.contains("report"))
      report_path = config_detail::resolve(file.dir, config_detail::get_string(j.at("report"), "report")).string();
    if (grouping_path.empty() && j.contains("grouping"))
      grouping_path = config_detail::resolve(file.dir, config_detail::get_string(j.at("grouping"), "grouping")).string();
    digest = hex_digest(file.bytes);
  }
  if (report_path.empty()) throw InputError("importance needs a report (--report or config field report)");
  nlohmann::json report;
  {
    std::ifstream in(report_path);
    if (!in) throw InputError("cannot open " + report_path);
    try {
      in >> report;
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(report_path + ": invalid JSON: " + e.what());
    }
  }
  const auto counts = importance_from_report(report);
  const auto grouping = grouping_path.empty() ? BiomarkerGrouping::placeholder() : load_grouping(grouping_path);
  const auto prof = profile(counts, grouping);
  const fs::path out(c.out);
  fs::create_directories(out);
  const auto radar = out / "radar.csv";
  export_radar(prof, radar.string());
  write_manifest(out, "importance", digest, 0, started, {radar});
  for (const auto& g : prof.groups)
    std::cout << g.group << ": " << text::format_fixed(g.avg_frequency, 3) << " (" << text::format_fixed(g.normalized, 3)
              << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view longitudinal readmission modeling"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Common common;
  std::string features, labels, source = "tsm", report_path, grouping_path;

  auto add_common = [&](CLI::App* sub, bool out, bool jobs) {
    sub->add_option("--config", common.config, "configuration file (JSON)");
    if (out) sub->add_option("--out", common.out, "output directory");
    sub->add_option("--seed", common.seed, "seed (overrides PROGNOSES_SEED and the config)");
    if (jobs) sub->add_option("--jobs", common.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--log-level", common.log_level, "trace, debug, info, warn, error or off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));
  };

  auto* validate = app.add_subcommand("validate", "check a cohort and print its summary");
  add_common(validate, false, false);
  validate->add_option("--features", features, "features JSONL");
  validate->add_option("--labels", labels, "labels CSV");
  validate->add_option("--source", source, "tsm or biomarker");
  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  add_common(synth, true, false);
  auto* run = app.add_subcommand("run", "nested cross-validation of one configuration");
  add_common(run, true, true);
  auto* ablate = app.add_subcommand("ablate", "ablation grid with paper-style exhibits");
  add_common(ablate, true, true);
  auto* importance = app.add_subcommand("importance", "biomarker-group radar data from a forest run");
  add_common(importance, true, false);
  importance->add_option("--report", report_path, "report.json of a RandomForest run");
  importance->add_option("--grouping", grouping_path, "CSV feature_index,group_name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto logger = spdlog::stderr_color_mt("prognoses");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::from_str(common.log_level));

  try {
    if (*validate) return cmd_validate(common, features, labels, source);
    if (*synth) return cmd_synth(common);
    if (*run) return cmd_run(common);
    if (*ablate) return cmd_ablate(common);
    if (*importance) return cmd_importance(common, report_path, grouping_path);
  } catch (const InputError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 1;
}
