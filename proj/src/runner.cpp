#include "bhl/runner.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "bhl/io.hpp"

namespace bhl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "bhl 1.0.0";

json fit_to_json(const RateFit& fit) {
  json j;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["r2"] = fit.r2;
  j["excluded"] = fit.excluded;
  j["log_x"] = fit.log_x;
  json pts = json::array();
  for (const auto& p : fit.points) pts.push_back({p[0], p[1]});
  j["points"] = pts;
  return j;
}

json result_to_json(const ExperimentResult& result, const ExperimentConfig& cfg,
                    const std::string& digest) {
  json j;
  j["kind"] = result.kind;
  j["pass"] = result.pass;
  j["pass_note"] = result.pass_note;
  j["config_digest"] = digest;
  j["seed"] = cfg.seed;
  json agg = json::array();
  for (const auto& p : result.aggregate) agg.push_back({p[0], p[1]});
  j["aggregate"] = agg;
  if (result.has_fit) j["fit"] = fit_to_json(result.fit);
  for (const auto& [key, value] : result.info) {
    json parsed = json::parse(value, nullptr, false);
    j["info"][key] = parsed.is_discarded() ? json(value) : parsed;
  }
  return j;
}

ExperimentResult dispatch(const ExperimentConfig& cfg, const std::string& out_dir) {
  switch (cfg.kind) {
    case ExperimentKind::HomogElliptic:
    case ExperimentKind::HomogParabolic:
    case ExperimentKind::Corrector:
    case ExperimentKind::Ergodicity: {
      LadderParams p = cfg.ladder_params;
      p.dump_dir = out_dir;
      p.dump_environment = cfg.dump_environment;
      p.dump_fields = cfg.dump_fields;
      switch (cfg.kind) {
        case ExperimentKind::HomogElliptic: return homog_error_elliptic(p);
        case ExperimentKind::HomogParabolic: return homog_error_parabolic(p);
        case ExperimentKind::Corrector: return corrector_sublinearity(p);
        default: return ergodicity_rate(p);
      }
    }
    case ExperimentKind::MuDecay: return mu_decay(cfg.mu_params);
    case ExperimentKind::Census: return census_experiment(cfg.census_params);
    case ExperimentKind::BerryEsseen: {
      BerryEsseenParams p = cfg.be_params;
      const long horizon =
          cfg.be_ref_horizon > 0
              ? cfg.be_ref_horizon
              : std::max<long>(10000, 4 * static_cast<long>(p.ladder.back()));
      p.coeffs = estimate_effective(p.law, ObservableSpec::constant(1.0), horizon, 16, 4,
                                    hash_combine(p.seed, 0xBEBEBEBEULL));
      return berry_esseen(p);
    }
  }
  throw ConfigError("unknown experiment kind");
}

}  // namespace

std::string config_digest(const std::string& text) {
  // FNV-1a 64.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunOutcome run_config_file(const std::string& config_path, const std::string& output_override,
                           std::ostream* log) {
  RunOutcome outcome;
  const auto t0 = std::chrono::steady_clock::now();
  ConfigFile file;
  ExperimentConfig cfg;
  try {
    file = ConfigFile::parse_file(config_path);
    cfg = load_config(file);
  } catch (const std::exception& e) {
    outcome.exit_code = 1;
    outcome.message = e.what();
    if (log) *log << "error: " << e.what() << "\n";
    return outcome;
  }

  const std::string out_dir = !output_override.empty() ? output_override
                              : !cfg.output.empty()    ? cfg.output
                                                       : "bhl-run";
  try {
    fs::create_directories(out_dir);
    const ExperimentResult result = dispatch(cfg, out_dir);
    const std::string digest = config_digest(file.raw_text());

    {
      std::ofstream csv(fs::path(out_dir) / "table.csv", std::ios::binary);
      result.table.write_csv(csv);
    }
    {
      std::ofstream js(fs::path(out_dir) / "summary.json", std::ios::binary);
      js << result_to_json(result, cfg, digest).dump(2) << "\n";
    }
    {
      json manifest;
      manifest["version"] = kVersion;
      manifest["schema"] = "bhl-config-v1";
      manifest["config_path"] = config_path;
      manifest["config_digest"] = digest;
      manifest["seed"] = cfg.seed;
      manifest["workers"] = cfg.workers;
      manifest["experiment"] = cfg.kind_name;
      manifest["wall_seconds"] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::ofstream js(fs::path(out_dir) / "manifest.json", std::ios::binary);
      js << manifest.dump(2) << "\n";
    }

    outcome.run_dir = out_dir;
    outcome.pass = result.pass;
    outcome.exit_code = result.pass ? 0 : 2;
    outcome.message = result.pass_note;
    if (log) {
      *log << result.kind << ": " << (result.pass ? "PASS" : "FAIL") << " (" << result.pass_note
           << ")\n";
      for (const auto& p : result.aggregate)
        *log << "  scale " << format_double(p[0]) << " -> " << format_double(p[1]) << "\n";
      if (result.has_fit)
        *log << "  fit: slope " << format_double(result.fit.slope) << ", r2 "
             << format_double(result.fit.r2) << "\n";
    }
  } catch (const std::exception& e) {
    outcome.exit_code = 1;
    outcome.message = e.what();
    if (log) *log << "error: " << e.what() << "\n";
  }
  return outcome;
}

ValidationReport validate_config_file(const std::string& config_path) {
  try {
    return validate_config(ConfigFile::parse_file(config_path));
  } catch (const std::exception& e) {
    ValidationReport rep;
    rep.ok = false;
    rep.errors.push_back(e.what());
    return rep;
  }
}

int report_run_dir(const std::string& run_dir, std::ostream& os) {
  const fs::path summary = fs::path(run_dir) / "summary.json";
  std::ifstream in(summary);
  if (!in) {
    os << "error: no summary.json under " << run_dir << "\n";
    return 1;
  }
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    os << "error: unreadable summary: " << e.what() << "\n";
    return 1;
  }
  os << j.value("kind", "?") << " run (seed " << j.value("seed", 0ULL) << ", config "
     << j.value("config_digest", "?") << ")\n";
  os << "  verdict: " << (j.value("pass", false) ? "PASS" : "FAIL") << " -- "
     << j.value("pass_note", "") << "\n";
  if (j.contains("aggregate"))
    for (const auto& p : j["aggregate"])
      os << "  scale " << p[0].get<double>() << " -> " << p[1].get<double>() << "\n";
  if (j.contains("fit"))
    os << "  fit: slope " << j["fit"]["slope"].get<double>() << ", r2 "
       << j["fit"]["r2"].get<double>() << "\n";
  return 0;
}

}  // namespace bhl
