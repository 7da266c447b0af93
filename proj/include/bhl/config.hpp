#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bhl/environment.hpp"
#include "bhl/experiments.hpp"

namespace bhl {

// Plain-text key/value config: one `key = value` per line, '#' comments,
// dotted keys for grouping. The schema (configs/schema-v1.txt) is versioned
// in-repo and every file must declare `schema = bhl-config-v1`.
class ConfigFile {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_text(const std::string& text, const std::string& name = "<inline>");

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::string& name() const { return name_; }
  const std::string& raw_text() const { return raw_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  std::string where(const std::string& key) const;  // "file:line"
  std::string get_string(const std::string& key) const;
  std::string get_string_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  long get_long_or(const std::string& key, long fallback) const;
  std::uint64_t get_u64(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;

 private:
  std::string name_;
  std::string raw_;
  std::map<std::string, Entry> entries_;
};

enum class ExperimentKind {
  HomogElliptic,
  HomogParabolic,
  Corrector,
  Ergodicity,
  BerryEsseen,
  MuDecay,
  Census,
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::HomogElliptic;
  std::string kind_name;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string output;

  EnvironmentLaw law = EnvironmentLaw::constant(2, 1.0);
  ObservableSpec psi = ObservableSpec::constant(0.0);

  LadderParams ladder_params;       // ladder-style experiments
  BerryEsseenParams be_params;      // berry_esseen (coeffs filled at run time)
  MuDecayParams mu_params;          // mu_decay
  CensusParams census_params;       // census
  long be_ref_horizon = 0;

  bool dump_environment = false;
  bool dump_fields = false;
};

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> errors;
};

// Schema and invariant checks only; no computation.
ValidationReport validate_config(const ConfigFile& file);

// Parse + validate, throwing ConfigError with a line-precise message on the
// first failure.
ExperimentConfig load_config(const ConfigFile& file);

// Named catalog entries for the data functions (regularity is guaranteed by
// construction: every entry is smooth on the relevant closed domain).
PointFn make_point_fn(const std::string& spec, int dim);
PointFn make_boundary_fn(const std::string& spec, int dim);
SpaceTimeFn make_spacetime_fn(const std::string& spec, int dim);

}  // namespace bhl
