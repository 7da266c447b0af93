#include "bhl/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace bhl {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

const char* kSchema = "bhl-config-v1";

}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str(), path);
}

ConfigFile ConfigFile::parse_text(const std::string& text, const std::string& name) {
  ConfigFile cfg;
  cfg.name_ = name;
  cfg.raw_ = text;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(name + ":" + std::to_string(lineno) + ": expected `key = value`");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(name + ":" + std::to_string(lineno) + ": empty key");
    if (cfg.entries_.count(key))
      throw ConfigError(name + ":" + std::to_string(lineno) + ": duplicate key `" + key + "`");
    cfg.entries_[key] = {value, lineno};
  }
  return cfg;
}

std::string ConfigFile::where(const std::string& key) const {
  const auto it = entries_.find(key);
  return name_ + ":" + (it == entries_.end() ? "?" : std::to_string(it->second.line));
}

std::string ConfigFile::get_string(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end())
    throw ConfigError(name_ + ": missing required field `" + key + "`");
  return it->second.value;
}

std::string ConfigFile::get_string_or(const std::string& key, const std::string& fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second.value;
}

double ConfigFile::get_double(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(where(key) + ": `" + key + "` must be a number, got `" + v + "`");
  }
}

double ConfigFile::get_double_or(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

long ConfigFile::get_long_or(const std::string& key, long fallback) const {
  if (!has(key)) return fallback;
  const double d = get_double(key);
  if (d != std::floor(d))
    throw ConfigError(where(key) + ": `" + key + "` must be an integer");
  return static_cast<long>(d);
}

std::uint64_t ConfigFile::get_u64(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    std::size_t used = 0;
    const unsigned long long u = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<std::uint64_t>(u);
  } catch (const std::exception&) {
    throw ConfigError(where(key) + ": `" + key + "` must be a nonnegative integer, got `" + v + "`");
  }
}

std::vector<double> ConfigFile::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const std::string& part : split(get_string(key), ',')) {
    if (part.empty()) continue;
    try {
      out.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw ConfigError(where(key) + ": `" + key + "` must be a comma-separated number list");
    }
  }
  if (out.empty()) throw ConfigError(where(key) + ": `" + key + "` is empty");
  return out;
}

namespace {

ObservableSpec parse_observable(const std::string& spec, const ConfigFile& file,
                                const std::string& key) {
  const std::size_t colon = spec.find(':');
  const std::string head = colon == std::string::npos ? spec : spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  auto need_arg = [&]() {
    if (arg.empty())
      throw ConfigError(file.where(key) + ": observable `" + head + "` needs an argument");
    return std::stod(arg);
  };
  if (head == "const") return ObservableSpec::constant(need_arg());
  if (head == "trace") return ObservableSpec::trace();
  if (head == "inv_trace") return ObservableSpec::inv_trace();
  if (head == "coord_ratio") return ObservableSpec::coord_ratio(static_cast<int>(need_arg()) - 1);
  if (head == "indicator") return ObservableSpec::indicator_w1_above(need_arg());
  if (head == "psi_over_trace") {
    if (arg.empty())
      throw ConfigError(file.where(key) + ": psi_over_trace needs an inner observable");
    return ObservableSpec::psi_over_trace(parse_observable(arg, file, key));
  }
  throw ConfigError(file.where(key) + ": unknown observable `" + spec + "`");
}

std::vector<double> parse_args(const std::string& arg) {
  std::vector<double> out;
  for (const std::string& p : split(arg, ','))
    if (!p.empty()) out.push_back(std::stod(p));
  return out;
}

}  // namespace

PointFn make_point_fn(const std::string& spec, int dim) {
  const std::size_t colon = spec.find(':');
  const std::string head = colon == std::string::npos ? spec : spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (head == "zero") return [](const std::array<double, 3>&) { return 0.0; };
  if (head == "constant") {
    const double c = std::stod(arg);
    return [c](const std::array<double, 3>&) { return c; };
  }
  if (head == "affine") {
    const std::vector<double> a = parse_args(arg);
    return [a, dim](const std::array<double, 3>& x) {
      double v = 0;
      for (int i = 0; i < dim && i < static_cast<int>(a.size()); ++i) v += a[i] * x[i];
      return v;
    };
  }
  if (head == "radial_quadratic") {
    return [dim](const std::array<double, 3>& x) {
      double v = 0;
      for (int i = 0; i < dim; ++i) v += x[i] * x[i];
      return v;
    };
  }
  throw ConfigError("unknown data function `" + spec + "`");
}

PointFn make_boundary_fn(const std::string& spec, int dim) {
  const std::size_t colon = spec.find(':');
  const std::string head = colon == std::string::npos ? spec : spec.substr(0, colon);
  if (head == "cosine") return [](const std::array<double, 3>& y) { return y[0]; };
  if (head == "second_harmonic") {
    if (dim < 2) throw ConfigError("second_harmonic boundary data needs d >= 2");
    return [](const std::array<double, 3>& y) { return y[0] * y[0] - y[1] * y[1]; };
  }
  return make_point_fn(spec, dim);
}

SpaceTimeFn make_spacetime_fn(const std::string& spec, int dim) {
  const std::size_t colon = spec.find(':');
  const std::string head = colon == std::string::npos ? spec : spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (head == "heat") {
    const double c = std::stod(arg);
    return [c, dim](const std::array<double, 3>& y, double t) {
      double v = 0;
      for (int i = 0; i < dim; ++i) v += y[i] * y[i];
      return v + c * t;
    };
  }
  if (head == "time_ramp") {
    const double c = std::stod(arg);
    return [c](const std::array<double, 3>&, double t) { return c * t; };
  }
  const PointFn base = make_point_fn(spec, dim);
  return [base](const std::array<double, 3>& y, double) { return base(y); };
}

namespace {

const std::map<std::string, ExperimentKind>& kind_table() {
  static const std::map<std::string, ExperimentKind> table = {
      {"homog_elliptic", ExperimentKind::HomogElliptic},
      {"homog_parabolic", ExperimentKind::HomogParabolic},
      {"corrector", ExperimentKind::Corrector},
      {"ergodicity", ExperimentKind::Ergodicity},
      {"berry_esseen", ExperimentKind::BerryEsseen},
      {"mu_decay", ExperimentKind::MuDecay},
      {"census", ExperimentKind::Census},
  };
  return table;
}

EnvironmentLaw parse_law(const ConfigFile& file) {
  const std::string family = file.get_string("law.family");
  const int dim = static_cast<int>(file.get_double("law.dim"));
  try {
    if (family == "constant") return EnvironmentLaw::constant(dim, file.get_double("law.value"));
    if (family == "uniform")
      return EnvironmentLaw::uniform(dim, file.get_double("law.lo"), file.get_double("law.hi"));
    if (family == "two_point")
      return EnvironmentLaw::two_point(dim, file.get_double("law.v1"), file.get_double("law.v2"),
                                       file.get_double("law.p"));
  } catch (const ConfigError& e) {
    throw ConfigError(file.where("law.family") + ": " + e.what());
  }
  throw ConfigError(file.where("law.family") + ": unknown law family `" + family + "`");
}

}  // namespace

ExperimentConfig load_config(const ConfigFile& file) {
  if (file.get_string_or("schema", "") != kSchema)
    throw ConfigError(file.name() + ": missing or unsupported `schema` (expected " +
                      std::string(kSchema) + ")");
  static const std::vector<std::string> known = {
      "schema",       "experiment",   "seed",          "workers",     "output",
      "law.family",   "law.dim",      "law.value",     "law.lo",      "law.hi",
      "law.v1",       "law.v2",       "law.p",         "psi",         "f",
      "g",            "ladder",       "levels",        "replicas",    "walks",
      "environments", "direction",    "s",             "R",           "gamma",
      "threshold_c",  "alpha",        "keep_flags",    "solver.tol",  "solver.max_iters",
      "ref.horizon",  "ref.replicas", "ref.walks",     "grid.h",      "grid.dt",
      "dump.environment", "dump.fields"};
  for (const auto& [key, entry] : file.entries())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError(file.name() + ":" + std::to_string(entry.line) +
                        ": unknown field `" + key + "` (see configs/schema-v1.txt)");
  ExperimentConfig cfg;
  cfg.kind_name = file.get_string("experiment");
  const auto kind_it = kind_table().find(cfg.kind_name);
  if (kind_it == kind_table().end())
    throw ConfigError(file.where("experiment") + ": unknown experiment `" + cfg.kind_name + "`");
  cfg.kind = kind_it->second;

  if (!file.has("seed")) throw ConfigError(file.name() + ": missing required field `seed`");
  cfg.seed = file.get_u64("seed");
  cfg.workers = static_cast<int>(file.get_long_or("workers", 1));
  if (cfg.workers < 1) throw ConfigError(file.where("workers") + ": workers must be >= 1");
  cfg.output = file.get_string_or("output", "");

  cfg.law = parse_law(file);
  cfg.psi = file.has("psi") ? parse_observable(file.get_string("psi"), file, "psi")
                            : ObservableSpec::constant(0.0);
  if (cfg.psi.kind == ObservableSpec::Kind::CoordRatio &&
      (cfg.psi.axis < 0 || cfg.psi.axis >= cfg.law.dim))
    throw ConfigError(file.where("psi") + ": coord_ratio axis out of range for d = " +
                      std::to_string(cfg.law.dim));

  cfg.dump_environment = file.get_long_or("dump.environment", 0) != 0;
  cfg.dump_fields = file.get_long_or("dump.fields", 0) != 0;

  SolverOptions solver;
  solver.tol = file.get_double_or("solver.tol", 1e-10);
  solver.max_iters = file.get_long_or("solver.max_iters", 0);
  if (!(solver.tol > 0)) throw ConfigError(file.where("solver.tol") + ": tolerance must be > 0");

  const bool parabolic = cfg.kind == ExperimentKind::HomogParabolic;
  if (parabolic && !(cfg.law.two_sided_kappa() > 0))
    throw ConfigError(file.where("law.family") +
                      ": parabolic experiments require the two-sided bound kI <= w <= I/k "
                      "(bounded weights with positive minimum)");
  if ((cfg.kind == ExperimentKind::HomogElliptic || parabolic) && cfg.law.dim > 2)
    throw ConfigError(file.where("law.dim") +
                      ": homogenization experiments need d <= 2 (continuum solver limit)");

  switch (cfg.kind) {
    case ExperimentKind::HomogElliptic:
    case ExperimentKind::HomogParabolic:
    case ExperimentKind::Corrector:
    case ExperimentKind::Ergodicity: {
      LadderParams& p = cfg.ladder_params;
      p.law = cfg.law;
      p.psi = cfg.psi;
      p.ladder = file.get_double_list("ladder");
      p.replicas = static_cast<int>(file.get_long_or("replicas", 8));
      p.seed = cfg.seed;
      p.workers = cfg.workers;
      p.solver = solver;
      p.ref_horizon = file.get_long_or("ref.horizon", 0);
      p.ref_replicas = static_cast<int>(file.get_long_or("ref.replicas", 32));
      p.ref_walks = static_cast<int>(file.get_long_or("ref.walks", 4));
      p.grid_h = file.get_double_or("grid.h", 1.0 / 64.0);
      p.grid_dt = file.get_double_or("grid.dt", 0.0);
      p.walks = file.get_long_or("walks", 1000);
      if (p.replicas < 1) throw ConfigError(file.where("replicas") + ": replicas must be >= 1");
      if (cfg.kind == ExperimentKind::HomogElliptic) {
        p.f = make_point_fn(file.get_string_or("f", "zero"), cfg.law.dim);
        p.g = make_boundary_fn(file.get_string("g"), cfg.law.dim);
      } else if (cfg.kind == ExperimentKind::HomogParabolic) {
        p.f_t = make_spacetime_fn(file.get_string_or("f", "zero"), cfg.law.dim);
        p.g_t = make_spacetime_fn(file.get_string("g"), cfg.law.dim);
      }
      break;
    }
    case ExperimentKind::BerryEsseen: {
      BerryEsseenParams& p = cfg.be_params;
      p.law = cfg.law;
      p.ladder = file.get_double_list("ladder");
      p.walks = file.get_long_or("walks", 100000);
      p.environments = static_cast<int>(file.get_long_or("environments", 1));
      p.seed = cfg.seed;
      p.workers = cfg.workers;
      if (file.has("direction")) {
        const std::vector<double> dir = file.get_double_list("direction");
        double nrm = 0;
        p.direction = {0, 0, 0};
        for (std::size_t i = 0; i < dir.size() && i < 3; ++i) {
          p.direction[i] = dir[i];
          nrm += dir[i] * dir[i];
        }
        if (std::fabs(nrm - 1.0) > 1e-9)
          throw ConfigError(file.where("direction") + ": direction must be a unit vector");
      }
      cfg.be_ref_horizon = file.get_long_or("ref.horizon", 0);
      break;
    }
    case ExperimentKind::MuDecay: {
      MuDecayParams& p = cfg.mu_params;
      p.law = cfg.law;
      p.psi = cfg.psi;
      for (double v : file.get_double_list("levels"))
        p.levels.push_back(static_cast<int>(v));
      p.s = file.get_double_or("s", 0.0);
      p.replicas = static_cast<int>(file.get_long_or("replicas", 16));
      p.seed = cfg.seed;
      p.workers = cfg.workers;
      p.solver = solver;
      p.ref_horizon = file.get_long_or("ref.horizon", 0);
      p.ref_replicas = static_cast<int>(file.get_long_or("ref.replicas", 32));
      p.ref_walks = static_cast<int>(file.get_long_or("ref.walks", 4));
      break;
    }
    case ExperimentKind::Census: {
      CensusParams& p = cfg.census_params;
      p.law = cfg.law;
      p.psi = cfg.psi;
      p.R = file.get_double("R");
      p.gamma = file.get_double_or("gamma", 0.4);
      p.threshold_c = file.get_double_or("threshold_c", 1.0);
      p.alpha = file.get_double_or("alpha", 0.2);
      p.seed = cfg.seed;
      p.workers = cfg.workers;
      p.keep_flags = file.get_long_or("keep_flags", 0) != 0;
      if (!(p.gamma > 0 && p.gamma < 0.5))
        throw ConfigError(file.where("gamma") + ": gamma must lie in (0, 1/2)");
      break;
    }
  }
  return cfg;
}

ValidationReport validate_config(const ConfigFile& file) {
  ValidationReport report;
  try {
    load_config(file);
  } catch (const std::exception& e) {
    report.ok = false;
    report.errors.push_back(e.what());
  }
  return report;
}

}  // namespace bhl
