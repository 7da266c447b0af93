#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bhl/effective.hpp"
#include "bhl/environment.hpp"
#include "bhl/solver.hpp"

namespace bhl {

double normal_cdf(double r);
double median(std::vector<double> values);

// Least-squares fit of log(statistic) against log(scale) (rates) or against
// the scale itself (exponential decay).
struct RateFit {
  std::vector<std::array<double, 2>> points;  // pairs that entered the fit
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
  int excluded = 0;  // nonpositive statistics dropped with a warning
  bool log_x = true;
};

RateFit fit_rate(const std::vector<std::array<double, 2>>& pairs);
RateFit fit_exponential(const std::vector<std::array<double, 2>>& pairs);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  void write_csv(std::ostream& os) const;
};

struct ExperimentResult {
  std::string kind;
  Table table;
  std::vector<std::array<double, 2>> aggregate;  // (scale, median-or-mean statistic)
  RateFit fit;
  bool has_fit = false;
  bool pass = false;
  std::string pass_note;
  std::map<std::string, std::string> info;  // extra summary payload (JSON fragments allowed)
};

struct LadderParams {
  EnvironmentLaw law = EnvironmentLaw::constant(2, 1.0);
  ObservableSpec psi = ObservableSpec::constant(0.0);
  std::vector<double> ladder;
  int replicas = 8;
  std::uint64_t seed = 1;
  int workers = 1;
  SolverOptions solver;
  // Reference-run sizing (effective coefficients / long-run means); the
  // reference always uses seeds disjoint from the experiment cells.
  long ref_horizon = 0;  // 0: derived from the ladder
  int ref_replicas = 32;
  int ref_walks = 4;
  // Continuum grid (homogenization experiments).
  double grid_h = 1.0 / 64.0;
  double grid_dt = 0;  // 0: CFL default
  PointFn f;           // elliptic data
  PointFn g;
  SpaceTimeFn f_t;     // parabolic data
  SpaceTimeFn g_t;
  long walks = 1000;   // ergodicity cells
  // Optional artifact dumps of the first cell (scale 0, replica 0).
  std::string dump_dir;
  bool dump_environment = false;
  bool dump_fields = false;
};

ExperimentResult homog_error_elliptic(const LadderParams& params);
ExperimentResult homog_error_parabolic(const LadderParams& params);
ExperimentResult corrector_sublinearity(const LadderParams& params);
ExperimentResult ergodicity_rate(const LadderParams& params);

struct BerryEsseenParams {
  EnvironmentLaw law = EnvironmentLaw::constant(2, 1.0);
  std::vector<double> ladder;           // horizons n
  std::array<double, 3> direction{1, 0, 0};
  EffectiveCoefficients coeffs;         // carries abar for the target variance
  long walks = 100000;
  int environments = 1;                 // median over this many environments
  std::uint64_t seed = 1;
  int workers = 1;
};

ExperimentResult berry_esseen(const BerryEsseenParams& params);

// Exact one-sample Kolmogorov distance of samples against N(0, sigma2).
double kolmogorov_distance(std::vector<double> samples, double sigma2);

struct MuDecayParams {
  EnvironmentLaw law = EnvironmentLaw::constant(2, 1.0);
  ObservableSpec psi = ObservableSpec::constant(0.0);
  std::vector<int> levels;  // triadic levels, each in 1..4
  double s = 0;             // optional offset for the monotonicity column
  int replicas = 16;
  std::uint64_t seed = 1;
  int workers = 1;
  SolverOptions solver;
  long ref_horizon = 0;
  int ref_replicas = 32;
  int ref_walks = 4;
};

ExperimentResult mu_decay(const MuDecayParams& params);

struct CensusParams {
  EnvironmentLaw law = EnvironmentLaw::constant(2, 1.0);
  ObservableSpec psi = ObservableSpec::constant(0.0);
  double R = 27;
  double gamma = 0.4;        // R0 = R^gamma, gamma in (0, 1/2)
  double threshold_c = 1.0;
  double alpha = 0.2;        // decay exponent from a prior ergodicity fit
  EffectiveCoefficients coeffs;  // reference long-run means
  std::uint64_t seed = 1;
  bool keep_flags = false;
  int workers = 1;
};

struct CensusReport {
  double R = 0;
  double R0 = 0;
  double gamma = 0;
  double threshold_c = 0;
  double alpha = 0;
  long total = 0;
  long bad_count = 0;
  std::vector<std::uint8_t> flags;  // per site of B_{R-R0}, when kept
  std::vector<Site> sites;
  std::string to_json() const;
};

CensusReport bad_point_census(const Environment& env, const CensusParams& params);
ExperimentResult census_experiment(const CensusParams& params);

// Long-run mean of psi itself along the walk (the reference E_Q psi used by
// the corrector and ergodicity experiments).
double reference_mean(const EnvironmentLaw& law, const ObservableSpec& psi, long horizon,
                      int replicas, int walks, std::uint64_t seed, double* se_out = nullptr);

}  // namespace bhl
