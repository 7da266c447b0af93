#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "bhl/environment.hpp"
#include "bhl/site.hpp"

namespace bhl {

using PointFn = std::function<double(const std::array<double, 3>&)>;
using SpaceTimeFn = std::function<double(const std::array<double, 3>&, double)>;

// Effective coefficients of the limiting equations, estimated by
// time-averaging w/tr w, 1/tr w and psi/tr w along the walk (the environment
// seen from the particle), with the first tenth of each path discarded as
// burn-in. abar entries sum to one exactly since they do so pointwise.
struct EffectiveCoefficients {
  int dim = 0;
  std::array<double, 3> abar{0, 0, 0};
  double bbar = 0;
  double psibar = 0;
  std::array<double, 3> se_abar{0, 0, 0};
  double se_bbar = 0;
  double se_psibar = 0;

  struct Provenance {
    std::string law;
    std::string psi;
    long horizon = 0;
    int replicas = 0;
    int walks = 0;
    std::uint64_t seed = 0;
    double burn_in_fraction = 0.1;
  } provenance;

  double abar_sum() const { return abar[0] + abar[1] + abar[2]; }
  std::string to_json() const;
};

EffectiveCoefficients estimate_effective(const EnvironmentLaw& law, const ObservableSpec& psi,
                                         long horizon, int replicas, int walks_per_replica,
                                         std::uint64_t seed);

struct EvalResult {
  double value = 0;
  bool clamped = false;
};

// Finite-difference solution on the unit ball (or unit cylinder): uniform
// Cartesian grid, Shortley-Weller unequal arms against the exact ray/sphere
// intersection at near-boundary nodes. Supports d in {1,2}.
class ContinuumSolution {
 public:
  int dim() const { return dim_; }
  double h() const { return h_; }
  bool parabolic() const { return parabolic_; }

  // Value at a point of the closed unit ball; queries outside are clamped to
  // the boundary and flagged.
  EvalResult eval(const std::array<double, 3>& q) const;
  EvalResult eval(const std::array<double, 3>& q, double t) const;

  // Value at a lattice point under diffusive rescaling: x -> u(x/R), and
  // (x,n) -> u(x/R, n/R^2).
  EvalResult eval_lattice(double R, const Site& x) const;
  EvalResult eval_lattice(double R, const Site& x, int n) const;

  // Value at an interior grid node (test hook; no interpolation involved).
  double node_value(const std::array<int, 3>& idx) const;
  bool node_interior(const std::array<int, 3>& idx) const;
  int nodes_per_axis() const { return 2 * m_ + 1; }

  void dump_csv(std::ostream& os) const;

 private:
  friend ContinuumSolution solve_effective_elliptic_raw(int dim, const std::array<double, 3>& abar,
                                                        double psibar, const PointFn& f,
                                                        const PointFn& g, double h, double tol,
                                                        long max_iters);
  friend ContinuumSolution solve_effective_parabolic_raw(int dim, const std::array<double, 3>& abar,
                                                         double bbar, double psibar,
                                                         const SpaceTimeFn& f, const SpaceTimeFn& g,
                                                         double h, double dt, double tol);

  double bilinear(const std::vector<double>& values, const std::array<double, 3>& q) const;
  EvalResult eval_slice(const std::vector<double>& values, const std::array<double, 3>& q,
                        double t_for_g) const;
  std::size_t node_index(const std::array<int, 3>& idx) const;

  int dim_ = 0;
  int m_ = 0;        // 1/h
  double h_ = 0;
  bool parabolic_ = false;
  std::vector<std::uint8_t> interior_;   // node classification
  std::vector<double> values_;           // elliptic values (or unused)
  std::vector<std::vector<double>> slices_;  // parabolic time slices
  std::vector<double> slice_times_;          // ascending in t
  PointFn boundary_g_;          // elliptic boundary data
  SpaceTimeFn boundary_g_t_;    // parabolic boundary data
};

ContinuumSolution solve_effective_elliptic_raw(int dim, const std::array<double, 3>& abar,
                                               double psibar, const PointFn& f, const PointFn& g,
                                               double h, double tol = 1e-10, long max_iters = 0);

inline ContinuumSolution solve_effective_elliptic(const EffectiveCoefficients& coeffs,
                                                  const PointFn& f, const PointFn& g, double h,
                                                  double tol = 1e-10) {
  return solve_effective_elliptic_raw(coeffs.dim, coeffs.abar, coeffs.psibar, f, g, h, tol, 0);
}

// Backward march from the terminal data at t = 1. The spatial operator is
// applied at the level being solved (the cut arms make a same-level explicit
// step non-monotone at any dt); dt must still satisfy the monotone bound
// dt <= bbar h^2 / sum(abar), and dt = 0 selects 0.9x that bound.
ContinuumSolution solve_effective_parabolic_raw(int dim, const std::array<double, 3>& abar,
                                                double bbar, double psibar, const SpaceTimeFn& f,
                                                const SpaceTimeFn& g, double h, double dt,
                                                double tol = 1e-10);

inline ContinuumSolution solve_effective_parabolic(const EffectiveCoefficients& coeffs,
                                                   const SpaceTimeFn& f, const SpaceTimeFn& g,
                                                   double h, double dt, double tol = 1e-10) {
  return solve_effective_parabolic_raw(coeffs.dim, coeffs.abar, coeffs.bbar, coeffs.psibar, f, g,
                                       h, dt, tol);
}

}  // namespace bhl
