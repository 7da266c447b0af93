#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bhl/environment.hpp"
#include "bhl/lattice.hpp"
#include "bhl/solver.hpp"

namespace bhl {

// Half-space a . p <= b in slope space.
struct Halfspace {
  std::array<double, 3> a{0, 0, 0};
  double b = 0;
};

// The subdifferential set du(x; B) = { p : u(x) - p.x <= u(y) - p.y for all
// y in the closure of B }, i.e. the polytope cut out by the half-spaces
// p.(y - x) <= u(y) - u(x). Volumes are exact for d <= 2 (interval length /
// polygon clipping); d = 3 uses hit-or-miss Monte Carlo with a reported SE.
struct SubdifferentialCell {
  Site base{0, 0, 0};
  int dim = 0;
  std::vector<Halfspace> halfspaces;
  double volume = 0;
  double volume_se = 0;  // zero for the exact dimensions
  bool empty = true;
  double interval_lo = 0, interval_hi = 0;               // d = 1
  std::vector<std::array<double, 2>> polygon;            // d = 2, CCW vertices
  std::string to_json() const;
};

// Cell of `field` restricted to the (sub)domain B; B's closure must lie
// inside the field's domain closure. `mc_seed` only matters for d = 3.
SubdifferentialCell subdifferential(const LatticeField& field, const LatticeDomain& B,
                                    const Site& x, std::uint64_t mc_seed = 0x5bd1e99500000001ULL);

// |du(A; B)| = sum over x in A of the per-site cell volume (cells at distinct
// sites overlap in a null set).
double subdifferential_volume(const LatticeField& field, const LatticeDomain& B,
                              const std::vector<Site>& A);
double subdifferential_volume(const LatticeField& field, const LatticeDomain& B);

struct AbpReport {
  double min_defect = 0;      // min_dB u - min_B u
  double rhs = 0;             // diam(closure) * (|du(B)| / v_d)^(1/d)
  double cell_volume = 0;
  bool holds = false;
};

// Alexandrov-Bakelman-Pucci bound with the explicit constant coming from the
// ball inclusion B_{M/diam} subset du(B): min_dB u <= min_B u + diam * (|du(B)|/v_d)^{1/d}.
AbpReport abp_check(const LatticeField& field, const LatticeDomain& B, double tol = 1e-9);

struct MuEstimate {
  int level = 0;
  double s = 0;
  double mu_hat = 0;
  double mu_hat_star = 0;
};

// Normalised subdifferential mass of the canonical exact solutions on the
// triadic cube Q_n: u = phi - s E[tau] and u* = -phi - s E[tau], where phi is
// the corrector for psi with the supplied estimate of its long-run mean.
// Reported as a lower bound for the supremal quantity over all
// super-solutions (the supremum itself is not computable).
MuEstimate mu_hat(const Environment& env, int level, double s, const ObservableSpec& psi,
                  double mean, const SolverOptions& opts = {});

// Parabolic subdifferential at (x,n): slopes p with u(y,m) - u(x,n) >= p.(y-x)
// for every closure point (y,m) with m > n.
SubdifferentialCell parabolic_subdifferential(const SpaceTimeField& u, const Site& x, int n,
                                              std::uint64_t mc_seed = 0x5bd1e99500000002ULL);

// |Du(x,n)| = [u(x,n+1) - u(x,n)]_+ * |du(x,n)|; zero when the cell is empty.
double parabolic_cell_volume(const SpaceTimeField& u, const Site& x, int n);

struct ParabolicAbpReport {
  double min_defect = 0;   // min_{parabolic boundary} u - min_{K_R} u
  double rhs = 0;
  double mass_sum = 0;     // sum over K_R of |Du(x,n)|
  double constant = 0;     // (2^{d+1}(d+1)/v_d)^{1/(d+1)}
  bool holds = false;
};

// Parabolic ABP bound with the constant from |Lambda| = v_d M^{d+1} /
// (2^{d+1}(d+1) R^d), Lambda = {(xi,h): R|xi| < h < M/2}:
//   min_dpK u <= min_K u + (2^{d+1}(d+1)/v_d)^{1/(d+1)} R^{d/(d+1)} (sum |Du|)^{1/(d+1)}.
ParabolicAbpReport parabolic_abp_check(const SpaceTimeField& u, double tol = 1e-9);

}  // namespace bhl
