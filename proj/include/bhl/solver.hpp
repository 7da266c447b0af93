#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <utility>

#include "bhl/environment.hpp"
#include "bhl/lattice.hpp"

namespace bhl {

// Dirichlet data for L_w u = r in B, u = boundary on dB. The right-hand side
// is stored in L_w form (the value demanded of L_w u at each interior site).
struct EllipticProblem {
  const Environment* env = nullptr;
  DomainPtr domain;
  Eigen::VectorXd rhs;       // interior index order
  Eigen::VectorXd boundary;  // boundary index order (offset by interior_count)
};

EllipticProblem make_elliptic(const Environment& env, DomainPtr domain,
                              const std::function<double(const Site&)>& rhs,
                              const std::function<double(const Site&)>& boundary_data);

// Terminal/lateral data for the parabolic cylinder problem. The right-hand
// side is stored at the raw scale of the difference equation
//   (1/2) tr(w grad^2 u(., n+1)) + [u(x,n+1) - u(x,n)] = rhs(x,n);
// the stepper works in the monotone chain normalisation (divide by 1 + tr w).
struct ParabolicProblem {
  const Environment* env = nullptr;
  SpaceTimePtr domain;
  Eigen::MatrixXd rhs;       // interior site x level (0..T-1)
  Eigen::MatrixXd lateral;   // boundary site x level (columns 1..T used)
  Eigen::VectorXd terminal;  // interior site at level T
};

ParabolicProblem make_parabolic(const Environment& env, SpaceTimePtr domain,
                                const std::function<double(const Site&, int)>& rhs,
                                const std::function<double(const Site&, int)>& boundary_data);

struct SolveReport {
  long iterations = 0;
  double residual = 0;
  double seconds = 0;
  std::string to_json() const;
};

struct SolverOptions {
  double tol = 1e-10;   // relative to max(1, |rhs|_inf)
  long max_iters = 0;   // 0: 50 * diam^2 heuristic
};

// Red-black Gauss-Seidel sweeps of the monotone fixed point
// u(x) <- sum_y w(x,y) u(y) - r(x); the sweep operator is a strict
// contraction (killed-chain spectral radius < 1 on finite domains).
std::pair<LatticeField, SolveReport> solve_elliptic(const EllipticProblem& problem,
                                                    const SolverOptions& opts = {});

// Dense direct elimination of the same linear system; the small-instance
// oracle. Refuses domains above 4000 interior sites.
LatticeField solve_elliptic_direct(const EllipticProblem& problem);

// Direct solve with several right-hand sides over a shared domain/boundary.
Eigen::MatrixXd solve_elliptic_direct_multi(const Environment& env, const LatticeDomain& domain,
                                            const Eigen::MatrixXd& rhs_columns);

// Corrector problem L_w phi = psi_w - mean in B, phi = 0 on dB.
std::pair<LatticeField, SolveReport> solve_corrector(const Environment& env, DomainPtr domain,
                                                     const ObservableSpec& psi, double mean,
                                                     const SolverOptions& opts = {});

// Expected exit time: L_w t = -1 in B, t = 0 on dB. The optional-stopping
// identity E[tau] = E[|X_tau|^2] - |x|^2 then holds by construction.
std::pair<LatticeField, SolveReport> expected_exit_time(const Environment& env, DomainPtr domain,
                                                        const SolverOptions& opts = {});

// Exact backward recursion for the cylinder problem, stepping the lazy-chain
// normalisation u(x,n) = E[u(Yhat_1)] - rhs/(1+tr w): unconditionally
// monotone, no iteration, no tolerance. The report's residual is
// max |(1+tr w) * (chain generator of u) - rhs| over the interior.
std::pair<SpaceTimeField, SolveReport> solve_parabolic(const ParabolicProblem& problem);

}  // namespace bhl
