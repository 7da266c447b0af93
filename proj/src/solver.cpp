#include "bhl/solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <vector>

namespace bhl {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Per-interior-site stencil: closure indices of the 2d neighbours and the
// transition probabilities w_i/(2 tr w).
struct Stencil {
  int nbr[6];
  double p[6];
  int arity;
};

std::vector<Stencil> build_stencils(const Environment& env, const LatticeDomain& dom) {
  const int nI = dom.interior_count();
  const int d = dom.dim();
  std::vector<Stencil> st(static_cast<std::size_t>(nI));
  for (int k = 0; k < nI; ++k) {
    const Site& x = dom.interior()[k];
    const SiteWeights sw = env.weights(x);
    Stencil& s = st[k];
    s.arity = 2 * d;
    for (int i = 0; i < d; ++i) {
      const int ip = dom.index_of(shifted(x, i, +1));
      const int im = dom.index_of(shifted(x, i, -1));
      if (ip < 0 || im < 0) throw DomainError("stencil neighbour missing from the closure");
      const double q = sw.w[i] / (2.0 * sw.trace);
      s.nbr[2 * i] = ip;
      s.p[2 * i] = q;
      s.nbr[2 * i + 1] = im;
      s.p[2 * i + 1] = q;
    }
  }
  return st;
}

int parity(const Site& x) { return (x[0] + x[1] + x[2]) & 1; }

}  // namespace

std::string SolveReport::to_json() const {
  std::ostringstream os;
  os << "{\"iterations\":" << iterations << ",\"residual\":" << residual
     << ",\"seconds\":" << seconds << "}";
  return os.str();
}

EllipticProblem make_elliptic(const Environment& env, DomainPtr domain,
                              const std::function<double(const Site&)>& rhs,
                              const std::function<double(const Site&)>& boundary_data) {
  EllipticProblem p;
  p.env = &env;
  p.domain = std::move(domain);
  const auto& dom = *p.domain;
  p.rhs.resize(dom.interior_count());
  for (int k = 0; k < dom.interior_count(); ++k) p.rhs[k] = rhs(dom.interior()[k]);
  p.boundary.resize(dom.boundary_count());
  for (int k = 0; k < dom.boundary_count(); ++k) p.boundary[k] = boundary_data(dom.boundary()[k]);
  if (!p.rhs.allFinite() || !p.boundary.allFinite())
    throw ConfigError("elliptic problem: non-finite right-hand side or boundary data");
  return p;
}

std::pair<LatticeField, SolveReport> solve_elliptic(const EllipticProblem& problem,
                                                    const SolverOptions& opts) {
  const auto t0 = Clock::now();
  const LatticeDomain& dom = *problem.domain;
  const int nI = dom.interior_count();

  LatticeField u(problem.domain);
  for (int k = 0; k < dom.boundary_count(); ++k) u[nI + k] = problem.boundary[k];

  const std::vector<Stencil> st = build_stencils(*problem.env, dom);

  std::vector<int> red, black;
  red.reserve(nI);
  for (int k = 0; k < nI; ++k) (parity(dom.interior()[k]) == 0 ? red : black).push_back(k);

  const double scale = std::max(1.0, problem.rhs.size() ? problem.rhs.cwiseAbs().maxCoeff() : 0.0);
  const double tol = opts.tol * scale;
  const double diam = nI > 2000 ? 2.0 * dom.radius() + 2.0 : dom.diameter();
  const long max_iters =
      opts.max_iters > 0 ? opts.max_iters
                         : std::max<long>(1000, static_cast<long>(50.0 * diam * diam));

  double* v = u.values().data();
  const double* r = problem.rhs.data();

  auto sweep_half = [&](const std::vector<int>& color) {
    for (int k : color) {
      const Stencil& s = st[k];
      double acc = -r[k];
      for (int j = 0; j < s.arity; ++j) acc += s.p[j] * v[s.nbr[j]];
      v[k] = acc;
    }
  };
  auto residual_max = [&]() {
    double m = 0;
    for (int k = 0; k < nI; ++k) {
      const Stencil& s = st[k];
      double acc = -v[k] - r[k];
      for (int j = 0; j < s.arity; ++j) acc += s.p[j] * v[s.nbr[j]];
      m = std::max(m, std::fabs(acc));
    }
    return m;
  };

  SolveReport rep;
  const int cadence = nI <= 4096 ? 1 : 8;
  double res = residual_max();
  long it = 0;
  while (res > tol && it < max_iters) {
    for (int c = 0; c < cadence && it < max_iters; ++c) {
      sweep_half(red);
      sweep_half(black);
      ++it;
    }
    res = residual_max();
  }
  rep.iterations = it;
  rep.residual = res;
  rep.seconds = elapsed(t0);
  if (res > tol)
    throw NonconvergenceError("elliptic sweep did not reach tolerance " + std::to_string(tol) +
                                  " (residual " + std::to_string(res) + ")",
                              res, it);
  return {std::move(u), rep};
}

LatticeField solve_elliptic_direct(const EllipticProblem& problem) {
  const LatticeDomain& dom = *problem.domain;
  const int nI = dom.interior_count();
  if (nI > 4000) throw DomainError("direct elliptic solve refused: more than 4000 interior sites");

  const std::vector<Stencil> st = build_stencils(*problem.env, dom);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nI, nI);
  Eigen::VectorXd b = problem.rhs;
  for (int k = 0; k < nI; ++k) {
    A(k, k) = -1.0;
    const Stencil& s = st[k];
    for (int j = 0; j < s.arity; ++j) {
      if (s.nbr[j] < nI)
        A(k, s.nbr[j]) += s.p[j];
      else
        b[k] -= s.p[j] * problem.boundary[s.nbr[j] - nI];
    }
  }
  const Eigen::VectorXd sol = A.partialPivLu().solve(b);
  LatticeField u(problem.domain);
  u.values().head(nI) = sol;
  u.values().tail(dom.boundary_count()) = problem.boundary;
  return u;
}

Eigen::MatrixXd solve_elliptic_direct_multi(const Environment& env, const LatticeDomain& domain,
                                            const Eigen::MatrixXd& rhs_columns) {
  const int nI = domain.interior_count();
  if (nI > 4000) throw DomainError("direct elliptic solve refused: more than 4000 interior sites");
  const std::vector<Stencil> st = build_stencils(env, domain);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nI, nI);
  for (int k = 0; k < nI; ++k) {
    A(k, k) = -1.0;
    const Stencil& s = st[k];
    for (int j = 0; j < s.arity; ++j)
      if (s.nbr[j] < nI) A(k, s.nbr[j]) += s.p[j];
  }
  return A.partialPivLu().solve(rhs_columns);
}

std::pair<LatticeField, SolveReport> solve_corrector(const Environment& env, DomainPtr domain,
                                                     const ObservableSpec& psi, double mean,
                                                     const SolverOptions& opts) {
  EllipticProblem p = make_elliptic(
      env, std::move(domain),
      [&](const Site& x) { return psi.eval(env.weights(x)) - mean; },
      [](const Site&) { return 0.0; });
  return solve_elliptic(p, opts);
}

std::pair<LatticeField, SolveReport> expected_exit_time(const Environment& env, DomainPtr domain,
                                                        const SolverOptions& opts) {
  EllipticProblem p = make_elliptic(
      env, std::move(domain), [](const Site&) { return -1.0; }, [](const Site&) { return 0.0; });
  return solve_elliptic(p, opts);
}

ParabolicProblem make_parabolic(const Environment& env, SpaceTimePtr domain,
                                const std::function<double(const Site&, int)>& rhs,
                                const std::function<double(const Site&, int)>& boundary_data) {
  ParabolicProblem p;
  p.env = &env;
  p.domain = std::move(domain);
  const LatticeDomain& sp = p.domain->space();
  const int T = p.domain->time_levels();
  p.rhs.resize(sp.interior_count(), T);
  for (int k = 0; k < sp.interior_count(); ++k)
    for (int n = 0; n < T; ++n) p.rhs(k, n) = rhs(sp.interior()[k], n);
  p.lateral.setZero(sp.boundary_count(), T + 1);
  for (int k = 0; k < sp.boundary_count(); ++k)
    for (int n = 1; n <= T; ++n) p.lateral(k, n) = boundary_data(sp.boundary()[k], n);
  p.terminal.resize(sp.interior_count());
  for (int k = 0; k < sp.interior_count(); ++k) p.terminal[k] = boundary_data(sp.interior()[k], T);
  if (!p.rhs.allFinite() || !p.lateral.allFinite() || !p.terminal.allFinite())
    throw ConfigError("parabolic problem: non-finite data");
  return p;
}

std::pair<SpaceTimeField, SolveReport> solve_parabolic(const ParabolicProblem& problem) {
  const auto t0 = Clock::now();
  const SpaceTimeDomain& dom = *problem.domain;
  const LatticeDomain& sp = dom.space();
  const int nI = sp.interior_count();
  const int T = dom.time_levels();

  SpaceTimeField u(problem.domain);
  for (int k = 0; k < sp.boundary_count(); ++k)
    for (int n = 1; n <= T; ++n) u(nI + k, n) = problem.lateral(k, n);
  for (int k = 0; k < nI; ++k) u(k, T) = problem.terminal[k];

  const std::vector<Stencil> st = build_stencils(*problem.env, sp);
  std::vector<double> half_w(static_cast<std::size_t>(nI) * 6, 0.0);
  std::vector<double> inv_one_plus_tr(nI);
  const int d = sp.dim();
  for (int k = 0; k < nI; ++k) {
    const SiteWeights sw = problem.env->weights(sp.interior()[k]);
    for (int i = 0; i < d; ++i) {
      half_w[6 * k + 2 * i] = 0.5 * sw.w[i];
      half_w[6 * k + 2 * i + 1] = 0.5 * sw.w[i];
    }
    inv_one_plus_tr[k] = 1.0 / (1.0 + sw.trace);
  }

  for (int n = T - 1; n >= 0; --n) {
    for (int k = 0; k < nI; ++k) {
      const Stencil& s = st[k];
      double acc = u(k, n + 1);
      for (int j = 0; j < s.arity; ++j) acc += half_w[6 * k + j] * u(s.nbr[j], n + 1);
      u(k, n) = (acc - problem.rhs(k, n)) * inv_one_plus_tr[k];
    }
  }

  SolveReport rep;
  rep.iterations = T;
  double res = 0;
  for (int k = 0; k < nI; ++k) {
    const Site& x = sp.interior()[k];
    const double opt = 1.0 / inv_one_plus_tr[k];
    for (int n = 0; n < T; ++n) {
      const ParabolicValue pv = apply_parabolic(*problem.env, u, x, n);
      res = std::max(res, std::fabs(opt * pv.normalized - problem.rhs(k, n)));
    }
  }
  rep.residual = res;
  rep.seconds = elapsed(t0);
  return {std::move(u), rep};
}

}  // namespace bhl
