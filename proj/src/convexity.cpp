#include "bhl/convexity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "bhl/prng.hpp"

namespace bhl {

namespace {

constexpr double kPi = 3.14159265358979323846;

double unit_ball_volume(int d) {
  switch (d) {
    case 1: return 2.0;
    case 2: return kPi;
    case 3: return 4.0 * kPi / 3.0;
  }
  throw ConfigError("unit ball volume: dimension out of range");
}

double clip_eps(double b) { return 1e-11 * std::max(1.0, std::fabs(b)); }

// Clip a CCW polygon against a.p <= b (Sutherland-Hodgman).
void clip_polygon(std::vector<std::array<double, 2>>& poly, double a0, double a1, double b) {
  if (poly.empty()) return;
  std::vector<std::array<double, 2>> out;
  out.reserve(poly.size() + 2);
  const double eps = clip_eps(b);
  const std::size_t n = poly.size();
  for (std::size_t j = 0, i = n - 1; j < n; i = j++) {
    const auto& P = poly[i];
    const auto& Q = poly[j];
    const double dP = b - (a0 * P[0] + a1 * P[1]);
    const double dQ = b - (a0 * Q[0] + a1 * Q[1]);
    const bool inP = dP >= -eps;
    const bool inQ = dQ >= -eps;
    if (inP && inQ) {
      out.push_back(Q);
    } else if (inP != inQ) {
      const double t = dP / (dP - dQ);
      out.push_back({P[0] + t * (Q[0] - P[0]), P[1] + t * (Q[1] - P[1])});
      if (inQ) out.push_back(Q);
    }
  }
  poly.swap(out);
}

double polygon_area(const std::vector<std::array<double, 2>>& poly) {
  if (poly.size() < 3) return 0;
  double twice = 0;
  for (std::size_t j = 0, i = poly.size() - 1; j < poly.size(); i = j++)
    twice += poly[i][0] * poly[j][1] - poly[j][0] * poly[i][1];
  return std::fabs(twice) / 2.0;
}

// Reduce raw constraints to feasibility + volume. Zero-direction constraints
// (a = 0) only decide feasibility.
void resolve_cell(SubdifferentialCell& cell, std::uint64_t mc_seed) {
  const int d = cell.dim;
  // Feasibility of degenerate constraints and the axis-neighbour seed box.
  double lo[3], hi[3];
  for (int i = 0; i < 3; ++i) {
    lo[i] = -std::numeric_limits<double>::infinity();
    hi[i] = std::numeric_limits<double>::infinity();
  }
  for (const Halfspace& h : cell.halfspaces) {
    bool zero_dir = true;
    for (int i = 0; i < d; ++i) zero_dir = zero_dir && h.a[i] == 0;
    if (zero_dir) {  // pure feasibility test
      if (h.b < -clip_eps(h.b)) {
        cell.empty = true;
        cell.volume = 0;
        return;
      }
      continue;
    }
    int axis = -1;
    bool axis_like = true;
    for (int i = 0; i < d && axis_like; ++i) {
      if (h.a[i] == 0) continue;
      axis_like = axis == -1 && std::fabs(h.a[i]) == 1.0;
      axis = i;
    }
    if (!axis_like) continue;
    if (h.a[axis] > 0)
      hi[axis] = std::min(hi[axis], h.b);
    else
      lo[axis] = std::max(lo[axis], -h.b);
  }
  for (int i = 0; i < d; ++i) {
    if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]))
      throw DomainError("subdifferential cell: axis neighbours missing, cell unbounded");
    if (hi[i] < lo[i] - clip_eps(hi[i])) {
      cell.empty = true;
      cell.volume = 0;
      return;
    }
    if (hi[i] < lo[i]) hi[i] = lo[i];
  }

  if (d == 1) {
    double L = lo[0], H = hi[0];
    for (const Halfspace& h : cell.halfspaces) {
      if (h.a[0] > 0)
        H = std::min(H, h.b / h.a[0]);
      else if (h.a[0] < 0)
        L = std::max(L, h.b / h.a[0]);
      if (H < L - clip_eps(h.b)) {
        cell.empty = true;
        cell.volume = 0;
        return;
      }
    }
    cell.empty = H < L - 1e-12;
    cell.interval_lo = L;
    cell.interval_hi = std::max(L, H);
    cell.volume = cell.empty ? 0 : cell.interval_hi - cell.interval_lo;
    return;
  }

  if (d == 2) {
    std::vector<std::array<double, 2>> poly = {
        {lo[0], lo[1]}, {hi[0], lo[1]}, {hi[0], hi[1]}, {lo[0], hi[1]}};
    for (const Halfspace& h : cell.halfspaces) {
      if (h.a[0] == 0 && h.a[1] == 0) continue;
      clip_polygon(poly, h.a[0], h.a[1], h.b);
      if (poly.empty()) break;
    }
    cell.polygon = poly;
    cell.empty = poly.empty();
    cell.volume = polygon_area(poly);
    return;
  }

  // d = 3: hit-or-miss over the seed box, targeting 1% relative error.
  double box_vol = 1;
  for (int i = 0; i < 3; ++i) box_vol *= std::max(0.0, hi[i] - lo[i]);
  if (box_vol == 0) {
    cell.empty = false;  // feasible but null
    cell.volume = 0;
    return;
  }
  CounterStream stream(mc_seed);
  auto feasible = [&](double p0, double p1, double p2) {
    for (const Halfspace& h : cell.halfspaces) {
      const double v = h.a[0] * p0 + h.a[1] * p1 + h.a[2] * p2;
      if (v > h.b + clip_eps(h.b)) return false;
    }
    return true;
  };
  long hits = 0, total = 0;
  long target = 8192;
  const long hard_cap = 1'500'000;
  while (total < target) {
    const double p0 = lo[0] + (hi[0] - lo[0]) * stream.next_uniform();
    const double p1 = lo[1] + (hi[1] - lo[1]) * stream.next_uniform();
    const double p2 = lo[2] + (hi[2] - lo[2]) * stream.next_uniform();
    hits += feasible(p0, p1, p2) ? 1 : 0;
    ++total;
    if (total == target && hits > 0) {
      const double f = static_cast<double>(hits) / static_cast<double>(total);
      const long want = static_cast<long>(std::ceil((1.0 - f) / (f * 1e-4)));
      target = std::min(hard_cap, std::max(target, want));
    }
  }
  const double f = static_cast<double>(hits) / static_cast<double>(total);
  cell.volume = box_vol * f;
  cell.volume_se = box_vol * std::sqrt(f * (1.0 - f) / static_cast<double>(total));
  cell.empty = hits == 0;
  return;
}

}  // namespace

std::string SubdifferentialCell::to_json() const {
  std::ostringstream os;
  os << "{\"site\":[";
  for (int i = 0; i < dim; ++i) os << (i ? "," : "") << base[i];
  os << "],\"volume\":" << volume << ",\"se\":" << volume_se
     << ",\"empty\":" << (empty ? "true" : "false") << "}";
  return os.str();
}

SubdifferentialCell subdifferential(const LatticeField& field, const LatticeDomain& B,
                                    const Site& x, std::uint64_t mc_seed) {
  if (!B.is_interior(x)) throw DomainError("subdifferential requested off the domain interior");
  SubdifferentialCell cell;
  cell.base = x;
  cell.dim = B.dim();
  const double ux = field.at(x);
  cell.halfspaces.reserve(static_cast<std::size_t>(B.closure_count()) - 1);
  for (int k = 0; k < B.closure_count(); ++k) {
    const Site& y = B.site_at(k);
    if (y == x) continue;
    Halfspace h;
    const Site a = sub(y, x);
    h.a = {static_cast<double>(a[0]), static_cast<double>(a[1]), static_cast<double>(a[2])};
    h.b = field.at(y) - ux;
    cell.halfspaces.push_back(h);
  }
  resolve_cell(cell, hash_combine(mc_seed, zigzag64(x[0]) ^ (zigzag64(x[1]) << 21) ^
                                               (zigzag64(x[2]) << 42)));
  return cell;
}

double subdifferential_volume(const LatticeField& field, const LatticeDomain& B,
                              const std::vector<Site>& A) {
  double total = 0;
  for (const Site& x : A) total += subdifferential(field, B, x).volume;
  return total;
}

double subdifferential_volume(const LatticeField& field, const LatticeDomain& B) {
  return subdifferential_volume(field, B, B.interior());
}

AbpReport abp_check(const LatticeField& field, const LatticeDomain& B, double tol) {
  const int nI = B.interior_count();
  double min_b = std::numeric_limits<double>::infinity();
  for (int k = 0; k < B.boundary_count(); ++k)
    min_b = std::min(min_b, field.at(B.boundary()[k]));
  double min_i = std::numeric_limits<double>::infinity();
  for (int k = 0; k < nI; ++k) min_i = std::min(min_i, field.at(B.interior()[k]));

  AbpReport rep;
  rep.min_defect = min_b - min_i;
  // Monte Carlo volumes (d = 3) enter on the favourable side: volume + 3 SE.
  double mass = 0;
  for (const Site& x : B.interior()) {
    const SubdifferentialCell cell = subdifferential(field, B, x);
    mass += cell.volume + 3.0 * cell.volume_se;
  }
  rep.cell_volume = mass;
  rep.rhs = B.diameter() * std::pow(mass / unit_ball_volume(B.dim()), 1.0 / B.dim());
  rep.holds = rep.min_defect <= rep.rhs + tol;
  return rep;
}

MuEstimate mu_hat(const Environment& env, int level, double s, const ObservableSpec& psi,
                  double mean, const SolverOptions& opts) {
  if (level < 1) throw ConfigError("mu_hat: triadic level must be >= 1");
  auto cube = std::make_shared<LatticeDomain>(LatticeDomain::triadic_cube(level, env.law().dim));
  auto [phi, rep1] = solve_corrector(env, cube, psi, mean, opts);
  auto [exit_time, rep2] = expected_exit_time(env, cube, opts);
  (void)rep1;
  (void)rep2;

  LatticeField u(cube), u_star(cube);
  u.values() = phi.values() - s * exit_time.values();
  u_star.values() = -phi.values() - s * exit_time.values();

  MuEstimate est;
  est.level = level;
  est.s = s;
  const double sites = std::pow(3.0, level * env.law().dim);
  est.mu_hat = subdifferential_volume(u, *cube) / sites;
  est.mu_hat_star = subdifferential_volume(u_star, *cube) / sites;
  return est;
}

SubdifferentialCell parabolic_subdifferential(const SpaceTimeField& u, const Site& x, int n,
                                              std::uint64_t mc_seed) {
  const SpaceTimeDomain& dom = u.domain();
  if (!dom.is_interior(x, n))
    throw DomainError("parabolic subdifferential requested off the cylinder interior");
  const LatticeDomain& sp = dom.space();
  const int T = dom.time_levels();
  const int nI = sp.interior_count();
  const double uxn = u.at(x, n);

  SubdifferentialCell cell;
  cell.base = x;
  cell.dim = sp.dim();
  cell.halfspaces.reserve(static_cast<std::size_t>(sp.closure_count()));
  // For a fixed spatial y only the smallest future increment binds.
  for (int k = 0; k < sp.closure_count(); ++k) {
    const int first = k < nI ? n + 1 : std::max(n + 1, 1);
    double best = std::numeric_limits<double>::infinity();
    for (int m = first; m <= T; ++m) best = std::min(best, u(k, m));
    Halfspace h;
    const Site a = sub(sp.site_at(k), x);
    h.a = {static_cast<double>(a[0]), static_cast<double>(a[1]), static_cast<double>(a[2])};
    h.b = best - uxn;
    cell.halfspaces.push_back(h);
  }
  resolve_cell(cell, hash_combine(mc_seed, zigzag64(x[0]) ^ (zigzag64(x[1]) << 21) ^
                                               (static_cast<std::uint64_t>(n) << 42)));
  return cell;
}

double parabolic_cell_volume(const SpaceTimeField& u, const Site& x, int n) {
  const SubdifferentialCell cell = parabolic_subdifferential(u, x, n);
  if (cell.empty) return 0;
  const double dt = u.at(x, n + 1) - u.at(x, n);
  return std::max(0.0, dt) * cell.volume;
}

namespace {

double parabolic_cell_volume_upper(const SpaceTimeField& u, const Site& x, int n) {
  const SubdifferentialCell cell = parabolic_subdifferential(u, x, n);
  if (cell.empty) return 0;
  const double dt = u.at(x, n + 1) - u.at(x, n);
  return std::max(0.0, dt) * (cell.volume + 3.0 * cell.volume_se);
}

}  // namespace

ParabolicAbpReport parabolic_abp_check(const SpaceTimeField& u, double tol) {
  const SpaceTimeDomain& dom = u.domain();
  const LatticeDomain& sp = dom.space();
  const int d = sp.dim();
  const int T = dom.time_levels();
  const int nI = sp.interior_count();

  double min_boundary = std::numeric_limits<double>::infinity();
  for (int k = nI; k < sp.closure_count(); ++k)
    for (int n = 1; n <= T; ++n) min_boundary = std::min(min_boundary, u(k, n));
  for (int k = 0; k < nI; ++k) min_boundary = std::min(min_boundary, u(k, T));

  double min_interior = std::numeric_limits<double>::infinity();
  double mass = 0;
  for (int k = 0; k < nI; ++k) {
    const Site& x = sp.interior()[k];
    for (int n = 0; n < T; ++n) {
      min_interior = std::min(min_interior, u(k, n));
      mass += parabolic_cell_volume_upper(u, x, n);
    }
  }

  ParabolicAbpReport rep;
  rep.min_defect = min_boundary - min_interior;
  rep.mass_sum = mass;
  rep.constant = std::pow(std::pow(2.0, d + 1) * (d + 1) / unit_ball_volume(d), 1.0 / (d + 1));
  rep.rhs = rep.constant * std::pow(dom.radius(), static_cast<double>(d) / (d + 1)) *
            std::pow(mass, 1.0 / (d + 1));
  rep.holds = rep.min_defect <= rep.rhs + tol;
  return rep;
}

}  // namespace bhl
