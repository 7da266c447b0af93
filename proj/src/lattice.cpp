#include "bhl/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>

#include "bhl/io.hpp"

namespace bhl {

namespace {

int floordiv(int a, int b) {
  // b > 0
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

int pow3(int n) {
  int r = 1;
  for (int i = 0; i < n; ++i) r *= 3;
  return r;
}

// Largest integer strictly below t (ceil minus one, with the near-integer snap).
int strict_upper(double t) { return static_cast<int>(ceil_guarded(t)) - 1; }

}  // namespace

LatticeDomain LatticeDomain::ball(double radius, int dim, Site center) {
  if (!(radius > 0)) throw ConfigError("ball radius must be positive");
  LatticeDomain d;
  d.kind_ = DomainKind::Ball;
  d.dim_ = dim;
  d.radius_ = radius;
  d.center_ = center;
  const double r2 = radius * radius;
  // Include x iff |x - c|^2 < r2, decided against the guarded integer ceiling.
  const std::int64_t thr = ceil_guarded(r2);
  const int reach = static_cast<int>(std::ceil(radius)) + 1;
  Site x{0, 0, 0};
  std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
  for (int i = 0; i < dim; ++i) {
    lo[i] = -reach;
    hi[i] = reach;
  }
  for (x[0] = lo[0]; x[0] <= hi[0]; ++x[0])
    for (x[1] = lo[1]; x[1] <= hi[1]; ++x[1])
      for (x[2] = lo[2]; x[2] <= hi[2]; ++x[2])
        if (norm2i(x) < thr) d.interior_.push_back(add(x, center));
  d.finalize();
  return d;
}

LatticeDomain LatticeDomain::cube(double side, int dim, Site center) {
  if (!(side > 0)) throw ConfigError("cube side must be positive");
  LatticeDomain d;
  d.kind_ = DomainKind::Cube;
  d.dim_ = dim;
  d.radius_ = side;
  d.center_ = center;
  // {|x_i| < side/2}: coordinates up to the largest integer strictly below side/2.
  const int h = strict_upper(side / 2.0);
  if (h < 0) throw ConfigError("cube side too small: no lattice sites");
  Site x{0, 0, 0};
  std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
  for (int i = 0; i < dim; ++i) {
    lo[i] = -h;
    hi[i] = h;
  }
  for (x[0] = lo[0]; x[0] <= hi[0]; ++x[0])
    for (x[1] = lo[1]; x[1] <= hi[1]; ++x[1])
      for (x[2] = lo[2]; x[2] <= hi[2]; ++x[2]) d.interior_.push_back(add(x, center));
  d.finalize();
  return d;
}

LatticeDomain LatticeDomain::triadic_cube(int n, int dim) {
  if (n < 0) throw ConfigError("triadic cube level must be >= 0");
  LatticeDomain d = cube(static_cast<double>(pow3(n)), dim);
  d.kind_ = DomainKind::Triadic;
  return d;
}

LatticeDomain LatticeDomain::from_sites(std::vector<Site> sites, int dim, DomainKind kind) {
  if (sites.empty()) throw ConfigError("explicit domain must be nonempty");
  LatticeDomain d;
  d.kind_ = kind;
  d.dim_ = dim;
  d.interior_ = std::move(sites);
  d.finalize();
  return d;
}

Site LatticeDomain::triadic_center_of(const Site& x, int m) {
  const int side = pow3(m);
  const int h = (side - 1) / 2;
  Site y{0, 0, 0};
  for (int i = 0; i < 3; ++i) y[i] = side * floordiv(x[i] + h, side);
  return y;
}

LatticeDomain LatticeDomain::triadic_subcube(const Site& x, int m, int dim) {
  LatticeDomain d = cube(static_cast<double>(pow3(m)), dim, triadic_center_of(x, m));
  d.kind_ = DomainKind::Triadic;
  return d;
}

void LatticeDomain::finalize() {
  std::sort(interior_.begin(), interior_.end());
  interior_.erase(std::unique(interior_.begin(), interior_.end()), interior_.end());

  bbox_.dim = dim_;
  for (int i = 0; i < dim_; ++i) {
    bbox_.lo[i] = std::numeric_limits<int>::max();
    bbox_.hi[i] = std::numeric_limits<int>::min();
  }
  for (const Site& x : interior_)
    for (int i = 0; i < dim_; ++i) {
      bbox_.lo[i] = std::min(bbox_.lo[i], x[i] - 1);
      bbox_.hi[i] = std::max(bbox_.hi[i], x[i] + 1);
    }

  index_.assign(static_cast<std::size_t>(bbox_.site_count()), -1);
  auto flat = [&](const Site& x) {
    std::size_t idx = 0;
    for (int i = 0; i < dim_; ++i)
      idx = idx * static_cast<std::size_t>(bbox_.extent(i)) +
            static_cast<std::size_t>(x[i] - bbox_.lo[i]);
    return idx;
  };

  for (std::size_t k = 0; k < interior_.size(); ++k)
    index_[flat(interior_[k])] = static_cast<std::int32_t>(k);

  std::set<Site> bd;
  for (const Site& x : interior_)
    for (int i = 0; i < dim_; ++i)
      for (int s : {+1, -1}) {
        const Site y = shifted(x, i, s);
        if (index_[flat(y)] < 0) bd.insert(y);
      }
  boundary_.assign(bd.begin(), bd.end());
  for (std::size_t k = 0; k < boundary_.size(); ++k)
    index_[flat(boundary_[k])] = static_cast<std::int32_t>(interior_.size() + k);
}

int LatticeDomain::index_of(const Site& x) const {
  for (int i = 0; i < dim_; ++i)
    if (x[i] < bbox_.lo[i] || x[i] > bbox_.hi[i]) return -1;
  std::size_t idx = 0;
  for (int i = 0; i < dim_; ++i)
    idx = idx * static_cast<std::size_t>(bbox_.extent(i)) +
          static_cast<std::size_t>(x[i] - bbox_.lo[i]);
  return index_[idx];
}

double LatticeDomain::diameter() const {
  std::int64_t best = 0;
  const int nI = interior_count();
  const int n = closure_count();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      best = std::max(best, norm2i(sub(site_at(i), site_at(j))));
  (void)nI;
  return std::sqrt(static_cast<double>(best));
}

void LatticeField::dump_csv(std::ostream& os) const {
  const int d = dom_->dim();
  for (int i = 0; i < d; ++i) os << "x" << (i + 1) << ",";
  os << "value\n";
  for (int k = 0; k < dom_->closure_count(); ++k) {
    const Site& x = dom_->site_at(k);
    for (int i = 0; i < d; ++i) os << x[i] << ",";
    os << format_double(values_[k]) << "\n";
  }
}

SpaceTimeDomain::SpaceTimeDomain(double radius, int dim)
    : radius_(radius), dim_(dim), levels_(static_cast<int>(ceil_guarded(radius * radius))) {
  if (!(radius > 0)) throw ConfigError("cylinder radius must be positive");
  space_ = std::make_shared<LatticeDomain>(LatticeDomain::ball(radius, dim));
}

SpaceTimeField::SpaceTimeField(SpaceTimePtr dom) : dom_(std::move(dom)) {
  const auto& sp = dom_->space();
  values_.setConstant(sp.closure_count(), dom_->time_levels() + 1,
                      std::numeric_limits<double>::quiet_NaN());
  // Valid slots: interior sites at all levels, boundary sites from level 1 on.
  values_.topRows(sp.interior_count()).setZero();
  values_.bottomRows(sp.boundary_count()).rightCols(dom_->time_levels()).setZero();
}

double SpaceTimeField::at(const Site& x, int n) const {
  if (!dom_->in_closure(x, n))
    throw DomainError("space-time field evaluated outside the cylinder closure");
  return values_(dom_->space().index_of(x), n);
}

void SpaceTimeField::set(const Site& x, int n, double v) {
  if (!dom_->in_closure(x, n))
    throw DomainError("space-time field assigned outside the cylinder closure");
  values_(dom_->space().index_of(x), n) = v;
}

double SpaceTimeField::max_abs_closure() const {
  const auto& sp = dom_->space();
  double m = values_.topRows(sp.interior_count()).cwiseAbs().maxCoeff();
  if (sp.boundary_count() > 0)
    m = std::max(m, values_.bottomRows(sp.boundary_count())
                        .rightCols(dom_->time_levels())
                        .cwiseAbs()
                        .maxCoeff());
  return m;
}

void SpaceTimeField::dump_csv(std::ostream& os) const {
  const auto& sp = dom_->space();
  const int d = sp.dim();
  const int T = dom_->time_levels();
  for (int i = 0; i < d; ++i) os << "x" << (i + 1) << ",";
  os << "n,value\n";
  auto row = [&](int k, int n) {
    const Site& x = sp.site_at(k);
    for (int i = 0; i < d; ++i) os << x[i] << ",";
    os << n << "," << format_double(values_(k, n)) << "\n";
  };
  for (int k = 0; k < sp.interior_count(); ++k)
    for (int n = 0; n < T; ++n) row(k, n);
  for (int k = sp.interior_count(); k < sp.closure_count(); ++k)
    for (int n = 1; n <= T; ++n) row(k, n);
  for (int k = 0; k < sp.interior_count(); ++k) row(k, T);
}

double apply_tr_hessian(const Environment& env, const LatticeField& u, const Site& x) {
  const LatticeDomain& dom = u.domain();
  if (!dom.is_interior(x)) throw DomainError("tr-Hessian requested off the domain interior");
  const SiteWeights sw = env.weights(x);
  const double ux = u[dom.index_of(x)];
  double acc = 0;
  for (int i = 0; i < sw.dim; ++i) {
    const int ip = dom.index_of(shifted(x, i, +1));
    const int im = dom.index_of(shifted(x, i, -1));
    if (ip < 0 || im < 0) throw DomainError("tr-Hessian: neighbour missing from the closure");
    acc += sw.w[i] * (u[ip] + u[im] - 2.0 * ux);
  }
  return acc;
}

double apply_L(const Environment& env, const LatticeField& u, const Site& x) {
  return apply_tr_hessian(env, u, x) / (2.0 * env.weights(x).trace);
}

ParabolicValue apply_parabolic(const Environment& env, const SpaceTimeField& u, const Site& x, int n) {
  const SpaceTimeDomain& dom = u.domain();
  if (!dom.is_interior(x, n)) throw DomainError("parabolic operator requested off the cylinder interior");
  const LatticeDomain& sp = dom.space();
  const SiteWeights sw = env.weights(x);
  const int ix = sp.index_of(x);
  const double here = u(ix, n);
  const double next = u(ix, n + 1);
  double half_sum = 0;  // sum_i (w_i/2) [u(x+e_i, n+1) + u(x-e_i, n+1)]
  for (int i = 0; i < sw.dim; ++i) {
    const int ip = sp.index_of(shifted(x, i, +1));
    const int im = sp.index_of(shifted(x, i, -1));
    half_sum += 0.5 * sw.w[i] * (u(ip, n + 1) + u(im, n + 1));
  }
  ParabolicValue v;
  v.raw = half_sum - sw.trace * next + (next - here);
  v.normalized = (half_sum + next) / (1.0 + sw.trace) - here;
  return v;
}

}  // namespace bhl
