#include "bhl/environment.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

namespace bhl {

namespace {

constexpr std::int64_t kDenseSiteLimit = 32'000'000;

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

EnvironmentLaw EnvironmentLaw::constant(int dim, double value) {
  EnvironmentLaw law;
  law.dim = dim;
  law.family = WeightFamily::Constant;
  law.a = law.b = value;
  law.validate();
  return law;
}

EnvironmentLaw EnvironmentLaw::uniform(int dim, double lo, double hi) {
  EnvironmentLaw law;
  law.dim = dim;
  law.family = WeightFamily::Uniform;
  law.a = lo;
  law.b = hi;
  law.validate();
  return law;
}

EnvironmentLaw EnvironmentLaw::two_point(int dim, double v1, double v2, double p) {
  EnvironmentLaw law;
  law.dim = dim;
  law.family = WeightFamily::TwoPoint;
  law.a = v1;
  law.b = v2;
  law.prob = p;
  law.validate();
  return law;
}

void EnvironmentLaw::validate() const {
  if (dim < 1 || dim > 3) throw ConfigError("environment law: dimension must be 1, 2 or 3");
  switch (family) {
    case WeightFamily::Constant:
      if (!finite_positive(a)) throw ConfigError("constant law: value must be finite and > 0");
      break;
    case WeightFamily::Uniform:
      if (!finite_positive(a) || !finite_positive(b) || a > b)
        throw ConfigError("uniform law: need 0 < a <= b, both finite");
      break;
    case WeightFamily::TwoPoint:
      if (!finite_positive(a) || !finite_positive(b))
        throw ConfigError("two-point law: both values must be finite and > 0");
      if (!(prob >= 0.0 && prob <= 1.0)) throw ConfigError("two-point law: p must lie in [0,1]");
      break;
  }
  if (!(kappa() > 0.0))
    throw ConfigError("environment law violates the ellipticity floor w_i/tr(w) >= 2*kappa");
}

double EnvironmentLaw::min_weight() const {
  switch (family) {
    case WeightFamily::Constant: return a;
    case WeightFamily::Uniform: return a;
    case WeightFamily::TwoPoint: return std::min(a, b);
  }
  return 0;
}

double EnvironmentLaw::max_weight() const {
  switch (family) {
    case WeightFamily::Constant: return a;
    case WeightFamily::Uniform: return b;
    case WeightFamily::TwoPoint: return std::max(a, b);
  }
  return 0;
}

double EnvironmentLaw::kappa() const {
  // Worst case over the support: one coordinate at the minimum, the other
  // d-1 at the maximum.
  const double lo = min_weight();
  const double hi = max_weight();
  return lo / (2.0 * (lo + (dim - 1) * hi));
}

double EnvironmentLaw::two_sided_kappa() const {
  return std::min(min_weight(), 1.0 / max_weight());
}

double EnvironmentLaw::sample(double u) const {
  switch (family) {
    case WeightFamily::Constant: return a;
    case WeightFamily::Uniform: return a + (b - a) * u;
    case WeightFamily::TwoPoint: return u < prob ? a : b;
  }
  return a;
}

std::vector<double> EnvironmentLaw::support_points() const {
  switch (family) {
    case WeightFamily::Constant: return {a};
    case WeightFamily::TwoPoint: return {std::min(a, b), std::max(a, b)};
    case WeightFamily::Uniform: {
      constexpr int n = 65;
      std::vector<double> pts(n);
      for (int i = 0; i < n; ++i) pts[i] = a + (b - a) * i / (n - 1);
      return pts;
    }
  }
  return {a};
}

std::string EnvironmentLaw::describe() const {
  switch (family) {
    case WeightFamily::Constant: return "constant(" + std::to_string(a) + ")";
    case WeightFamily::Uniform:
      return "uniform[" + std::to_string(a) + "," + std::to_string(b) + "]";
    case WeightFamily::TwoPoint:
      return "two_point{" + std::to_string(a) + "," + std::to_string(b) + ";p=" +
             std::to_string(prob) + "}";
  }
  return "?";
}

SiteWeights sample_site_weights(const EnvironmentLaw& law, std::uint64_t seed, const Site& x) {
  std::uint64_t key = seed;
  key = hash_combine(key, zigzag64(x[0]));
  key = hash_combine(key, zigzag64(x[1]));
  key = hash_combine(key, zigzag64(x[2]));
  CounterStream stream(key);
  SiteWeights sw;
  sw.dim = law.dim;
  for (int i = 0; i < law.dim; ++i) {
    sw.w[i] = law.sample(stream.next_uniform());
    sw.trace += sw.w[i];
  }
  return sw;
}

// --- observables ---

ObservableSpec ObservableSpec::constant(double c) {
  ObservableSpec s;
  s.kind = Kind::Const;
  s.value = c;
  return s;
}

ObservableSpec ObservableSpec::trace() {
  ObservableSpec s;
  s.kind = Kind::Trace;
  return s;
}

ObservableSpec ObservableSpec::inv_trace() {
  ObservableSpec s;
  s.kind = Kind::InvTrace;
  return s;
}

ObservableSpec ObservableSpec::coord_ratio(int axis) {
  ObservableSpec s;
  s.kind = Kind::CoordRatio;
  s.axis = axis;
  return s;
}

ObservableSpec ObservableSpec::psi_over_trace(ObservableSpec inner) {
  ObservableSpec s;
  s.kind = Kind::PsiOverTrace;
  s.inner = std::make_shared<const ObservableSpec>(std::move(inner));
  return s;
}

ObservableSpec ObservableSpec::indicator_w1_above(double threshold) {
  ObservableSpec s;
  s.kind = Kind::Indicator;
  s.value = threshold;
  return s;
}

double ObservableSpec::eval(const SiteWeights& sw) const {
  switch (kind) {
    case Kind::Const: return value;
    case Kind::Trace: return sw.trace;
    case Kind::InvTrace: return 1.0 / sw.trace;
    case Kind::CoordRatio: return sw.w[axis] / sw.trace;
    case Kind::PsiOverTrace: return inner->eval(sw) / sw.trace;
    case Kind::Indicator: return sw.w[0] > value ? 1.0 : 0.0;
  }
  return 0;
}

double ObservableSpec::sup_norm(const EnvironmentLaw& law) const {
  const std::vector<double> pts = law.support_points();
  const int d = law.dim;
  std::array<std::size_t, 3> idx{0, 0, 0};
  double best = 0.0;
  while (true) {
    SiteWeights sw;
    sw.dim = d;
    for (int i = 0; i < d; ++i) {
      sw.w[i] = pts[idx[i]];
      sw.trace += sw.w[i];
    }
    best = std::max(best, std::fabs(eval(sw)));
    int axis = 0;
    while (axis < d) {
      if (++idx[axis] < pts.size()) break;
      idx[axis] = 0;
      ++axis;
    }
    if (axis == d) break;
  }
  return best;
}

std::string ObservableSpec::describe() const {
  switch (kind) {
    case Kind::Const: return "const(" + std::to_string(value) + ")";
    case Kind::Trace: return "trace";
    case Kind::InvTrace: return "inv_trace";
    case Kind::CoordRatio: return "coord_ratio(" + std::to_string(axis + 1) + ")";
    case Kind::PsiOverTrace: return "psi_over_trace(" + inner->describe() + ")";
    case Kind::Indicator: return "indicator(w1>" + std::to_string(value) + ")";
  }
  return "?";
}

// --- environment ---

Environment::Environment(EnvironmentLaw law, Box box, std::uint64_t seed)
    : law_(std::move(law)), box_(box), seed_(seed), abs_box_(box) {
  law_.validate();
  if (box_.dim != law_.dim) throw ConfigError("environment box dimension does not match the law");
  for (int i = 0; i < box_.dim; ++i)
    if (box_.lo[i] > box_.hi[i]) throw ConfigError("environment box is empty");
  if (box_.site_count() <= kDenseSiteLimit) {
    auto values = std::make_shared<std::vector<double>>();
    values->resize(static_cast<std::size_t>(box_.site_count()) * law_.dim);
    const int d = law_.dim;
    std::size_t pos = 0;
    Site x = box_.lo;
    while (true) {
      const SiteWeights sw = sample_site_weights(law_, seed_, x);
      for (int i = 0; i < d; ++i) (*values)[pos++] = sw.w[i];
      int axis = d - 1;
      while (axis >= 0) {
        if (++x[axis] <= box_.hi[axis]) break;
        x[axis] = box_.lo[axis];
        --axis;
      }
      if (axis < 0) break;
    }
    dense_ = std::move(values);
  }
}

std::size_t Environment::dense_index(const Site& abs) const {
  std::size_t idx = 0;
  for (int i = 0; i < abs_box_.dim; ++i)
    idx = idx * static_cast<std::size_t>(abs_box_.extent(i)) +
          static_cast<std::size_t>(abs[i] - abs_box_.lo[i]);
  return idx * law_.dim;
}

SiteWeights Environment::weights(const Site& x) const {
  if (!box_.contains(x))
    throw DomainError("site " + to_string(x, law_.dim) + " outside the environment box");
  const Site abs = add(x, shift_);
  if (dense_) {
    SiteWeights sw;
    sw.dim = law_.dim;
    const double* base = dense_->data() + dense_index(abs);
    for (int i = 0; i < law_.dim; ++i) {
      sw.w[i] = base[i];
      sw.trace += base[i];
    }
    return sw;
  }
  return sample_site_weights(law_, seed_, abs);
}

std::array<double, 6> Environment::transition_probabilities(const Site& x) const {
  const SiteWeights sw = weights(x);
  std::array<double, 6> p{0, 0, 0, 0, 0, 0};
  for (int i = 0; i < sw.dim; ++i) {
    const double q = sw.w[i] / (2.0 * sw.trace);
    p[2 * i] = q;
    p[2 * i + 1] = q;
  }
  return p;
}

Environment Environment::shifted(const Site& x) const {
  Environment view = *this;
  view.shift_ = add(shift_, x);
  for (int i = 0; i < box_.dim; ++i) {
    view.box_.lo[i] = box_.lo[i] - x[i];
    view.box_.hi[i] = box_.hi[i] - x[i];
  }
  return view;
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_i16(std::ostream& os, std::int16_t v) {
  const auto u = static_cast<std::uint16_t>(v);
  unsigned char b[2] = {static_cast<unsigned char>(u & 0xFF),
                        static_cast<unsigned char>((u >> 8) & 0xFF)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::int16_t get_i16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::int16_t>(static_cast<std::uint16_t>(b[0]) |
                                   (static_cast<std::uint16_t>(b[1]) << 8));
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

void put_f64le(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

double get_f64le(std::istream& is) {
  const std::uint64_t bits = get_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void Environment::dump(std::ostream& os) const {
  if (!dense_) throw DomainError("environment box too large to dump");
  os.write("BHL1", 4);
  put_u32(os, static_cast<std::uint32_t>(law_.dim));
  for (int i = 0; i < 3; ++i) put_i16(os, static_cast<std::int16_t>(abs_box_.lo[i]));
  for (int i = 0; i < 3; ++i) put_i16(os, static_cast<std::int16_t>(abs_box_.hi[i]));
  put_u64(os, seed_);
  put_u32(os, 0);  // pad to 32 bytes
  for (double v : *dense_) put_f64le(os, v);
}

Environment Environment::load(std::istream& is, const EnvironmentLaw& law_hint) {
  char magic[4];
  is.read(magic, 4);
  if (std::memcmp(magic, "BHL1", 4) != 0) throw ConfigError("environment dump: bad magic");
  const int dim = static_cast<int>(get_u32(is));
  Box box;
  box.dim = dim;
  for (int i = 0; i < 3; ++i) box.lo[i] = get_i16(is);
  for (int i = 0; i < 3; ++i) box.hi[i] = get_i16(is);
  const std::uint64_t seed = get_u64(is);
  get_u32(is);
  Environment env;
  env.law_ = law_hint;
  env.law_.dim = dim;
  env.box_ = env.abs_box_ = box;
  env.seed_ = seed;
  auto values = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(box.site_count()) * dim);
  for (double& v : *values) v = get_f64le(is);
  if (!is) throw ConfigError("environment dump: truncated payload");
  env.dense_ = std::move(values);
  return env;
}

double observable_eval(const ObservableSpec& spec, const Environment& env, const Site& x) {
  return spec.eval(env.weights(x));
}

Environment sample_environment(const EnvironmentLaw& law, const Box& box, std::uint64_t seed) {
  return Environment(law, box, seed);
}

}  // namespace bhl
