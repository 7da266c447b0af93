#include "bhl/walk.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

namespace bhl {

namespace {

void mean_and_se(const std::vector<double>& vals, double& mean, double& se) {
  const long n = static_cast<long>(vals.size());
  double s = 0;
  for (double v : vals) s += v;
  mean = s / static_cast<double>(n);
  if (n < 2) {
    se = 0;
    return;
  }
  double ss = 0;
  for (double v : vals) ss += (v - mean) * (v - mean);
  se = std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
}

std::array<double, 3> scaled(const Site& x, double factor) {
  return {x[0] * factor, x[1] * factor, x[2] * factor};
}

}  // namespace

std::string PathFunctionalEstimate::to_json() const {
  std::ostringstream os;
  os << "{\"mean\":" << mean << ",\"se\":" << se << ",\"n\":" << count
     << ",\"truncated\":" << truncated << "}";
  return os.str();
}

Site step(const Environment& env, const Site& x, CounterStream& stream) {
  if (!env.interior(x))
    throw TruncationError("walk at the environment box edge: " + to_string(x, env.law().dim));
  const SiteWeights sw = env.weights(x);
  const double u = stream.next_uniform();
  double acc = 0;
  const int d = sw.dim;
  for (int i = 0; i < d; ++i) {
    const double q = sw.w[i] / (2.0 * sw.trace);
    acc += q;
    if (u < acc) return shifted(x, i, +1);
    acc += q;
    if (u < acc) return shifted(x, i, -1);
  }
  return shifted(x, d - 1, -1);  // u landed in the last cell's rounding slack
}

Site lazy_step(const Environment& env, const Site& x, CounterStream& stream) {
  if (!env.interior(x))
    throw TruncationError("lazy walk at the environment box edge: " + to_string(x, env.law().dim));
  const SiteWeights sw = env.weights(x);
  const double u = stream.next_uniform();
  const double denom = 2.0 * (1.0 + sw.trace);
  double acc = 0;
  for (int i = 0; i < sw.dim; ++i) {
    const double q = sw.w[i] / denom;
    acc += q;
    if (u < acc) return shifted(x, i, +1);
    acc += q;
    if (u < acc) return shifted(x, i, -1);
  }
  return x;  // stay put
}

ExitResult run_until_exit(const Environment& env, const Site& start, const LatticeDomain& B,
                          CounterStream& stream) {
  ExitResult r;
  r.exit_site = start;
  while (B.is_interior(r.exit_site)) {
    r.exit_site = step(env, r.exit_site, stream);
    ++r.tau;
  }
  if (!B.in_closure(r.exit_site))
    throw DomainError("walk exited into a site outside the domain closure");
  return r;
}

PathFunctionalEstimate feynman_kac_elliptic(const Environment& env, const Site& start,
                                            const LatticeDomain& B, const SpatialFn& f,
                                            const ObservableSpec& psi, const SpatialFn& g,
                                            double R, long samples, std::uint64_t seed) {
  if (samples < 1) throw ConfigError("feynman_kac_elliptic: need at least one sample");
  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(samples));
  const double invR = 1.0 / R;
  const double invR2 = invR * invR;
  for (long w = 0; w < samples; ++w) {
    CounterStream stream = walk_stream(seed, static_cast<std::uint64_t>(w));
    Site x = start;
    double running = 0;
    while (B.is_interior(x)) {
      running += f(scaled(x, invR)) * psi.eval(env.weights(x));
      x = step(env, x, stream);
    }
    const double nrm = norm(x);
    vals.push_back(g(scaled(x, nrm > 0 ? 1.0 / nrm : 0.0)) - invR2 * running);
  }
  PathFunctionalEstimate est;
  est.count = samples;
  mean_and_se(vals, est.mean, est.se);
  return est;
}

PathFunctionalEstimate environment_process_average(const Environment& env, const Site& start,
                                                   long horizon, const ObservableSpec& psi,
                                                   long samples, std::uint64_t seed) {
  if (horizon < 1 || samples < 1)
    throw ConfigError("environment_process_average: horizon and samples must be >= 1");
  const Box& box = env.box();
  for (int i = 0; i < box.dim; ++i) {
    const long room = std::min<long>(start[i] - box.lo[i], box.hi[i] - start[i]);
    if (room <= horizon)
      throw TruncationError("environment box radius must exceed the walk horizon (axis " +
                            std::to_string(i + 1) + ": room " + std::to_string(room) + ")");
  }
  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(samples));
  for (long w = 0; w < samples; ++w) {
    CounterStream stream = walk_stream(seed, static_cast<std::uint64_t>(w));
    Site x = start;
    double running = 0;
    for (long i = 0; i < horizon; ++i) {
      running += psi.eval(env.weights(x));
      x = step(env, x, stream);
    }
    vals.push_back(running / static_cast<double>(horizon));
  }
  PathFunctionalEstimate est;
  est.count = samples;
  mean_and_se(vals, est.mean, est.se);
  return est;
}

PathFunctionalEstimate stopped_observable_average(const Environment& env, const Site& start,
                                                  const LatticeDomain& B, long horizon,
                                                  const ObservableSpec& psi, long samples,
                                                  std::uint64_t seed) {
  if (horizon < 1 || samples < 1)
    throw ConfigError("stopped_observable_average: horizon and samples must be >= 1");
  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(samples));
  for (long w = 0; w < samples; ++w) {
    CounterStream stream = walk_stream(seed, static_cast<std::uint64_t>(w));
    Site x = start;
    double running = 0;
    for (long i = 0; i < horizon && B.is_interior(x); ++i) {
      running += psi.eval(env.weights(x));
      x = step(env, x, stream);
    }
    vals.push_back(running / static_cast<double>(horizon));
  }
  PathFunctionalEstimate est;
  est.count = samples;
  mean_and_se(vals, est.mean, est.se);
  return est;
}

Site walk_endpoint(const Environment& env, const Site& start, long n, CounterStream& stream) {
  Site x = start;
  for (long i = 0; i < n; ++i) x = step(env, x, stream);
  return x;
}

void dump_paths_csv(std::ostream& os, const Environment& env, const Site& start, long horizon,
                    long walks, std::uint64_t seed) {
  const int d = env.law().dim;
  os << "walk_index,step";
  for (int i = 0; i < d; ++i) os << ",x" << (i + 1);
  os << "\n";
  for (long w = 0; w < walks; ++w) {
    CounterStream stream = walk_stream(seed, static_cast<std::uint64_t>(w));
    Site x = start;
    for (long i = 0; i <= horizon; ++i) {
      os << w << "," << i;
      for (int c = 0; c < d; ++c) os << "," << x[c];
      os << "\n";
      if (i < horizon) x = step(env, x, stream);
    }
  }
}

}  // namespace bhl
