#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bhl/environment.hpp"
#include "bhl/lattice.hpp"
#include "bhl/prng.hpp"

namespace bhl {

using SpatialFn = std::function<double(const std::array<double, 3>&)>;

struct WalkState {
  Site site{0, 0, 0};
  long steps = 0;
  bool truncated = false;
};

// Per-walk stream keyed by (master seed, walk index); replaying a walk with
// the same key reproduces the same path on every platform.
inline CounterStream walk_stream(std::uint64_t master_seed, std::uint64_t walk_index) {
  return CounterStream(hash_combine(master_seed, walk_index));
}

// One move of the balanced walk: x -> x +- e_i with probability w_i/(2 tr w),
// drawn by inverse CDF over the outcomes (+e1, -e1, ..., +ed, -ed).
Site step(const Environment& env, const Site& x, CounterStream& stream);

// One move of the lazy space-time chain: stay with probability 1/(1 + tr w),
// move to x +- e_i with probability w_i/(2(1 + tr w)); the outcome order is
// (+e1, -e1, ..., +ed, -ed, stay). The time coordinate always advances by one.
Site lazy_step(const Environment& env, const Site& x, CounterStream& stream);

struct ExitResult {
  Site exit_site{0, 0, 0};
  long tau = 0;
};

// Run until the walk first leaves B; the exit site lies in dB.
ExitResult run_until_exit(const Environment& env, const Site& start, const LatticeDomain& B,
                          CounterStream& stream);

struct PathFunctionalEstimate {
  double mean = 0;
  double se = 0;
  long count = 0;
  long truncated = 0;
  std::string to_json() const;
};

// Monte Carlo estimator of g(X_tau/|X_tau|) - (1/R^2) sum_{i<tau} f(X_i/R) psi(shift_{X_i} w),
// averaged over independent walks started at x.
PathFunctionalEstimate feynman_kac_elliptic(const Environment& env, const Site& start,
                                            const LatticeDomain& B, const SpatialFn& f,
                                            const ObservableSpec& psi, const SpatialFn& g,
                                            double R, long samples, std::uint64_t seed);

// Time average (1/n) sum_{i<n} psi(shift_{X_i} w) of the environment viewed
// from the particle, averaged over independent walks. Requires a box large
// enough that an n-step walk cannot reach its edge.
PathFunctionalEstimate environment_process_average(const Environment& env, const Site& start,
                                                   long horizon, const ObservableSpec& psi,
                                                   long samples, std::uint64_t seed);

// Same average stopped at (exit from B) wedge horizon, normalised by the
// horizon; the two stopping rules the experiments exercise.
PathFunctionalEstimate stopped_observable_average(const Environment& env, const Site& start,
                                                  const LatticeDomain& B, long horizon,
                                                  const ObservableSpec& psi, long samples,
                                                  std::uint64_t seed);

// Endpoint X_n of one walk (Berry-Esseen sampling).
Site walk_endpoint(const Environment& env, const Site& start, long n, CounterStream& stream);

// CSV dump "walk_index,step,x1,..,xd" of whole paths.
void dump_paths_csv(std::ostream& os, const Environment& env, const Site& start, long horizon,
                    long walks, std::uint64_t seed);

}  // namespace bhl
