#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "bhl/errors.hpp"
#include "bhl/prng.hpp"
#include "bhl/site.hpp"

namespace bhl {

enum class WeightFamily { Constant, Uniform, TwoPoint };

// Law of one diagonal weight vector: the d coordinates are i.i.d. draws from
// a named scalar family with strictly positive, bounded support.
struct EnvironmentLaw {
  int dim = 2;
  WeightFamily family = WeightFamily::Constant;
  double a = 1.0;    // constant value | uniform lower | two-point low value
  double b = 1.0;    // uniform upper | two-point high value
  double prob = 0.5; // two-point P(w = a)

  static EnvironmentLaw constant(int dim, double value);
  static EnvironmentLaw uniform(int dim, double lo, double hi);
  static EnvironmentLaw two_point(int dim, double v1, double v2, double p);

  void validate() const;

  double min_weight() const;
  double max_weight() const;

  // Ellipticity floor: inf over the support of min_i w_i / (2 tr w).
  double kappa() const;

  // Two-sided bound kappa2*I <= w <= I/kappa2 over the whole support.
  double two_sided_kappa() const;

  // One scalar draw from one uniform variate.
  double sample(double u) const;

  // Representative values of the scalar support (atoms, or a fine grid for
  // the uniform family); used for sup-norm evaluation of observables.
  std::vector<double> support_points() const;

  std::string describe() const;
  bool is_constant() const { return family == WeightFamily::Constant; }
};

// Diagonal weight vector at one site together with its trace.
struct SiteWeights {
  std::array<double, 3> w{0, 0, 0};
  double trace = 0;
  int dim = 0;
};

// Pure function of (law, seed, absolute site): the weight vector drawn at
// that site. Enlarging a box never perturbs previously generated sites.
SiteWeights sample_site_weights(const EnvironmentLaw& law, std::uint64_t seed, const Site& x);

// Bounded functional of the weight vector at a single site.
struct ObservableSpec {
  enum class Kind { Const, Trace, InvTrace, CoordRatio, PsiOverTrace, Indicator };

  Kind kind = Kind::Const;
  double value = 0.0;  // constant value, or indicator threshold
  int axis = 0;
  std::shared_ptr<const ObservableSpec> inner;

  static ObservableSpec constant(double c);
  static ObservableSpec trace();
  static ObservableSpec inv_trace();
  static ObservableSpec coord_ratio(int axis);
  static ObservableSpec psi_over_trace(ObservableSpec inner);
  static ObservableSpec indicator_w1_above(double threshold);

  double eval(const SiteWeights& sw) const;

  // sup |psi| over the law's support (evaluated on the support grid).
  double sup_norm(const EnvironmentLaw& law) const;

  std::string describe() const;
};

// A realised environment: weight vectors over a declared box, reproducible
// bit-for-bit from (law, box, seed). Immutable after construction; shifted
// views share storage. Boxes too large to materialise evaluate sites on
// demand through the same per-site function.
class Environment {
 public:
  Environment(EnvironmentLaw law, Box box, std::uint64_t seed);

  const EnvironmentLaw& law() const { return law_; }
  const Box& box() const { return box_; }
  std::uint64_t seed() const { return seed_; }
  bool materialized() const { return static_cast<bool>(dense_); }

  bool contains(const Site& x) const { return box_.contains(x); }
  bool interior(const Site& x) const { return box_.interior(x); }

  SiteWeights weights(const Site& x) const;

  // Transition kernel of the balanced walk at x: probabilities for the moves
  // +e1,-e1,...,+ed,-ed in that fixed order; w_i/(2 tr w) each way.
  std::array<double, 6> transition_probabilities(const Site& x) const;

  // View of the environment re-centred at x: shifted.weights(y) == weights(x+y).
  Environment shifted(const Site& x) const;

  // Binary dump: 32-byte header (magic "BHL1", dim, box extents, seed), then
  // little-endian doubles, d per site, row-major over the box.
  void dump(std::ostream& os) const;
  static Environment load(std::istream& is, const EnvironmentLaw& law_hint);

 private:
  Environment() = default;

  EnvironmentLaw law_;
  Box box_;                 // in the caller's (possibly shifted) coordinates
  Site shift_{0, 0, 0};     // absolute site of the logical origin
  std::uint64_t seed_ = 0;
  std::shared_ptr<const std::vector<double>> dense_;  // d values per site, absolute box order
  Box abs_box_;             // box in absolute coordinates (dense layout)

  std::size_t dense_index(const Site& abs) const;
};

double observable_eval(const ObservableSpec& spec, const Environment& env, const Site& x);

Environment sample_environment(const EnvironmentLaw& law, const Box& box, std::uint64_t seed);

}  // namespace bhl
