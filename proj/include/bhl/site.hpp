#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace bhl {

// Lattice site in up to three dimensions; unused coordinates stay zero.
using Site = std::array<int, 3>;

inline Site site(int x0, int x1 = 0, int x2 = 0) { return {x0, x1, x2}; }

inline Site unit(int axis) {
  Site e{0, 0, 0};
  e[axis] = 1;
  return e;
}

inline Site add(const Site& a, const Site& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

inline Site sub(const Site& a, const Site& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

inline Site shifted(const Site& x, int axis, int step) {
  Site y = x;
  y[axis] += step;
  return y;
}

// Exact |x|^2 in integer arithmetic; avoids floating-point misclassification
// of ball membership.
inline std::int64_t norm2i(const Site& x) {
  std::int64_t s = 0;
  for (int c : x) s += static_cast<std::int64_t>(c) * c;
  return s;
}

inline double norm(const Site& x) { return std::sqrt(static_cast<double>(norm2i(x))); }

inline std::string to_string(const Site& x, int dim) {
  std::string s = "(";
  for (int i = 0; i < dim; ++i) {
    if (i) s += ",";
    s += std::to_string(x[i]);
  }
  return s + ")";
}

// Axis-aligned box of lattice sites, inclusive bounds.
struct Box {
  int dim = 0;
  Site lo{0, 0, 0};
  Site hi{0, 0, 0};

  static Box centered(int dim, int radius) {
    Box b;
    b.dim = dim;
    for (int i = 0; i < dim; ++i) {
      b.lo[i] = -radius;
      b.hi[i] = radius;
    }
    return b;
  }

  bool contains(const Site& x) const {
    for (int i = 0; i < dim; ++i)
      if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
  }

  // Strict interior: all 2*dim neighbours stay inside.
  bool interior(const Site& x) const {
    for (int i = 0; i < dim; ++i)
      if (x[i] <= lo[i] || x[i] >= hi[i]) return false;
    return true;
  }

  std::int64_t extent(int axis) const {
    return static_cast<std::int64_t>(hi[axis]) - lo[axis] + 1;
  }

  std::int64_t site_count() const {
    std::int64_t n = 1;
    for (int i = 0; i < dim; ++i) n *= extent(i);
    return n;
  }
};

// Ceiling of a nonnegative double that snaps values within a few ulps of an
// integer, so domain extents are stable across platforms.
inline std::int64_t ceil_guarded(double v) {
  double r = std::nearbyint(v);
  if (std::fabs(v - r) <= 8.0 * 2.220446049250313e-16 * std::fmax(1.0, std::fabs(v)))
    return static_cast<std::int64_t>(r);
  return static_cast<std::int64_t>(std::ceil(v));
}

}  // namespace bhl
