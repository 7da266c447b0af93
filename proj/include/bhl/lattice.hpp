#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "bhl/environment.hpp"
#include "bhl/errors.hpp"
#include "bhl/site.hpp"

namespace bhl {

enum class DomainKind { Ball, Cube, Triadic, Explicit };

// Finite set of lattice sites plus its discrete boundary
//   dB = { z not in B : dist(z, x) = 1 for some x in B }.
// Sites are indexed canonically: interior first, then boundary, each sorted
// lexicographically. A dense bounding-box table maps sites back to indices.
class LatticeDomain {
 public:
  static LatticeDomain ball(double radius, int dim, Site center = {0, 0, 0});
  // Cube of side length `side` centred at `center`: {|x - c|_inf < side/2}.
  static LatticeDomain cube(double side, int dim, Site center = {0, 0, 0});
  // Triadic cube Q_n of side 3^n centred at the origin; 3^(n*d) sites.
  static LatticeDomain triadic_cube(int n, int dim);
  static LatticeDomain from_sites(std::vector<Site> sites, int dim, DomainKind kind = DomainKind::Explicit);

  // Centre of the unique level-m cube y + Q_m, y in 3^m Z^d, containing x.
  static Site triadic_center_of(const Site& x, int m);
  static LatticeDomain triadic_subcube(const Site& x, int m, int dim);

  DomainKind kind() const { return kind_; }
  int dim() const { return dim_; }
  double radius() const { return radius_; }
  Site center() const { return center_; }

  const std::vector<Site>& interior() const { return interior_; }
  const std::vector<Site>& boundary() const { return boundary_; }
  int interior_count() const { return static_cast<int>(interior_.size()); }
  int boundary_count() const { return static_cast<int>(boundary_.size()); }
  int closure_count() const { return interior_count() + boundary_count(); }

  // Canonical index of a site in the closure, or -1.
  int index_of(const Site& x) const;
  bool is_interior(const Site& x) const {
    const int i = index_of(x);
    return i >= 0 && i < interior_count();
  }
  bool in_closure(const Site& x) const { return index_of(x) >= 0; }
  const Site& site_at(int index) const {
    return index < interior_count() ? interior_[index] : boundary_[index - interior_count()];
  }

  // Exact Euclidean diameter of the closure.
  double diameter() const;

 private:
  LatticeDomain() = default;
  void finalize();

  DomainKind kind_ = DomainKind::Explicit;
  int dim_ = 0;
  double radius_ = 0;
  Site center_{0, 0, 0};
  std::vector<Site> interior_;
  std::vector<Site> boundary_;
  Box bbox_;  // bounding box of the closure
  std::vector<std::int32_t> index_;
};

using DomainPtr = std::shared_ptr<const LatticeDomain>;

// Real-valued function on the closure of a domain, stored flat in canonical
// index order.
class LatticeField {
 public:
  LatticeField() = default;
  explicit LatticeField(DomainPtr dom)
      : dom_(std::move(dom)), values_(Eigen::VectorXd::Zero(dom_->closure_count())) {}

  const LatticeDomain& domain() const { return *dom_; }
  DomainPtr domain_ptr() const { return dom_; }

  double operator[](int index) const { return values_[index]; }
  double& operator[](int index) { return values_[index]; }

  double at(const Site& x) const {
    const int i = dom_->index_of(x);
    if (i < 0) throw DomainError("field evaluated outside the domain closure");
    return values_[i];
  }
  void set(const Site& x, double v) {
    const int i = dom_->index_of(x);
    if (i < 0) throw DomainError("field assigned outside the domain closure");
    values_[i] = v;
  }

  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }

  double max_abs() const { return values_.size() ? values_.cwiseAbs().maxCoeff() : 0.0; }
  double max_abs_interior() const {
    const int n = dom_->interior_count();
    return n ? values_.head(n).cwiseAbs().maxCoeff() : 0.0;
  }

  // CSV dump "x1,...,xd,value" in canonical index order.
  void dump_csv(std::ostream& os) const;

 private:
  DomainPtr dom_;
  Eigen::VectorXd values_;
};

// Discrete parabolic cylinder K_R: spatial ball B_R at integer times
// {0,...,T-1} with T = ceil(R^2); lateral boundary dB_R x {1..T} and time
// boundary B_R x {T}.
class SpaceTimeDomain {
 public:
  SpaceTimeDomain(double radius, int dim);

  double radius() const { return radius_; }
  int dim() const { return dim_; }
  int time_levels() const { return levels_; }  // T = ceil(R^2)
  const LatticeDomain& space() const { return *space_; }
  DomainPtr space_ptr() const { return space_; }

  bool is_interior(const Site& x, int n) const {
    return n >= 0 && n < levels_ && space_->is_interior(x);
  }
  bool is_lateral(const Site& x, int n) const {
    const int i = space_->index_of(x);
    return i >= space_->interior_count() && n >= 1 && n <= levels_;
  }
  bool is_time_boundary(const Site& x, int n) const {
    return n == levels_ && space_->is_interior(x);
  }
  bool in_closure(const Site& x, int n) const {
    return is_interior(x, n) || is_lateral(x, n) || is_time_boundary(x, n);
  }

  std::int64_t interior_point_count() const {
    return static_cast<std::int64_t>(space_->interior_count()) * levels_;
  }
  std::int64_t lateral_point_count() const {
    return static_cast<std::int64_t>(space_->boundary_count()) * levels_;
  }
  std::int64_t time_boundary_point_count() const { return space_->interior_count(); }

 private:
  double radius_;
  int dim_;
  int levels_;
  DomainPtr space_;
};

using SpaceTimePtr = std::shared_ptr<const SpaceTimeDomain>;

// Function on the closure of a cylinder, stored as (site index, time level).
class SpaceTimeField {
 public:
  SpaceTimeField() = default;
  explicit SpaceTimeField(SpaceTimePtr dom);

  const SpaceTimeDomain& domain() const { return *dom_; }
  SpaceTimePtr domain_ptr() const { return dom_; }

  double operator()(int site_index, int n) const { return values_(site_index, n); }
  double& operator()(int site_index, int n) { return values_(site_index, n); }

  double at(const Site& x, int n) const;
  void set(const Site& x, int n, double v);

  double max_abs_closure() const;

  // CSV dump "x1,...,xd,n,value": interior block, then lateral, then time
  // boundary, each in canonical site order with ascending time.
  void dump_csv(std::ostream& os) const;

 private:
  SpaceTimePtr dom_;
  Eigen::MatrixXd values_;  // rows: spatial closure index, cols: 0..T
};

// Non-divergence form difference operator tr(w(x) grad^2 u) =
// sum_i w_i(x) [u(x+e_i) + u(x-e_i) - 2 u(x)].
double apply_tr_hessian(const Environment& env, const LatticeField& u, const Site& x);

// Normalised operator L_w u(x) = sum_y w(x,y)[u(y)-u(x)] = tr(w grad^2 u) / (2 tr w).
double apply_L(const Environment& env, const LatticeField& u, const Site& x);

struct ParabolicValue {
  double raw = 0;         // (1/2) tr(w grad^2 u(., n+1)) + [u(x,n+1) - u(x,n)]
  double normalized = 0;  // E[u(Yhat_1)] - u(x,n): generator of the lazy space-time chain
};

ParabolicValue apply_parabolic(const Environment& env, const SpaceTimeField& u, const Site& x, int n);

}  // namespace bhl
