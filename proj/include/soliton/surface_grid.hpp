#ifndef SOLITON_SURFACE_GRID_HPP
#define SOLITON_SURFACE_GRID_HPP

#include <Eigen/Dense>

#include "soliton/shrinker.hpp"

namespace soliton {

// Discrete surface used by the operator and end-construction modules.
// Geometry is cached per node in the orthonormal Fermi frame (e_s, e_theta):
// the metric is the identity there, so only the second fundamental form and
// the tangential position components are carried. Sign convention: entries
// come from A = grad nu (outward nu), matching the shrinker cache.
enum class GridKind {
  CircleFull,       // n = 2: the full circle, fields u(theta_i, z)
  ProfileRotational,  // n = 3 torus: rotationally invariant fields u(s_i, z)
  RoundConstant,    // round sphere with x-constant fields: a single node
};

struct SurfaceGrid {
  GridKind kind = GridKind::CircleFull;
  int n = 2;         // ambient dimension
  int d = 1;         // intrinsic dimension of the shrinker
  double h = 0.0;    // node spacing in arclength (periodic)
  VectorXd s;        // node coordinate
  VectorXd orbit_w;  // orbit radius per node (ProfileRotational); used by div
  VectorXd A_ss, A_tt;  // second fundamental form in the frame (A_tt unused when d=1)
  VectorXd X_s;         // <X, e_s>
  VectorXd Xperp;       // <X, nu>
  VectorXd A2;          // |A|^2
  VectorXd weight;      // Gaussian measure per node, realizes the L^2(S) product
  VectorXd area_weight; // plain surface measure per node (angular factor included)
  double reach = 1.0;   // normal injectivity estimate of the shrinker

  int size() const { return static_cast<int>(s.size()); }
  double inner(const VectorXd& a, const VectorXd& b) const {
    return (a.array() * b.array() * weight.array()).sum();
  }
};

inline SurfaceGrid make_circle_grid(const ShrinkerSurface& S, int m) {
  if (S.ambient_dim != 2 || !S.is_round())
    throw DomainError("make_circle_grid: expects the round circle in R^2");
  SurfaceGrid g;
  g.kind = GridKind::CircleFull;
  g.n = 2;
  g.d = 1;
  const double r = S.radius;
  const double len = 2.0 * std::numbers::pi * r;
  g.h = len / m;
  g.s.setLinSpaced(m, 0.0, len - g.h);
  g.orbit_w = VectorXd::Zero(m);
  g.A_ss = VectorXd::Constant(m, 1.0 / r);
  g.A_tt = VectorXd::Zero(m);
  g.X_s = VectorXd::Zero(m);
  g.Xperp = VectorXd::Constant(m, r);
  g.A2 = VectorXd::Constant(m, 1.0 / (r * r));
  g.weight = VectorXd::Constant(m, std::exp(-0.25 * r * r) * g.h);
  g.area_weight = VectorXd::Constant(m, g.h);
  g.reach = r;
  return g;
}

inline SurfaceGrid make_profile_rotational_grid(const ShrinkerSurface& S) {
  if (S.is_round() || S.ambient_dim != 3)
    throw DomainError("make_profile_rotational_grid: expects a rotational profile in R^3");
  const ProfileGeometry& p = S.prof;
  const int m = p.size();
  SurfaceGrid g;
  g.kind = GridKind::ProfileRotational;
  g.n = 3;
  g.d = 2;
  g.h = p.h;
  g.s.setLinSpaced(m, 0.0, p.length - p.h);
  g.orbit_w = p.w;
  g.A_ss = p.kappa;
  g.A_tt.resize(m);
  g.X_s.resize(m);
  g.Xperp = p.Xnu;
  g.A2 = p.A2;
  g.weight.resize(m);
  for (int i = 0; i < m; ++i) {
    g.A_tt[i] = p.nu_w[i] / p.w[i];
    g.X_s[i] = p.w[i] * p.tw[i] + p.y[i] * p.ty[i];
    // measure: w^{n-2} e^{-|X|^2/4} h   (angular factor handled by mode normalization)
    g.weight[i] = p.w[i] * std::exp(-0.25 * (p.w[i] * p.w[i] + p.y[i] * p.y[i])) * p.h;
  }
  g.area_weight = 2.0 * std::numbers::pi * p.w.array() * p.h;
  g.reach = S.reach_estimate();
  return g;
}

inline SurfaceGrid make_round_constant_grid(const ShrinkerSurface& S) {
  if (!S.is_round()) throw DomainError("make_round_constant_grid: expects a round shrinker");
  SurfaceGrid g;
  g.kind = GridKind::RoundConstant;
  g.n = S.ambient_dim;
  g.d = S.ambient_dim - 1;
  g.h = 1.0;
  const double r = S.radius;
  g.s = VectorXd::Zero(1);
  g.orbit_w = VectorXd::Zero(1);
  g.A_ss = VectorXd::Constant(1, 1.0 / r);
  g.A_tt = VectorXd::Constant(1, 1.0 / r);
  g.X_s = VectorXd::Zero(1);
  g.Xperp = VectorXd::Constant(1, r);
  g.A2 = VectorXd::Constant(1, g.d / (r * r));
  g.weight = VectorXd::Constant(1, 1.0);
  // |S^{n-1}| r^{n-1}
  const int nn = S.ambient_dim;
  g.area_weight = VectorXd::Constant(
      1, 2.0 * std::pow(std::numbers::pi, 0.5 * nn) / std::tgamma(0.5 * nn) *
             std::pow(r, nn - 1));
  g.reach = r;
  return g;
}

}  // namespace soliton

#endif
