#ifndef SOLITON_SHRINKER_HPP
#define SOLITON_SHRINKER_HPP

#include <Eigen/Dense>
#include <optional>

#include "soliton/errors.hpp"

namespace soliton {

using Eigen::MatrixX2d;
using Eigen::VectorXd;

enum class Symmetry { RoundSphere, RotationalProfile };
enum class NormalOrientation { Outward, Inward };

// Sign conventions used throughout: nu is the outward unit normal (pointing
// into the unbounded component), A = grad nu, H = tr A. With these the
// shrinker equation reads H = <X,nu>/2 and the round sphere has H > 0.

// Per-node cache along a profile curve in the (w,y) half-plane. For closed
// profiles the nodes are uniform in arclength and periodic; for sphere
// profiles they are cell-centered on the open half-circle.
struct ProfileGeometry {
  VectorXd w, y;          // positions
  VectorXd tw, ty;        // unit tangent
  VectorXd nu_w, nu_y;    // unit normal (tangent rotated +90 deg)
  VectorXd kappa;         // profile second fundamental form A_ss
  VectorXd H, Xnu, A2;    // mean curvature, <X,nu>, |A|^2
  double h = 0.0;         // arclength spacing
  double length = 0.0;    // total arclength (period if closed)
  bool closed = true;

  int size() const { return static_cast<int>(w.size()); }
};

struct ShootingConfig {
  double bracket_lo = 0.25;   // initial w-intercept bracket for the bisection
  double bracket_hi = 1.30;
  double integ_tol = 1e-12;
  double max_arclength = 60.0;
  int bisect_iters = 60;
  int nodes = 512;            // arclength-uniform profile nodes
  double residual_tol = 1e-6;
};

struct ShrinkerSurface {
  int ambient_dim = 2;  // n; the shrinker is an (n-1)-surface in R^n
  Symmetry symmetry = Symmetry::RoundSphere;
  NormalOrientation orientation = NormalOrientation::Outward;
  double radius = 0.0;     // RoundSphere: sqrt(2(n-1))
  double y_center = 0.0;   // axis offset; nonzero only for deliberately broken inputs
  ProfileGeometry prof;    // RotationalProfile: cached node geometry
  double residual_tol = 1e-8;
  double residual_achieved = 0.0;
  double inner_intercept = 0.0, outer_intercept = 0.0;  // RotationalProfile

  bool is_round() const { return symmetry == Symmetry::RoundSphere; }

  // Profile samples; for RoundSphere generated at the requested resolution
  // (default 512), for RotationalProfile the cached nodes are returned.
  ProfileGeometry profile(int m = 0) const;

  // Geodesic curvature bound based reach estimate; graph bounds for the
  // auxiliary-end parametrization derive from it.
  double reach_estimate() const;
};

ShrinkerSurface make_round_sphere(int n);

// Closed rotationally symmetric self-shrinker in R^3 by shooting the profile
// geodesic of w^{n-2} e^{-(w^2+y^2)/4} |dgamma|.
ShrinkerSurface shoot_angenent_torus(int n, const ShootingConfig& cfg = {});

// F[S] = (4pi)^{-(n-1)/2} int_S e^{-|x|^2/4}
double gaussian_area(const ShrinkerSurface& S);

struct EntropyReport {
  double gaussian_area = 0.0;
  double grid_max = 0.0;
  double best_x0 = 0.0, best_y0 = 0.0, best_t0 = 1.0;
};

// F together with a recentering/rescaling sweep; throws HypothesisError when
// the sweep beats F beyond tolerance (the input is then not a shrinker).
EntropyReport entropy_estimate(const ShrinkerSurface& S, bool check_residual = true,
                               double tol = 1e-8);

// F[(S - x0)/t0] for x0 = (a, 0, ..., 0, b); reduces to a profile quadrature.
double gaussian_area_shifted(const ShrinkerSurface& S, double a, double b, double t0);

// Shifts the surface along the rotation axis. The result is not a shrinker;
// used to exercise the violation paths.
ShrinkerSurface translated_along_axis(const ShrinkerSurface& S, double dy);

// Independent residual certificate from node positions only (high-order
// periodic finite differences; no use of the cached ODE derivatives).
double shrinker_residual_from_positions(const ProfileGeometry& prof, int n);

}  // namespace soliton

#endif
