#ifndef SOLITON_MODAL_ODE_HPP
#define SOLITON_MODAL_ODE_HPP

#include <Eigen/Dense>
#include <functional>

#include "soliton/grid.hpp"

namespace soliton {

// Scalar degenerate operator L_mu = d^2/dz^2 + d/dz - mu/z on half-lines.
// The two branches: b ~ z^mu (polynomial) and w ~ e^{-z} (fast decay).

enum class ModalKind { HomogeneousPoly, FastDecay, Inhomogeneous };

struct ModalSolution {
  double mu = 0.0;
  double z0 = 0.0;  // left end of the certified range
  ModalKind kind = ModalKind::HomogeneousPoly;
  LogGrid grid;
  VectorXd values;
  VectorXd derivs;
  VectorXd log_values;  // FastDecay: log w (w itself may underflow)
  bool has_log = false;
  double residual = 0.0;  // normalized interior collocation residual

  double value_at_index(int i) const { return values[i]; }
};

struct WeightedNormResult {
  double value = 0.0;
  double error_bar = 0.0;
  bool finite = true;  // divergent tails are signaled, not thrown
  double tail_exponent = 0.0;
};

// Smallest z for which the two-sided barrier z^mu +- z^{mu-1/2} works,
// i.e. L_mu(z^{mu-1/2} +- z^mu) <= 0. Closed-form root of the barrier
// inequality, floored at 5.
double homogeneous_threshold(double mu);

// Barrier threshold for the fast-decay envelopes e^{-z+z0}(z/z0)^{-mu+-1}.
double fast_decay_threshold(double mu);

// b with b/z^mu -> 1, satisfying |b/z^mu - 1| <= z^{-1/2} on [z_lo, z_hi]
// when z_lo >= homogeneous_threshold(mu).
ModalSolution solve_homogeneous_poly(double mu, double z_lo, double z_hi,
                                     int points_per_decade = 300);

// w > 0 with w(z0) = 1 decaying like e^{-z}; selected by backward integration
// of the log-derivative (Riccati) of the decaying branch.
ModalSolution solve_fast_decay(double mu, double z0, double z_hi, int points_per_decade = 300);

struct InhomogeneousBc {
  // mu > alpha+1: ignored (decay-class selection, u(z0) = 0).
  // mu < alpha+1: initial slope u'(z0) = c0 with u(z0) = 0.
  double c0 = 0.0;
};

// Unique solution of L_mu u = f in the weighted class; see the two cases in
// InhomogeneousBc. f is a callable of z.
ModalSolution solve_inhomogeneous(double mu, double alpha, double z0, double z_hi,
                                  const std::function<double(double)>& f,
                                  const InhomogeneousBc& bc = {}, int points_per_decade = 300);

// || u ||_{z0; alpha} = ( int_{z0}^inf u^2 s^{-2 alpha - 1} ds )^{1/2} with
// tail extrapolation from the fitted decay exponent.
WeightedNormResult weighted_norm(const ModalSolution& u, double alpha);
WeightedNormResult weighted_norm_samples(const VectorXd& u, const LogGrid& grid, double z0,
                                         double alpha, bool exponential_tail = false);

// Discrete L_mu via the grid stencils (residuals, sanity anchors).
VectorXd modal_apply(double mu, const VectorXd& u, const LogGrid& grid);

// Cubic-in-log interpolation of samples on a LogGrid.
class ModalGridFn {
public:
  ModalGridFn() = default;
  ModalGridFn(LogGrid grid, VectorXd vals) : grid_(std::move(grid)), vals_(std::move(vals)) {}
  double operator()(double z) const;

private:
  LogGrid grid_;
  VectorXd vals_;
};

namespace modal_detail {

// Fundamental pair of L_mu on a fixed grid, prepared once and reused across
// Picard sweeps. b is the polynomial branch (b(z_in) = 1, positive), w the
// fast branch through its log-derivative; all right-hand-side couplings are
// assembled from log-scaled ratios so nothing over/underflows.
struct ModeBasis {
  double mu = 0.0;
  LogGrid grid;
  VectorXd log_b, rho_b;  // polynomial branch: log-values (b(z_in)=1), log-derivative
  VectorXd r_w, log_w;    // fast branch: log-derivative and log-values (w(z_in)=1)
  double W0 = 0.0;        // Wronskian b w' - b' w at z_in

  VectorXd b_values() const { return log_b.array().exp(); }
};

ModeBasis make_mode_basis(double mu, const LogGrid& grid);

// Unique solution with suppressed polynomial branch at infinity and
// u(z_in) = boundary_value; f sampled on the basis grid.
VectorXd decay_class_solve(const ModeBasis& B, const VectorXd& f, double boundary_value);

// Solution with u(z_in) = 0, u'(z_in) = c0 via the explicit representation on
// the b branch (variation of parameters double integral).
VectorXd prescribed_slope_solve(const ModeBasis& B, const VectorXd& f, double c0);

}  // namespace modal_detail

}  // namespace soliton

#endif
