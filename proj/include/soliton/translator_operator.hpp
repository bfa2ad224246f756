#ifndef SOLITON_TRANSLATOR_OPERATOR_HPP
#define SOLITON_TRANSLATOR_OPERATOR_HPP

#include <Eigen/Dense>
#include <optional>

#include "soliton/grid.hpp"
#include "soliton/spectrum.hpp"
#include "soliton/surface_grid.hpp"

namespace soliton {

// Graph over the auxiliary end ES: u(x_i, z_k) on a surface grid x z grid.
struct EndField {
  SurfaceGrid sgrid;
  LogGrid zgrid;
  MatrixXd values;  // sgrid.size() x zgrid.size()
  double graph_bound = 0.0;  // 0: derive from the surface reach
  // First column where the field represents actual geometry. Columns below
  // belong to the cut-off region of the construction; the operator returns
  // zero there and the graph bound is not enforced.
  int active_from = 0;

  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }
};

struct FieldDerivs {
  MatrixXd us, uz, uss, usz, uzz;
};

FieldDerivs field_derivs(const EndField& u);

// First derivatives of the area integrand Ftilde = F * E w.r.t. the graph
// state (p, xi_s, xi_theta, eta) at a surface node. Assembled from the exact
// metric expressions of the auxiliary-end parametrization; gradients by
// forward-mode evaluation of the same expressions.
struct FtildeEval {
  double value = 0.0;
  double d_p = 0.0, d_xi_s = 0.0, d_xi_t = 0.0, d_eta = 0.0;
};

FtildeEval ftilde_eval(const SurfaceGrid& g, int node, double z, double p, double xi_s,
                       double xi_t, double eta);

// T(u): Euler-Lagrange operator of the e^z-weighted area of ES[u].
MatrixXd translator_mc(const EndField& u);

// T(0) for round shrinkers in closed form (from the derivative table of the
// flat-state expansion); anchors the grid evaluation.
double translator_t0_round(double radius, int n, double z);

struct LinearizationSplit {
  MatrixXd v;                 // u_plus - u_minus
  MatrixXd exact_part;        // -(z v_zz + z v_z + L_S v)
  MatrixXd residual;          // T(u+) - T(u-) - exact_part - x^S dz grad v
  MatrixXd Ebar[6];           // minimum-norm coefficients on the derivative basis
  double sup_coeff = 0.0;     // max_l sup |Ebar_l|
};

LinearizationSplit linearization_split(const EndField& u_plus, const EndField& u_minus,
                                       double delta_S = 0.05);

enum class NormVariant { Star, Sharp };

struct StarNormReport {
  double R = 0.0;
  double c0 = 0.0, c1_x = 0.0, c1_z = 0.0, c2_xx = 0.0, c2_xz = 0.0, c2_zz = 0.0;
  double total = 0.0;         // weighted sum per the norm definition
  double holder_alpha = -1.0; // <0: seminorm not requested
  double holder_seminorm = 0.0;
  bool sharp_variant = false;
};

// ||u||_{C^2_star, S, R} over [R, 2R] (star) or the short-term sharp norm over
// [R, R+1]; optional Holder seminorm over grid pairs.
StarNormReport star_norm(const EndField& u, double R, NormVariant variant,
                         std::optional<double> alpha = std::nullopt);
StarNormReport star_norm(const EndField& u, const FieldDerivs& d, double R, NormVariant variant,
                         std::optional<double> alpha = std::nullopt);

// I^eps over a rotational profile polyline in the (r, z) half-plane of
// R^{n+1}: int e^{z/eps} r^{n-1} ds * |S^{n-1}|.
double ilmanen_energy_profile(const Eigen::MatrixX2d& rz, int n, double eps, bool closed = false);
// log of the same (large windows overflow the plain value)
double ilmanen_energy_profile_log(const Eigen::MatrixX2d& rz, int n, double eps,
                                  bool closed = false);

// I^eps of ES[u] over the field's z-window.
double ilmanen_energy_end(const EndField& u, double eps = 1.0);

// L_S u via grid stencils (geometry route, independent of the eigensolver).
MatrixXd apply_LS_grid(const EndField& u);
// T_S u = u_zz + u_z + z^{-1} L_S u with L_S through the spectral data.
MatrixXd apply_TS_spectral(const EndField& u, const SpectrumData& spec);

// mode coefficients <u(.,z), psi_j> for all stored modes
MatrixXd field_to_modes(const EndField& u, const SpectrumData& spec);
EndField modes_to_field(const MatrixXd& coeff, const SpectrumData& spec, const SurfaceGrid& g,
                        const LogGrid& zg);

double default_graph_bound(const SurfaceGrid& g);

}  // namespace soliton

#endif
