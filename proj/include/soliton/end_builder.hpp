#ifndef SOLITON_END_BUILDER_HPP
#define SOLITON_END_BUILDER_HPP

#include <memory>
#include <vector>

#include "soliton/modal_ode.hpp"
#include "soliton/spectrum.hpp"
#include "soliton/translator_operator.hpp"

namespace soliton {

// Shared immutable context: the shrinker, its working surface grid and
// spectral data. Members of the end family reference one context.
struct EndContext {
  ShrinkerSurface S;
  SurfaceGrid grid;
  SpectrumData spec;

  int index() const { return spec.index_I; }
  double mu1() const { return spec.mu1; }
  double mu_minus() const { return spec.mu_minus; }
};

EndContext make_end_context(const ShrinkerSurface& S, int surface_nodes = 96, int k_max = 10);

struct EndBuildConfig {
  double gamma = 0.0;          // 0: use mu_minus / 2
  double z_hi_factor = 1000.0;
  int ppd = 120;               // z-grid points per decade
  double fp_tol = 1e-9;        // Picard tolerance in the weighted norm
  int max_sweeps = 48;
  double delta0 = 0.5;         // |phi| <= delta0 z0^gamma
  double res_tol = 1e-5;
  int rate_samples = 12;       // sampled R's for certificates
  bool drop_flat_source = false;  // diagnostic: remove the T(0) source term
};

struct EndFamilyMember {
  VectorXd phi;        // coefficients on the E_{<0} modes (spectrum order)
  double z0 = 0.0;
  double gamma = 0.0;
  EndField field;      // on [z0/12, z_hi]
  std::vector<double> iteration_log;  // Picard contraction factors
  double residual = 0.0;       // sup |T(u)| on [z0, min(100 z0, z_hi)]
  double decay_margin = 0.0;   // min_R ( R^{mu-/2} - ||u||_{C2*,R} ), >= 0 certifies
  double boundary_err = 0.0;   // |u(.,z0/12)|_sup and the Pi_{<0} slope mismatch
  std::shared_ptr<const EndContext> ctx;
};

// Fixed point of the cut-off translator equation with prescribed negative-mode
// boundary slope. Throws HypothesisError when phi is too large or the Picard
// map fails to contract (z0 too small).
EndFamilyMember build_end(const std::shared_ptr<const EndContext>& ctx, const VectorXd& phi,
                          double z0, const EndBuildConfig& cfg = {});

// Doubles z0 until the Picard map contracts with margin; returns the first
// workable z0.
double choose_z0(const std::shared_ptr<const EndContext>& ctx, double z0_init,
                 const EndBuildConfig& cfg = {});

struct DeformConfig {
  double delta = 0.05;   // |a| <= delta z0^{-mu1}
  double delta2 = 0.25;  // admissibility cap for delta
  EndBuildConfig build;
};

struct DeformResult {
  EndFamilyMember member;
  double measured_constant = 0.0;  // sup_R ||u_a-u_0-a z^mu1 psi1|| / ((1+|a|) (R/z0)^{g/2} R^mu1)
  double one_sided_from = 0.0;     // smallest sampled z with strict ordering (a > 0)
  bool one_sided = false;
};

DeformResult one_sided_deform(const EndFamilyMember& base, double a,
                              const DeformConfig& dcfg = {});

struct RateReport {
  double rate = 0.0;        // fitted decay exponent (max over modes)
  int leading_mode = -1;    // spectrum index dominating at the far end
  double snapped_rate = 0.0;  // nearest eigenvalue when within snap_tol
  bool snapped = false;
};

RateReport asymptotic_rate(const EndContext& ctx, const EndField& u, double snap_tol = 5e-2);

enum class CloseVerdict { ExpClose, PolySeparated, Inconclusive };

struct CloseReport {
  CloseVerdict verdict = CloseVerdict::Inconclusive;
  double exp_rate = 0.0;       // fitted beta (inf sentinel when below noise)
  double poly_rate = 0.0;      // fitted power-law slope
  double exp_fit_r2 = 0.0, poly_fit_r2 = 0.0;
  double noise_floor = 0.0;
};

// noise_floor = 0 picks a machine-level default; pass the solver tolerance
// scale when comparing two iteratively computed fields.
CloseReport exp_closeness(const EndField& u_plus, const EndField& u_minus, double beta,
                          double noise_floor = 0.0);

struct MatchResult {
  VectorXd phi;
  CloseReport closeness;
  EndField matched;  // the fixed point anchored at w
};

// Recovers the family member exponentially close to a general small solution w
// of the translator equation.
MatchResult match_general_end(const std::shared_ptr<const EndContext>& ctx, const EndField& w,
                              double z0, const EndBuildConfig& cfg = {});

// sup_{R sampled} R^{-gamma} ||u||_{C^2_star, R}
double xnorm(const EndField& u, double gamma, double z_lo, double z_hi, int samples = 12);

// Smoothstep cutoff rising on [z0/2, 3z0/4] with |eta'| <= 8/z0.
double cutoff_eta(double z, double z0);

}  // namespace soliton

#endif
