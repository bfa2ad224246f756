#ifndef SOLITON_PROFILE_FLOW_HPP
#define SOLITON_PROFILE_FLOW_HPP

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "soliton/end_builder.hpp"

namespace soliton {

using Eigen::MatrixX2d;
using Eigen::MatrixX3d;
using Eigen::MatrixX3i;

// Complete rotationally symmetric translators and their diagnostics.
struct TranslatorProfile {
  enum class Kind { BowlGraph, EndMatchedCurve, EndMatchedSurface };
  Kind kind = Kind::BowlGraph;
  int n = 2;  // graph dimension: translator lives in R^{n+1}

  // BowlGraph: F(r) on a uniform r-grid
  VectorXd r, F, Fp;
  double c_inf = 0.0;     // limit of G(r) = F - r^2/(2(n-1)) + log r
  double asym_C = 0.0;    // fitted constant in |G - c_inf| <= C / r
  double residual = 0.0;  // plug-back translator residual

  // EndMatchedCurve: profile polyline (r, z), axis end first
  MatrixX2d curve;

  // EndMatchedSurface: triangulated profile surface in (w, y, z)
  MatrixX3d verts;
  MatrixX3i tris;

  double energy_log = 0.0;  // log I-energy over the truncation window
  double grad_norm = 0.0;   // final normalized gradient of the descent
  double min_w = 1e300;
  bool touched_axis = false;  // descent stopped at an axis-touch event
  bool settled = false;       // relaxation stabilized away from the axis
};

TranslatorProfile solve_bowl(int n, double r_max, double samples_per_unit = 64.0);

// Rewrites the (shifted) bowl as a graph over the auxiliary end of the round
// shrinker: shift = (a, b) with a the horizontal offset magnitude.
EndField bowl_to_end(const TranslatorProfile& bowl, double shift_a, double shift_b,
                     const SurfaceGrid& grid, double z_lo, double z_hi, int ppd = 140);

struct MinimizeConfig {
  int descent_max_iters = 4000;
  double grad_tol = 2e-4;      // normalized gradient stop
  int rings = 36, sectors = 48;  // EndMatchedSurface mesh resolution
  double z_bottom_frac = 0.04;   // initial cap depth as a fraction of R
  int polish_iters = 40;         // curve-case descent polish
  unsigned seed = 0;             // 0: deterministic canonical initialization
};

// Sphere/circle-shrinker case: I-minimizing disk-type translator with the
// prescribed boundary circle at z = R, by tip shooting plus discrete descent.
TranslatorProfile minimize_truncated_curve(const EndFamilyMember& end, double R,
                                           const MinimizeConfig& cfg = {});

// Torus-end case: weighted-area descent on a triangulated profile surface.
TranslatorProfile minimize_truncated_surface(const EndFamilyMember& end, double R,
                                             const MinimizeConfig& cfg = {});

// ---- rescaled mean curvature flow of rotational profiles ----

struct FlowState {
  double tau = 0.0;
  MatrixX2d curve;  // (w, y) nodes; closed loop or open arc with ends on the axis
  bool closed = true;
  enum class Topology { Torus, Sphere, Extinct } topology = Topology::Torus;
  double min_spacing = 0.0, max_curvature = 0.0;
  double roundness = 0.0;  // closed: max/min radius about the centroid
  double min_Xnu = 0.0;    // open arcs: min <X, nu> (star-shapedness)
  double ref_diameter = 0.0;  // initial diameter, scales the pinch threshold
};

struct FlowOptions {
  int ambient_dim = 3;       // shrinker dimension n (profile in R^2)
  double pinch_tol = 1e-3;   // fraction of initial diameter
  double axis_tol = 5e-3;    // regularization floor for the rotational drift
  double axis_touch = 2e-2;  // w below this triggers the axis-crossing surgery
  int remesh_nodes = 384;
  double max_curvature_h = 0.9;  // quality guard: max curvature * spacing
};

FlowState make_flow_state(const MatrixX2d& closed_curve);
// One semi-implicit step; remeshes and updates topology flags.
FlowState rmcf_step(const FlowState& state, double dtau, const FlowOptions& opt = {});

struct FlowRun {
  std::vector<double> taus;
  std::vector<double> roundness, min_w, min_Xnu, diameter;
  FlowState final_state;
  double tau_event = -1.0;  // extinction / axis-crossing time when it happened
};

FlowRun run_rmcf(FlowState state, double dtau, double tau_max, const FlowOptions& opt = {},
                 const std::function<void(const FlowState&)>& observer = nullptr);

// ---- blow-down diagnostics ----

struct BlowDownSlice {
  double tau = 0.0;
  double split_defect = 0.0;    // z-variation of the rescaled x-slices
  double hausdorff_to_S = 0.0;  // distance of the z = 0 slice to the shrinker
  double gaussian_area = 0.0;
};

std::vector<BlowDownSlice> blow_down(const TranslatorProfile& bowl,
                                     const std::vector<double>& taus);

// coordinate-change consistency of the rescaled graph representation
double blow_down_coord_change_defect(const EndField& u, const TranslatorProfile& bowl,
                                     double tau);

// ---- region nesting / fattening probes ----

struct RegionProbeReport {
  std::vector<double> a_values;
  std::vector<TranslatorProfile> minimizers;
  int nesting_violations = 0;
  double max_gap = 0.0, min_gap = 1e300;
  double gap_linearity = 0.0;  // fitted d(gap)/d(a) spread
};

RegionProbeReport region_probe(const EndFamilyMember& base, const std::vector<double>& a_grid,
                               double R, const DeformConfig& dcfg, const MinimizeConfig& mcfg = {});

enum class TopologyClass { AvoidsCylinder_Torus, TouchesAxis_Disk, Undetermined };

TopologyClass topology_classify(const TranslatorProfile& profile, double kappa_bar,
                                double axis_tol = 5e-3);

struct FattenBracket {
  double a_minus = 0.0, a_plus = 0.0;  // disk below, torus above
  int bisections = 0;
  bool refined_consistent = false;  // bracket persists under mesh refinement
};

FattenBracket fatten_probe(const EndFamilyMember& base, double a_lo, double a_hi, double R,
                           double kappa_bar, double rel_tol, const DeformConfig& dcfg,
                           const MinimizeConfig& mcfg = {});

// Classification of a single member of the probe family (a > 0 squeezes
// toward the collapsing side); fatten_probe bisects on this.
TopologyClass classify_family_member(const EndFamilyMember& base, double a, double R,
                                     double kappa_bar, const MinimizeConfig& mcfg = {});

namespace mesh_detail {
// exposed for verification tests
double mesh_energy(const MatrixX3d& verts, const MatrixX3i& tris, double zref);
void mesh_local_gradient(const MatrixX3d& verts, const MatrixX3i& tris, MatrixX3d& gloc,
                         Eigen::VectorXd& varea);
}  // namespace mesh_detail

}  // namespace soliton

#endif
