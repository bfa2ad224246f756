#ifndef SOLITON_SPECTRUM_HPP
#define SOLITON_SPECTRUM_HPP

#include <Eigen/Dense>
#include <vector>

#include "soliton/shrinker.hpp"
#include "soliton/surface_grid.hpp"

namespace soliton {

using Eigen::MatrixXd;

struct SpectrumOptions {
  int k_max = 10;        // rotational Fourier modes 0..k_max
  int grid_nodes = 0;    // 0: use the surface's cached resolution
  double mu_max = 50.0;  // truncate eigenvalues above this
  double sigma = 1e-3;   // spectral gap tolerance for projections
  int count = 64;        // lowest eigenpairs to keep per eigensolve
};

// One Fourier block of -L_S, self-adjoint w.r.t. the node measure `rho`.
struct ModeOperator {
  int fourier_k = 0;
  MatrixXd op;        // action on profile-grid functions
  VectorXd rho;       // node measure (weight per node)
  int angular_mult = 1;  // dimension of the angular eigenspace behind this block
  bool exact_scalar = false;  // 1x1 separated block (circle)
};

struct JacobiFamily {
  std::vector<ModeOperator> blocks;
  int ambient_dim = 0;
  GridKind grid_kind = GridKind::CircleFull;
  int profile_nodes = 0;
  double sup_asymmetry = 0.0;  // measured |W B - B^T W| after assembly
};

struct EigenMode {
  double mu = 0.0;      // eigenvalue of -L_S
  int fourier_k = 0;
  int parity = 0;       // 0: cos branch (or k=0), 1: sin branch
  VectorXd profile_fn;  // values on the profile grid, normalized in the weighted product
};

struct SpectrumData {
  std::vector<EigenMode> modes;  // ascending in mu, multiplicity explicit
  VectorXd weights;              // profile measure (matches ModeOperator::rho)
  GridKind grid_kind = GridKind::CircleFull;
  int ambient_dim = 0;
  int index_I = 0;
  double mu1 = 0.0;
  double mu_minus = 0.0;
  double sigma = 1e-3;
  double mu_max = 50.0;
  bool from_round_sphere = false;
  VectorXd psi1;      // first eigenfunction on the grid (positive)
  VectorXd psi1_bar;  // psi1 / min psi1

  // Rotation fields of non-round shrinkers give genuine kernel modes; the
  // negative count must leave the band around zero out.
  static constexpr double kKernelTol = 1e-6;
  bool is_negative(int j) const { return modes[j].mu < -kKernelTol; }

  int count_below(double gamma) const {
    int c = 0;
    for (const auto& md : modes)
      if (md.mu < gamma) ++c;
    return c;
  }
  // Physical eigenfunction values on a full circle grid (n=2) need the k-tag;
  // this returns the grid function for mode j matching `grid`.
  VectorXd grid_function(int j, const SurfaceGrid& grid) const;
};

JacobiFamily assemble_jacobi(const ShrinkerSurface& S, int k_max, const SpectrumOptions& opt = {});

SpectrumData eigensolve(const JacobiFamily& fam, int count, double mu_max = 50.0);

// Convenience: assemble + solve with defaults.
SpectrumData compute_spectrum(const ShrinkerSurface& S, const SpectrumOptions& opt = {});

// Coefficients <phi, psi_j> for all mu_j < gamma. phi lives on the grid the
// spectrum was built on (full circle grid for n=2; profile grid for the torus,
// where it is interpreted as a rotationally invariant function).
VectorXd project_below(const SpectrumData& spec, double gamma, const VectorXd& phi);

}  // namespace soliton

#endif
