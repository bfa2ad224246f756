#include "soliton/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "soliton/errors.hpp"

namespace soliton {

namespace {

constexpr double kPi = std::numbers::pi;

// 4th-order periodic central first-derivative matrix.
MatrixXd d1_periodic_matrix(int m, double h) {
  MatrixXd D = MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    D(i, (i - 2 + m) % m) += 1.0 / (12.0 * h);
    D(i, (i - 1 + m) % m) += -8.0 / (12.0 * h);
    D(i, (i + 1) % m) += 8.0 / (12.0 * h);
    D(i, (i + 2) % m) += -1.0 / (12.0 * h);
  }
  return D;
}

int sphere_angular_mult(int n, int k) {
  if (k == 0) return 1;
  if (n == 3) return 2;  // S^1 harmonics
  throw DomainError("assemble_jacobi: sphere Fourier blocks with k>0 only for n=3");
}

}  // namespace

JacobiFamily assemble_jacobi(const ShrinkerSurface& S, int k_max, const SpectrumOptions& opt) {
  if (k_max < 2) throw DomainError("assemble_jacobi: k_max >= 2 required");
  JacobiFamily fam;
  fam.ambient_dim = S.ambient_dim;

  if (S.is_round() && S.ambient_dim == 2) {
    // The circle separates exactly: each rotational Fourier block is the
    // scalar k^2/r^2 - (|A|^2 + 1/2) read off the cached geometry.
    const int m = opt.grid_nodes > 0 ? opt.grid_nodes : 256;
    if (m < 16) throw DomainError("assemble_jacobi: grid too coarse (need >= 16 nodes)");
    fam.grid_kind = GridKind::CircleFull;
    fam.profile_nodes = m;
    const double r = S.radius;
    const double pot = 1.0 / (r * r) + 0.5;
    for (int k = 0; k <= k_max; ++k) {
      ModeOperator blk;
      blk.fourier_k = k;
      blk.exact_scalar = true;
      blk.angular_mult = (k == 0) ? 1 : 2;
      blk.op = MatrixXd::Constant(1, 1, k * k / (r * r) - pot);
      blk.rho = VectorXd::Constant(1, 1.0);
      fam.blocks.push_back(std::move(blk));
    }
    fam.sup_asymmetry = 0.0;
    return fam;
  }

  if (S.is_round()) {
    // half-circle profile, cell-centered; conservative flux discretization
    const int m = opt.grid_nodes > 0 ? opt.grid_nodes : 512;
    if (m < 16) throw DomainError("assemble_jacobi: grid too coarse (need >= 16 nodes)");
    fam.grid_kind = GridKind::ProfileRotational;
    fam.profile_nodes = m;
    const ProfileGeometry p = S.profile(m);
    const int n = S.ambient_dim;
    VectorXd rho(m);
    for (int i = 0; i < m; ++i)
      rho[i] = std::pow(p.w[i], n - 2) *
               std::exp(-0.25 * (p.w[i] * p.w[i] + p.y[i] * p.y[i])) * p.h;
    // face densities (rho is smooth in the polar angle; faces at node midpoints)
    const double r = S.radius;
    auto rho_at = [&](double sarc) {
      const double phi = sarc / r;
      const double w = r * std::sin(phi), y = S.y_center - r * std::cos(phi);
      return std::pow(std::max(w, 0.0), n - 2) * std::exp(-0.25 * (w * w + y * y));
    };
    VectorXd face(m + 1);
    for (int i = 0; i <= m; ++i) face[i] = rho_at(i * p.h);  // faces at i*h, s_i = (i+1/2)h
    face[0] = 0.0;
    face[m] = 0.0;  // w -> 0 at the poles kills the flux
    for (int k = 0; k <= k_max; ++k) {
      const double lam = k * (k + n - 3);
      MatrixXd K = MatrixXd::Zero(m, m);
      for (int i = 0; i + 1 < m; ++i) {
        const double c = face[i + 1] / p.h;  // flux between i and i+1
        K(i, i) += c;
        K(i + 1, i + 1) += c;
        K(i, i + 1) -= c;
        K(i + 1, i) -= c;
      }
      for (int i = 0; i < m; ++i) {
        const double V = lam / (p.w[i] * p.w[i]) - p.A2[i] - 0.5;
        K(i, i) += V * rho[i];
      }
      ModeOperator blk;
      blk.fourier_k = k;
      blk.angular_mult = sphere_angular_mult(n, k);
      blk.rho = rho;
      blk.op = rho.cwiseInverse().asDiagonal() * K;
      fam.blocks.push_back(std::move(blk));
    }
  } else {
    // closed rotational profile (torus): periodic 4th-order conservative form
    const ProfileGeometry& p = S.prof;
    const int m = p.size();
    if (m < 16) throw DomainError("assemble_jacobi: grid too coarse (need >= 16 nodes)");
    fam.grid_kind = GridKind::ProfileRotational;
    fam.profile_nodes = m;
    const int n = S.ambient_dim;
    VectorXd rho(m);
    for (int i = 0; i < m; ++i)
      rho[i] = std::pow(p.w[i], n - 2) *
               std::exp(-0.25 * (p.w[i] * p.w[i] + p.y[i] * p.y[i])) * p.h;
    const MatrixXd D1 = d1_periodic_matrix(m, p.h);
    const MatrixXd K0 = D1.transpose() * rho.asDiagonal() * D1;
    for (int k = 0; k <= k_max; ++k) {
      const double lam = k * (k + n - 3);
      MatrixXd K = K0;
      for (int i = 0; i < m; ++i) {
        const double V = lam / (p.w[i] * p.w[i]) - p.A2[i] - 0.5;
        K(i, i) += V * rho[i];
      }
      ModeOperator blk;
      blk.fourier_k = k;
      blk.angular_mult = (k == 0) ? 1 : 2;
      blk.rho = rho;
      blk.op = rho.cwiseInverse().asDiagonal() * K;
      fam.blocks.push_back(std::move(blk));
    }
  }

  // measured self-adjointness defect w.r.t. the node measure
  double asym = 0.0;
  for (const auto& blk : fam.blocks) {
    const MatrixXd WB = blk.rho.asDiagonal() * blk.op;
    asym = std::max(asym, (WB - WB.transpose()).cwiseAbs().maxCoeff());
  }
  fam.sup_asymmetry = asym;
  return fam;
}

SpectrumData eigensolve(const JacobiFamily& fam, int count, double mu_max) {
  SpectrumData spec;
  spec.ambient_dim = fam.ambient_dim;
  spec.grid_kind = fam.grid_kind;

  struct Entry {
    double mu;
    int k, parity;
    VectorXd fn;
  };
  std::vector<Entry> entries;

  if (!fam.blocks.empty() && fam.blocks.front().exact_scalar) {
    // circle: synthesize Fourier eigenfunctions on the full circle grid
    spec.from_round_sphere = true;
    const int m = fam.profile_nodes;
    const double r = std::sqrt(2.0);
    const double h = 2.0 * kPi * r / m;
    const double wgt = std::exp(-0.25 * r * r) * h;
    spec.weights = VectorXd::Constant(m, wgt);
    for (const auto& blk : fam.blocks) {
      const int k = blk.fourier_k;
      const double mu = blk.op(0, 0);
      for (int parity = 0; parity < (k == 0 ? 1 : 2); ++parity) {
        VectorXd fn(m);
        for (int i = 0; i < m; ++i) {
          const double th = 2.0 * kPi * i / m;
          fn[i] = (parity == 0) ? std::cos(k * th) : std::sin(k * th);
        }
        fn /= std::sqrt((fn.array() * fn.array() * spec.weights.array()).sum());
        entries.push_back({mu, k, parity, std::move(fn)});
      }
    }
  } else {
    spec.from_round_sphere = false;
    spec.weights = fam.blocks.front().rho;
    for (const auto& blk : fam.blocks) {
      const int m = static_cast<int>(blk.rho.size());
      const VectorXd wsqrt = blk.rho.cwiseSqrt();
      const MatrixXd C =
          wsqrt.asDiagonal() * blk.op * wsqrt.cwiseInverse().asDiagonal();
      const MatrixXd Csym = 0.5 * (C + C.transpose());
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(Csym);
      if (es.info() != Eigen::Success)
        throw NumericError("eigensolve: mode " + std::to_string(blk.fourier_k) +
                           " failed to converge");
      for (int j = 0; j < m; ++j) {
        const double mu = es.eigenvalues()[j];
        VectorXd fn = es.eigenvectors().col(j).cwiseQuotient(wsqrt);
        for (int parity = 0; parity < blk.angular_mult; ++parity)
          entries.push_back({mu, blk.fourier_k, parity, fn});
      }
    }
  }

  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.mu < b.mu; });

  const double kernel_tol = SpectrumData::kKernelTol;
  spec.index_I = 0;
  spec.mu_minus = 0.0;
  bool have_muminus = false;
  for (const auto& e : entries)
    if (e.mu < -kernel_tol) {
      ++spec.index_I;
      if (!have_muminus || e.mu > spec.mu_minus) {
        spec.mu_minus = e.mu;
        have_muminus = true;
      }
    }
  spec.mu1 = entries.empty() ? 0.0 : entries.front().mu;

  spec.mu_max = mu_max;
  const int keep = std::min<int>(count, static_cast<int>(entries.size()));
  for (int j = 0; j < keep; ++j) {
    if (entries[j].mu > spec.mu_max && j > spec.index_I) break;
    EigenMode md;
    md.mu = entries[j].mu;
    md.fourier_k = entries[j].k;
    md.parity = entries[j].parity;
    md.profile_fn = entries[j].fn;
    spec.modes.push_back(std::move(md));
  }

  // Perron normalization of the ground state
  if (!spec.modes.empty()) {
    VectorXd& p1 = spec.modes.front().profile_fn;
    if (p1.sum() < 0.0) p1 = -p1;
    spec.psi1 = p1;
    const double mn = p1.minCoeff();
    if (mn <= 0.0) throw NumericError("eigensolve: first eigenfunction changes sign");
    spec.psi1_bar = p1 / mn;
  }
  return spec;
}

SpectrumData compute_spectrum(const ShrinkerSurface& S, const SpectrumOptions& opt) {
  JacobiFamily fam = assemble_jacobi(S, opt.k_max, opt);
  SpectrumData spec = eigensolve(fam, opt.count, opt.mu_max);
  spec.sigma = opt.sigma;
  return spec;
}

VectorXd SpectrumData::grid_function(int j, const SurfaceGrid& grid) const {
  const EigenMode& md = modes.at(j);
  if (grid.kind == GridKind::CircleFull) {
    if (static_cast<int>(md.profile_fn.size()) != grid.size())
      throw DomainError("grid_function: resolution mismatch");
    return md.profile_fn;
  }
  if (grid.kind == GridKind::ProfileRotational) {
    if (md.fourier_k != 0)
      throw DomainError("grid_function: k != 0 mode on a rotationally reduced grid");
    return md.profile_fn;
  }
  throw DomainError("grid_function: unsupported grid kind");
}

VectorXd project_below(const SpectrumData& spec, double gamma, const VectorXd& phi) {
  double dist = 1e300;
  for (const auto& md : spec.modes) dist = std::min(dist, std::abs(gamma - md.mu));
  if (dist < spec.sigma)
    throw HypothesisError("project_below: gamma is within sigma of the spectrum");
  std::vector<double> coeff;
  for (const auto& md : spec.modes) {
    if (md.mu >= gamma) continue;
    if (phi.size() != md.profile_fn.size())
      throw DomainError("project_below: phi resolution mismatch");
    coeff.push_back((phi.array() * md.profile_fn.array() * spec.weights.array()).sum());
  }
  return Eigen::Map<VectorXd>(coeff.data(), coeff.size());
}

}  // namespace soliton
