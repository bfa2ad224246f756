#include "soliton/translator_operator.hpp"

#include <cmath>

#include "soliton/dual.hpp"
#include "soliton/errors.hpp"
#include "soliton/spline.hpp"

namespace soliton {

namespace {

inline double value_of(double x) { return x; }
template <int N>
double value_of(const Dual<N>& x) {
  return x.v;
}

// Ftilde = F * E from the exact graph-metric expressions over the auxiliary
// end. State slots: (p, xi_s, xi_t, eta). The second fundamental form enters
// with the sign that makes the flat-state expansion of the appendix hold
// (tr A = -<X,nu>/2 on a shrinker), i.e. opposite to the grad-nu cache.
template <class T>
T ftilde_kernel(const SurfaceGrid& g, int i, double z, const T& p, const T& xi_s, const T& xi_t,
                const T& eta) {
  const double A11 = -g.A_ss[i];
  const double A22 = -g.A_tt[i];
  const double X1 = g.X_s[i];
  const double Xp = g.Xperp[i];
  const double x2 = X1 * X1 + Xp * Xp;
  const int d = g.d;

  const T gp11 = 1.0 - 2.0 * p * A11 + p * p * (A11 * A11) + xi_s * xi_s;
  T gp22(1.0), gp12(0.0), det(0.0);
  if (d == 2) {
    gp22 = 1.0 - 2.0 * p * A22 + p * p * (A22 * A22) + xi_t * xi_t;
    gp12 = xi_s * xi_t;
    det = gp11 * gp22 - gp12 * gp12;
  } else {
    det = gp11;
  }
  if (value_of(det) <= 1e-12 || value_of(gp11) <= 1e-12)
    throw HypothesisError("ftilde: graph too steep, metric not positive definite");

  const T F = sqrt_generic(det);  // det g = 1 in the orthonormal frame

  const T common = Xp + p + 2.0 * eta;
  const T b1 = p * (A11 * X1) - xi_s * common;
  const T r1 = X1 - b1;
  T quad(0.0);
  if (d == 2) {
    const T b2 = -xi_t * common;  // X_theta = 0
    const T r2 = 0.0 - b2;
    const T i11 = gp22 / det, i22 = gp11 / det, i12 = -gp12 / det;
    quad = i11 * r1 * r1 + 2.0 * (i12 * r1 * r2) + i22 * r2 * r2;
  } else {
    quad = r1 * r1 / gp11;
  }
  const T pe = p + 2.0 * eta;
  const T E2 = 1.0 + (x2 + 2.0 * pe * Xp + pe * pe - quad) / (4.0 * z);
  if (value_of(E2) <= 0.0)
    throw HypothesisError("ftilde: degenerate slant, E^2 <= 0");
  return F * sqrt_generic(E2);
}

struct GradSheet {
  MatrixXd Fp, Fxi_s, Feta;  // first derivatives over the whole grid
};

GradSheet ftilde_gradients(const EndField& u, const FieldDerivs& dv) {
  const int m = u.rows(), K = u.cols();
  GradSheet sh;
  sh.Fp.setZero(m, K);
  sh.Fxi_s.setZero(m, K);
  sh.Feta.setZero(m, K);
  for (int k = std::max(0, u.active_from); k < K; ++k) {
    const double z = u.zgrid.z[k];
    for (int i = 0; i < m; ++i) {
      using D = Dual<4>;
      const D p = D::seed(u.values(i, k), 0);
      const D xs = D::seed(dv.us(i, k), 1);
      const D xt = D::seed(0.0, 2);
      const D eta = D::seed(u.zgrid.z[k] * dv.uz(i, k), 3);
      const D val = ftilde_kernel(u.sgrid, i, z, p, xs, xt, eta);
      sh.Fp(i, k) = val.d[0];
      sh.Fxi_s(i, k) = val.d[1];
      sh.Feta(i, k) = val.d[3];
    }
  }
  return sh;
}

// surface divergence of a frame vector field V_s(x_i, z)
MatrixXd surface_div(const SurfaceGrid& g, const MatrixXd& Vs) {
  const int m = static_cast<int>(Vs.rows()), K = static_cast<int>(Vs.cols());
  MatrixXd out(m, K);
  if (g.kind == GridKind::RoundConstant) {
    out.setZero();
    return out;
  }
  for (int k = 0; k < K; ++k) {
    if (g.kind == GridKind::CircleFull) {
      out.col(k) = deriv1_periodic(Vs.col(k), g.h);
    } else {
      // (1/w) d/ds (w V_s)
      const VectorXd wV = g.orbit_w.array() * Vs.col(k).array();
      out.col(k) = deriv1_periodic(wV, g.h).array() / g.orbit_w.array();
    }
  }
  return out;
}

void check_graph_bound(const EndField& u) {
  const double bound = u.graph_bound > 0.0 ? u.graph_bound : default_graph_bound(u.sgrid);
  const int k0 = std::clamp(u.active_from, 0, u.cols());
  if (k0 >= u.cols()) return;
  if (u.values.rightCols(u.cols() - k0).cwiseAbs().maxCoeff() > bound)
    throw HypothesisError("EndField exceeds its graph bound");
}

}  // namespace

double default_graph_bound(const SurfaceGrid& g) { return 0.45 * g.reach; }

FieldDerivs field_derivs(const EndField& u) {
  const int m = u.rows(), K = u.cols();
  FieldDerivs d;
  d.us.resize(m, K);
  d.uss.resize(m, K);
  d.uz.resize(m, K);
  d.uzz.resize(m, K);
  d.usz.resize(m, K);
  if (m >= 8) {
    for (int k = 0; k < K; ++k) {
      d.us.col(k) = deriv1_periodic(u.values.col(k), u.sgrid.h);
      d.uss.col(k) = deriv2_periodic(u.values.col(k), u.sgrid.h);
    }
  } else {
    d.us.setZero();
    d.uss.setZero();
  }
  for (int i = 0; i < m; ++i) {
    d.uz.row(i) = dz_on_loggrid(u.values.row(i).transpose(), u.zgrid).transpose();
    d.uzz.row(i) = dzz_on_loggrid(u.values.row(i).transpose(), u.zgrid).transpose();
    if (m >= 8) d.usz.row(i) = dz_on_loggrid(d.us.row(i).transpose(), u.zgrid).transpose();
  }
  if (m < 8) d.usz.setZero();
  return d;
}

FtildeEval ftilde_eval(const SurfaceGrid& g, int node, double z, double p, double xi_s,
                       double xi_t, double eta) {
  using D = Dual<4>;
  const D val = ftilde_kernel(g, node, z, D::seed(p, 0), D::seed(xi_s, 1), D::seed(xi_t, 2),
                              D::seed(eta, 3));
  FtildeEval out;
  out.value = val.v;
  out.d_p = val.d[0];
  out.d_xi_s = val.d[1];
  out.d_xi_t = val.d[2];
  out.d_eta = val.d[3];
  return out;
}

MatrixXd translator_mc(const EndField& u) {
  check_graph_bound(u);
  const FieldDerivs dv = field_derivs(u);
  const GradSheet sh = ftilde_gradients(u, dv);
  const int m = u.rows(), K = u.cols();
  const int n = u.sgrid.n;

  const MatrixXd div_term = surface_div(u.sgrid, sh.Fxi_s);
  MatrixXd out = MatrixXd::Zero(m, K);
  // a few columns above the active edge stay zeroed so the z-stencils of the
  // eta-derivative never touch cut-off-region values
  const int k_lo = (u.active_from > 0) ? u.active_from + 4 : 0;
  for (int i = 0; i < m; ++i) {
    const VectorXd feta_z = dz_on_loggrid(sh.Feta.row(i).transpose(), u.zgrid);
    for (int k = k_lo; k < K; ++k) {
      const double z = u.zgrid.z[k];
      out(i, k) = -div_term(i, k) - z * feta_z[k] - (z + 0.5 * (n + 1)) * sh.Feta(i, k) +
                  sh.Fp(i, k);
    }
  }
  return out;
}

double translator_t0_round(double radius, int n, double z) {
  const double r = radius;
  const double E0 = std::sqrt(1.0 + r * r / (4.0 * z));
  // exact simplification of the flat-state Euler-Lagrange value
  return (r * r * r / 8.0 + 0.25 * r * (2 - n)) / (z * E0) -
         r * r * r / (16.0 * z * z * E0 * E0 * E0);
}

MatrixXd apply_LS_grid(const EndField& u) {
  const FieldDerivs dv = field_derivs(u);
  const SurfaceGrid& g = u.sgrid;
  const int m = u.rows(), K = u.cols();
  MatrixXd out(m, K);
  VectorXd wlog_s;
  if (g.kind == GridKind::ProfileRotational) {
    VectorXd lw = g.orbit_w.array().log();
    wlog_s = deriv1_periodic(lw, g.h);  // w'/w
  }
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < m; ++i) {
      double lap = dv.uss(i, k);
      if (g.kind == GridKind::ProfileRotational) lap += wlog_s[i] * dv.us(i, k);
      out(i, k) = lap - 0.5 * g.X_s[i] * dv.us(i, k) + (g.A2[i] + 0.5) * u.values(i, k);
    }
  }
  return out;
}

MatrixXd field_to_modes(const EndField& u, const SpectrumData& spec) {
  const int J = static_cast<int>(spec.modes.size());
  const int K = u.cols();
  MatrixXd coeff = MatrixXd::Zero(J, K);
  for (int j = 0; j < J; ++j) {
    if (u.sgrid.kind == GridKind::ProfileRotational && spec.modes[j].fourier_k != 0) continue;
    const VectorXd& psi = spec.modes[j].profile_fn;
    if (psi.size() != u.rows()) throw DomainError("field_to_modes: resolution mismatch");
    const VectorXd wpsi = psi.array() * spec.weights.array();
    coeff.row(j) = wpsi.transpose() * u.values;
  }
  return coeff;
}

EndField modes_to_field(const MatrixXd& coeff, const SpectrumData& spec, const SurfaceGrid& g,
                        const LogGrid& zg) {
  EndField u;
  u.sgrid = g;
  u.zgrid = zg;
  u.values = MatrixXd::Zero(g.size(), zg.size());
  for (int j = 0; j < coeff.rows(); ++j) {
    if (g.kind == GridKind::ProfileRotational && spec.modes[j].fourier_k != 0) continue;
    u.values += spec.modes[j].profile_fn * coeff.row(j);
  }
  return u;
}

MatrixXd apply_TS_spectral(const EndField& u, const SpectrumData& spec) {
  const MatrixXd coeff = field_to_modes(u, spec);
  MatrixXd out_coeff(coeff.rows(), coeff.cols());
  for (int j = 0; j < coeff.rows(); ++j) {
    const VectorXd cj = coeff.row(j).transpose();
    const VectorXd cz = dz_on_loggrid(cj, u.zgrid);
    const VectorXd czz = dzz_on_loggrid(cj, u.zgrid);
    out_coeff.row(j) =
        (czz + cz - spec.modes[j].mu * (cj.array() / u.zgrid.z.array()).matrix()).transpose();
  }
  return modes_to_field(out_coeff, spec, u.sgrid, u.zgrid).values;
}

LinearizationSplit linearization_split(const EndField& u_plus, const EndField& u_minus,
                                       double delta_S) {
  const FieldDerivs dp = field_derivs(u_plus);
  const FieldDerivs dm = field_derivs(u_minus);
  auto size_of = [](const EndField& u, const FieldDerivs& d) {
    double s = u.values.cwiseAbs().maxCoeff() + d.us.cwiseAbs().maxCoeff() +
               d.uss.cwiseAbs().maxCoeff();
    for (int i = 0; i < u.rows(); ++i)
      for (int k = 0; k < u.cols(); ++k) {
        const double z = u.zgrid.z[k];
        s = std::max(s, std::abs(z * d.uz(i, k)) + std::abs(z * d.uzz(i, k)) +
                            std::abs(d.usz(i, k)));
      }
    return s;
  };
  if (size_of(u_plus, dp) > delta_S || size_of(u_minus, dm) > delta_S)
    throw HypothesisError("linearization_split: fields exceed the smallness hypothesis");

  LinearizationSplit out;
  out.v = u_plus.values - u_minus.values;
  EndField vf = u_plus;
  vf.values = out.v;
  const FieldDerivs dvv = field_derivs(vf);
  const MatrixXd LSv = apply_LS_grid(vf);
  const MatrixXd Tp = translator_mc(u_plus);
  const MatrixXd Tm = translator_mc(u_minus);

  const int m = vf.rows(), K = vf.cols();
  out.exact_part.resize(m, K);
  out.residual.resize(m, K);
  for (int l = 0; l < 6; ++l) out.Ebar[l] = MatrixXd::Zero(m, K);
  out.sup_coeff = 0.0;
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < K; ++k) {
      const double z = vf.zgrid.z[k];
      const double exact = -(z * dvv.uzz(i, k) + z * dvv.uz(i, k) + LSv(i, k));
      out.exact_part(i, k) = exact;
      const double xS_term = vf.sgrid.X_s[i] * dvv.usz(i, k);
      const double target = Tp(i, k) - Tm(i, k) - exact - xS_term;
      out.residual(i, k) = target;
      // minimum-norm representation on the derivative basis
      const double basis[6] = {z * dvv.uzz(i, k), dvv.usz(i, k), dvv.uss(i, k),
                               z * dvv.uz(i, k),  dvv.us(i, k),  out.v(i, k)};
      double norm2 = 0.0;
      for (double b : basis) norm2 += b * b;
      if (norm2 > 1e-28) {
        for (int l = 0; l < 6; ++l) {
          out.Ebar[l](i, k) = target * basis[l] / norm2;
          out.sup_coeff = std::max(out.sup_coeff, std::abs(out.Ebar[l](i, k)));
        }
      }
    }
  }
  return out;
}

StarNormReport star_norm(const EndField& u, double R, NormVariant variant,
                         std::optional<double> alpha) {
  return star_norm(u, field_derivs(u), R, variant, alpha);
}

StarNormReport star_norm(const EndField& u, const FieldDerivs& dv, double R, NormVariant variant,
                         std::optional<double> alpha) {
  const double z_lo = R;
  const double z_hi = (variant == NormVariant::Star) ? 2.0 * R : R + 1.0;
  if (z_lo < u.zgrid.z[0] * 0.999 || z_hi > u.zgrid.z[u.cols() - 1] * 1.001)
    throw DomainError("star_norm: window outside the stored z range");
  const int k0 = u.zgrid.lower_index(z_lo);
  int k1 = u.zgrid.lower_index(z_hi);
  k1 = std::min(k1, u.cols() - 1);
  const int m = u.rows();

  StarNormReport rep;
  rep.R = R;
  rep.sharp_variant = (variant == NormVariant::Sharp);
  for (int k = k0; k <= k1; ++k)
    for (int i = 0; i < m; ++i) {
      rep.c0 = std::max(rep.c0, std::abs(u.values(i, k)));
      rep.c1_x = std::max(rep.c1_x, std::abs(dv.us(i, k)));
      rep.c1_z = std::max(rep.c1_z, std::abs(dv.uz(i, k)));
      rep.c2_xx = std::max(rep.c2_xx, std::abs(dv.uss(i, k)));
      rep.c2_xz = std::max(rep.c2_xz, std::abs(dv.usz(i, k)));
      rep.c2_zz = std::max(rep.c2_zz, std::abs(dv.uzz(i, k)));
    }
  const double sR = std::sqrt(R);
  if (variant == NormVariant::Star) {
    rep.total = rep.c0 + rep.c1_x + R * rep.c1_z + rep.c2_xx + sR * rep.c2_xz + R * rep.c2_zz;
  } else {
    // sharp weights R^{-l/2} on l surface derivatives
    rep.total = rep.c0 + rep.c1_z + rep.c2_zz + (rep.c1_x + rep.c2_xz) / sR + rep.c2_xx / R;
  }

  if (alpha) {
    const double a = *alpha;
    rep.holder_alpha = a;
    const double L = (u.sgrid.kind == GridKind::RoundConstant)
                         ? 0.0
                         : u.sgrid.h * m;  // surface period
    auto xdist = [&](int i, int j) {
      if (L == 0.0) return 0.0;
      double d = std::abs(u.sgrid.s[i] - u.sgrid.s[j]);
      return std::min(d, L - d);
    };
    const MatrixXd* fields[6] = {&u.values, &dv.us, &dv.uz, &dv.uss, &dv.usz, &dv.uzz};
    const double star_weights[6] = {1.0, 1.0, R, 1.0, sR, R};
    double semin = 0.0;
    if (variant == NormVariant::Star) {
      for (int f = 0; f < 6; ++f) {
        double sem = 0.0;
        for (int k = k0; k <= k1; ++k)
          for (int kk = k; kk <= k1; ++kk)
            for (int i = 0; i < m; ++i)
              for (int j = (kk == k ? i + 1 : 0); j < m; ++j) {
                const double dx = xdist(i, j);
                const double dz = std::abs(u.zgrid.z[kk] - u.zgrid.z[k]);
                const double den =
                    std::pow(dx, a) + std::pow(R, -0.5 * a) * std::pow(dz, a);
                if (den < 1e-14) continue;
                sem = std::max(sem,
                               std::abs((*fields[f])(i, k) - (*fields[f])(j, kk)) / den);
              }
        semin += star_weights[f] * sem;
      }
    } else {
      const double sharp_weights[6] = {1.0, 1.0 / sR, 1.0, 1.0 / R, 1.0 / sR, 1.0};
      for (int k = k0; k <= k1; ++k)
        for (int kk = k; kk <= k1; ++kk)
          for (int i = 0; i < m; ++i)
            for (int j = (kk == k ? i + 1 : 0); j < m; ++j) {
              const double dx = xdist(i, j);
              if (dx > 1.0 / sR) continue;
              const double dz = std::abs(u.zgrid.z[kk] - u.zgrid.z[k]);
              const double den = std::pow(R, 0.5 * a) * std::pow(dx, a) + std::pow(dz, a);
              if (den < 1e-14) continue;
              double num = 0.0;
              for (int f = 0; f < 6; ++f)
                num += sharp_weights[f] * std::abs((*fields[f])(i, k) - (*fields[f])(j, kk));
              semin = std::max(semin, num / den);
            }
    }
    rep.holder_seminorm = semin;
    rep.total += semin;
  }
  return rep;
}

double ilmanen_energy_profile(const Eigen::MatrixX2d& rz, int n, double eps, bool closed) {
  if (rz.rows() < 2) throw DomainError("ilmanen_energy_profile: need a polyline");
  const double zmax = rz.col(1).maxCoeff() / eps;
  if (zmax > 650.0)
    throw DomainError("ilmanen_energy_profile: window too high, value overflows; use the log form");
  const double sphere = 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
  return sphere * curve_weight_integral(
                      rz.col(0), rz.col(1),
                      [&](double r, double z) {
                        return std::exp(z / eps) * std::pow(std::max(r, 0.0), n - 1);
                      },
                      closed);
}

double ilmanen_energy_profile_log(const Eigen::MatrixX2d& rz, int n, double eps, bool closed) {
  const double sphere = 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
  return std::log(sphere) +
         curve_weight_integral_log(
             rz.col(0), rz.col(1),
             [&](double r, double z) {
               return z / eps + (n - 1) * std::log(std::max(r, 1e-300));
             },
             closed);
}

double ilmanen_energy_end(const EndField& u, double eps) {
  check_graph_bound(u);
  if (u.zgrid.z[u.cols() - 1] / eps > 650.0)
    throw DomainError("ilmanen_energy_end: window too high, value overflows");
  const FieldDerivs dv = field_derivs(u);
  const int m = u.rows(), K = u.cols();
  const int n = u.sgrid.n;
  VectorXd zslices(K);
  for (int k = 0; k < K; ++k) {
    const double z = u.zgrid.z[k];
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
      const double F = ftilde_eval(u.sgrid, i, z, u.values(i, k), dv.us(i, k), 0.0,
                                   z * dv.uz(i, k))
                           .value;
      acc += F * u.sgrid.area_weight[i];
    }
    // z-integral in t = log z: dz = z dt
    zslices[k] = std::exp(z / eps) * std::pow(z, 0.5 * (n - 1)) * acc * z;
  }
  return integrate_cubic_uniform(zslices, u.zgrid.ht);
}

}  // namespace soliton
