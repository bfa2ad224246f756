#include "soliton/profile_flow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "soliton/errors.hpp"
#include "soliton/ode.hpp"
#include "soliton/spline.hpp"

namespace soliton {

namespace {

constexpr double kPi = std::numbers::pi;

double unit_sphere_area(int k) {
  return 2.0 * std::pow(kPi, 0.5 * (k + 1)) / std::tgamma(0.5 * (k + 1));
}

// r with F(r) = zeta on a stored monotone bowl graph; cubic Hermite on the
// bracketing cell refined by Newton
double bowl_inverse(const TranslatorProfile& bowl, double zeta) {
  const int m = static_cast<int>(bowl.r.size());
  if (zeta <= bowl.F[0]) return bowl.r[0];
  if (zeta >= bowl.F[m - 1])
    throw DomainError("bowl_inverse: height above the stored graph");
  int lo = 0, hi = m - 1;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    (bowl.F[mid] <= zeta ? lo : hi) = mid;
  }
  const double h = bowl.r[hi] - bowl.r[lo];
  auto hermite = [&](double rr, double& f, double& fp) {
    const double t = (rr - bowl.r[lo]) / h;
    const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
    const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
    f = h00 * bowl.F[lo] + h10 * h * bowl.Fp[lo] + h01 * bowl.F[hi] + h11 * h * bowl.Fp[hi];
    const double d00 = 6 * t * (t - 1), d10 = (1 - t) * (1 - 3 * t);
    const double d01 = -d00, d11 = t * (3 * t - 2);
    fp = (d00 * bowl.F[lo] + d01 * bowl.F[hi]) / h + d10 * bowl.Fp[lo] + d11 * bowl.Fp[hi];
  };
  double rr = bowl.r[lo] + h * (zeta - bowl.F[lo]) / std::max(bowl.F[hi] - bowl.F[lo], 1e-300);
  for (int it = 0; it < 30; ++it) {
    double f, fp;
    hermite(rr, f, fp);
    const double step = (f - zeta) / fp;
    rr = std::clamp(rr - step, bowl.r[lo], bowl.r[hi]);
    if (std::abs(step) < 1e-15 * (1.0 + rr)) break;
  }
  return rr;
}

struct CurveFrame {
  VectorXd tw, ty, nu_w, nu_y, Xnu, kappa;
  VectorXd seg_len;  // length of segment i -> i+1
};

CurveFrame curve_frame(const MatrixX2d& c, bool closed) {
  const int m = static_cast<int>(c.rows());
  CurveFrame f;
  f.tw.resize(m);
  f.ty.resize(m);
  f.nu_w.resize(m);
  f.nu_y.resize(m);
  f.Xnu.resize(m);
  f.kappa.resize(m);
  f.seg_len.resize(closed ? m : m - 1);
  for (int i = 0; i < (closed ? m : m - 1); ++i) {
    const int ip = (i + 1) % m;
    f.seg_len[i] = (c.row(ip) - c.row(i)).norm();
  }
  for (int i = 0; i < m; ++i) {
    const int ip = closed ? (i + 1) % m : std::min(i + 1, m - 1);
    const int im = closed ? (i - 1 + m) % m : std::max(i - 1, 0);
    Eigen::Vector2d t = (c.row(ip) - c.row(im)).transpose();
    const double nrm = t.norm();
    t /= std::max(nrm, 1e-300);
    f.tw[i] = t[0];
    f.ty[i] = t[1];
    f.nu_w[i] = -t[1];
    f.nu_y[i] = t[0];
    f.Xnu[i] = c(i, 0) * f.nu_w[i] + c(i, 1) * f.nu_y[i];
    // curvature vector magnitude via the local circumscribed geometry
    const Eigen::Vector2d a = c.row(im).transpose(), b = c.row(i).transpose(),
                          d = c.row(ip).transpose();
    const Eigen::Vector2d e1 = b - a, e2 = d - b;
    const double cross = e1.x() * e2.y() - e1.y() * e2.x();
    const double denom = e1.norm() * e2.norm() * (e1 + e2).norm();
    f.kappa[i] = (denom > 1e-300) ? 2.0 * cross / denom : 0.0;
  }
  return f;
}

// Canonical closed-loop parametrization: node 0 at the outermost point,
// counterclockwise; blending two loop representations needs matching phases.
MatrixX2d align_loop(const MatrixX2d& loop) {
  const int m = static_cast<int>(loop.rows());
  Eigen::RowVector2d cen = loop.colwise().mean();
  double area2 = 0.0;
  for (int i = 0; i < m; ++i) {
    const int ip = (i + 1) % m;
    area2 += (loop(i, 0) - cen.x()) * (loop(ip, 1) - cen.y()) -
             (loop(ip, 0) - cen.x()) * (loop(i, 1) - cen.y());
  }
  MatrixX2d oriented = loop;
  if (area2 < 0.0)
    for (int i = 0; i < m; ++i) oriented.row(i) = loop.row(m - 1 - i);
  int i0 = 0;
  double best = -1e300;
  for (int i = 0; i < m; ++i) {
    const double score = oriented(i, 0) - 1e-3 * std::abs(oriented(i, 1) - cen.y());
    if (score > best) {
      best = score;
      i0 = i;
    }
  }
  MatrixX2d rolled(m, 2);
  for (int i = 0; i < m; ++i) rolled.row(i) = oriented.row((i0 + i) % m);
  return rolled;
}


MatrixX2d resample_open_uniform(const MatrixX2d& pts, int m) {
  const int n = static_cast<int>(pts.rows());
  std::vector<double> cum(n, 0.0);
  for (int i = 1; i < n; ++i) cum[i] = cum[i - 1] + (pts.row(i) - pts.row(i - 1)).norm();
  MatrixX2d out(m, 2);
  int seg = 0;
  for (int j = 0; j < m; ++j) {
    const double target = cum[n - 1] * j / (m - 1);
    while (seg + 2 < n && cum[seg + 1] < target) ++seg;
    const double f = (target - cum[seg]) / std::max(cum[seg + 1] - cum[seg], 1e-300);
    out.row(j) = (1.0 - f) * pts.row(seg) + f * pts.row(seg + 1);
  }
  return out;
}

// Thomas solve of a tridiagonal system given by bands (a = sub, b = diag,
// c = super); O(M).
VectorXd thomas(VectorXd a, VectorXd b, VectorXd c, VectorXd d) {
  const int m = static_cast<int>(b.size());
  for (int i = 1; i < m; ++i) {
    const double w = a[i] / b[i - 1];
    b[i] -= w * c[i - 1];
    d[i] -= w * d[i - 1];
  }
  VectorXd x(m);
  x[m - 1] = d[m - 1] / b[m - 1];
  for (int i = m - 2; i >= 0; --i) x[i] = (d[i] - c[i] * x[i + 1]) / b[i];
  return x;
}

struct ImplicitBands {
  VectorXd a, b, c;  // tridiagonal bands of (I - dtau D2)
  double corner_lo = 0.0, corner_hi = 0.0;  // cyclic corners (closed curves)
  bool cyclic = false;
};

ImplicitBands make_bands(const CurveFrame& f, double dtau, bool closed, int m) {
  ImplicitBands B;
  B.a = VectorXd::Zero(m);
  B.b = VectorXd::Ones(m);
  B.c = VectorXd::Zero(m);
  B.cyclic = closed;
  for (int i = 0; i < m; ++i) {
    if (!closed && (i == 0 || i == m - 1)) continue;
    const double hp = f.seg_len[closed ? i : i];
    const double hm = f.seg_len[closed ? (i - 1 + m) % m : i - 1];
    const double cc = 2.0 / (hp + hm);
    B.b[i] += dtau * cc * (1.0 / hp + 1.0 / hm);
    if (i + 1 < m)
      B.c[i] = -dtau * cc / hp;
    else
      B.corner_hi = -dtau * cc / hp;  // wraps to column 0
    if (i > 0)
      B.a[i] = -dtau * cc / hm;
    else
      B.corner_lo = -dtau * cc / hm;  // wraps to column m-1
  }
  return B;
}

// Sherman-Morrison for the cyclic corners on top of Thomas.
VectorXd solve_bands(const ImplicitBands& B, const VectorXd& rhs) {
  const int m = static_cast<int>(rhs.size());
  if (!B.cyclic || (B.corner_lo == 0.0 && B.corner_hi == 0.0))
    return thomas(B.a, B.b, B.c, rhs);
  const double gamma = -B.b[0];
  VectorXd bmod = B.b;
  bmod[0] -= gamma;
  bmod[m - 1] -= B.corner_lo * B.corner_hi / gamma;
  const VectorXd x1 = thomas(B.a, bmod, B.c, rhs);
  VectorXd u = VectorXd::Zero(m);
  u[0] = gamma;
  u[m - 1] = B.corner_hi;
  const VectorXd x2 = thomas(B.a, bmod, B.c, u);
  const double vx1 = x1[0] + (B.corner_lo / gamma) * x1[m - 1];
  const double vx2 = 1.0 + x2[0] + (B.corner_lo / gamma) * x2[m - 1];
  return x1 - (vx1 / vx2) * x2;
}

struct MeshTopology {
  int rings, sectors;  // interior rings (boundary ring excluded), plus apex
};

int ring_vertex(int ring, int sector, int sectors) { return ring * sectors + sector; }

// Divided differences of exp over k nodes, evaluated relative to `shift`
// (exact integral of e^z over the unit simplex with linear z). Stable via
// expm1 and a confluent fallback.
double ddexp(std::array<double, 4> z, int k, double shift) {
  for (int i = 0; i < k; ++i) z[i] -= shift;
  std::sort(z.begin(), z.begin() + k, std::greater<double>());
  if (k == 1) return std::exp(z[0]);
  if (k == 2) {
    const double d = z[0] - z[1];
    const double g = (std::abs(d) > 1e-8) ? std::expm1(d) / d : 1.0 + 0.5 * d + d * d / 6.0;
    return std::exp(z[1]) * g;
  }
  const double spread = z[0] - z[k - 1];
  if (spread < 1e-5) {
    double zbar = 0.0;
    for (int i = 0; i < k; ++i) zbar += z[i] / k;
    double fact = 1.0;
    for (int i = 2; i < k; ++i) fact *= i;
    return std::exp(zbar) / fact;
  }
  std::array<double, 4> lo = z, hi = z;
  for (int i = 0; i + 1 < k; ++i) hi[i] = z[i + 1];
  return (ddexp(lo, k - 1, 0.0) - ddexp(hi, k - 1, 0.0)) / spread;
}

// mesh energy: exact e^z integral over each linear triangle times the
// centroid w; no slope bias, so vertical strips and flat caps compete fairly
double mesh_energy_impl(const MatrixX3d& verts, const MatrixX3i& tris, double zref) {
  double E = 0.0;
  for (int t = 0; t < tris.rows(); ++t) {
    const Eigen::Vector3d a = verts.row(tris(t, 0)), b = verts.row(tris(t, 1)),
                          c = verts.row(tris(t, 2));
    const double A = 0.5 * (b - a).cross(c - a).norm();
    const double wbar = std::max((a.x() + b.x() + c.x()) / 3.0, 0.0);
    const double G = 2.0 * ddexp({a.z(), b.z(), c.z(), 0.0}, 3, zref);
    E += wbar * A * G;
  }
  return E;
}

// Per-vertex gradient divided by the local weight e^{z_v - zref}; evaluating
// the exp divided differences with shift z_v keeps every factor bounded by
// the in-triangle spread.
void mesh_local_gradient_impl(const MatrixX3d& verts, const MatrixX3i& tris, MatrixX3d& gloc,
                              VectorXd& varea) {
  gloc.setZero(verts.rows(), 3);
  varea.setZero(verts.rows());
  for (int t = 0; t < tris.rows(); ++t) {
    const int vid[3] = {tris(t, 0), tris(t, 1), tris(t, 2)};
    const Eigen::Vector3d a = verts.row(vid[0]), b = verts.row(vid[1]), c = verts.row(vid[2]);
    const Eigen::Vector3d N = (b - a).cross(c - a);
    const double A2n = N.norm();
    if (A2n < 1e-300) continue;
    const double A = 0.5 * A2n;
    const Eigen::Vector3d nhat = N / A2n;
    const double wbar = std::max((a.x() + b.x() + c.x()) / 3.0, 0.0);
    const Eigen::Vector3d gA[3] = {0.5 * (b - c).cross(nhat), 0.5 * (c - a).cross(nhat),
                                   0.5 * (a - b).cross(nhat)};
    for (int q = 0; q < 3; ++q) {
      const int v = vid[q];
      varea[v] += A / 3.0;
      const double zc = std::min({a.z(), b.z(), c.z()});
      const double cap = 50.0;  // relative shifts within a strip stay modest
      auto zcl = [&](double zz) { return std::min(zz, verts(v, 2) + cap); };
      const double G = 2.0 * ddexp({zcl(a.z()), zcl(b.z()), zcl(c.z()), 0.0}, 3, verts(v, 2));
      const double dG =
          2.0 * ddexp({zcl(verts(v, 2)), zcl(a.z()), zcl(b.z()), zcl(c.z())}, 4, verts(v, 2));
      (void)zc;
      gloc.row(v) += (wbar * G * gA[q]).transpose();
      Eigen::Vector3d grho(1.0 / 3.0 * G * A, 0.0, wbar * A * dG);
      gloc.row(v) += grho.transpose();
    }
  }
}

}  // namespace

TranslatorProfile solve_bowl(int n, double r_max, double samples_per_unit) {
  if (n < 2) throw DomainError("solve_bowl: n >= 2");
  TranslatorProfile out;
  out.kind = TranslatorProfile::Kind::BowlGraph;
  out.n = n;
  const int m = std::max(64, static_cast<int>(r_max * samples_per_unit) + 1);
  out.r.setLinSpaced(m, 0.0, r_max);
  out.F.resize(m);
  out.Fp.resize(m);

  const double r0 = 1e-4;
  const double c2 = 1.0 / (2.0 * n);
  const double c4 = 1.0 / (4.0 * n * n * n * (n + 2.0));
  ode::Dopri5 ivp(
      [n](double r, const VectorXd& y) {
        VectorXd d(2);
        d[0] = y[1];
        d[1] = (1.0 + y[1] * y[1]) * (1.0 - (n - 1) * y[1] / r);
        return d;
      },
      1e-12, 1e-13);
  VectorXd y0(2);
  y0 << c2 * r0 * r0 + c4 * r0 * r0 * r0 * r0, 2.0 * c2 * r0 + 4.0 * c4 * r0 * r0 * r0;
  ivp.init(r0, y0, 1e-6);
  out.F[0] = 0.0;
  out.Fp[0] = 0.0;
  for (int i = 1; i < m; ++i) {
    const double r = out.r[i];
    if (r <= r0) {
      out.F[i] = c2 * r * r + c4 * r * r * r * r;
      out.Fp[i] = 2.0 * c2 * r + 4.0 * c4 * r * r * r;
      continue;
    }
    ivp.integrate_to(r);
    out.F[i] = ivp.y()[0];
    out.Fp[i] = ivp.y()[1];
  }

  // asymptotic law G(r) = F - r^2/(2(n-1)) + log r: fit c_inf and C with
  // |G - c_inf| <= C / r on the outer half of the window
  const int i20 = static_cast<int>(m * 0.5);
  double c_best = 0.0;
  {
    // G = c + b/r least squares on the tail
    double s1 = 0, sr = 0, srr = 0, sg = 0, sgr = 0;
    int cnt = 0;
    for (int i = i20; i < m; ++i) {
      const double g = out.F[i] - out.r[i] * out.r[i] / (2.0 * (n - 1)) + std::log(out.r[i]);
      const double x = 1.0 / out.r[i];
      s1 += 1;
      sr += x;
      srr += x * x;
      sg += g;
      sgr += g * x;
      ++cnt;
    }
    const double det = s1 * srr - sr * sr;
    c_best = (sg * srr - sgr * sr) / det;
  }
  out.c_inf = c_best;
  out.asym_C = 0.0;
  for (int i = static_cast<int>(m * 0.1); i < m; ++i) {
    const double g = out.F[i] - out.r[i] * out.r[i] / (2.0 * (n - 1)) + std::log(out.r[i]);
    out.asym_C = std::max(out.asym_C, std::abs(g - c_best) * out.r[i]);
  }

  // independent plug-back residual: F'' from finite differences of stored F'
  const double h = out.r[1] - out.r[0];
  const VectorXd Fpp = deriv1_uniform(out.Fp, h);
  out.residual = 0.0;
  for (int i = 8; i < m - 4; ++i) {
    const double res =
        Fpp[i] / (1.0 + out.Fp[i] * out.Fp[i]) + (n - 1) * out.Fp[i] / out.r[i] - 1.0;
    out.residual = std::max(out.residual, std::abs(res));
  }
  return out;
}

EndField bowl_to_end(const TranslatorProfile& bowl, double shift_a, double shift_b,
                     const SurfaceGrid& grid, double z_lo, double z_hi, int ppd) {
  if (bowl.kind != TranslatorProfile::Kind::BowlGraph)
    throw DomainError("bowl_to_end: needs a bowl graph");
  const int n = bowl.n;
  const double rad = std::sqrt(2.0 * (n - 1));
  EndField u;
  u.sgrid = grid;
  const int npts = std::max(96, static_cast<int>(std::log10(z_hi / z_lo) * ppd));
  u.zgrid = LogGrid(z_lo, z_hi, npts);
  u.values.resize(grid.size(), npts);
  for (int k = 0; k < npts; ++k) {
    const double z = u.zgrid.z[k];
    const double rr = bowl_inverse(bowl, z - shift_b);
    for (int i = 0; i < grid.size(); ++i) {
      double rho = rr;
      if (shift_a != 0.0) {
        if (grid.kind != GridKind::CircleFull)
          throw DomainError("bowl_to_end: horizontal shifts need the circle grid");
        const double theta = grid.s[i] / rad;
        const double ca = shift_a * std::cos(theta);
        const double disc = rr * rr - shift_a * shift_a + ca * ca;
        if (disc <= 0.0) throw DomainError("bowl_to_end: window too low for this shift");
        rho = ca + std::sqrt(disc);
      }
      u.values(i, k) = rho / std::sqrt(z) - rad;
    }
  }
  if (u.values.cwiseAbs().maxCoeff() > default_graph_bound(grid))
    throw DomainError("bowl_to_end: window too low, graph bound exceeded");
  return u;
}

TranslatorProfile minimize_truncated_curve(const EndFamilyMember& end, double R,
                                           const MinimizeConfig& cfg) {
  const EndContext& C = *end.ctx;
  if (C.grid.kind != GridKind::CircleFull)
    throw DomainError("minimize_truncated_curve: circle-shrinker ends only");
  const int n = 2;  // disk translator in R^3 over the circle shrinker

  const LogGrid& zg = end.field.zgrid;
  if (R < end.z0 || R > zg.z[zg.size() - 1] * 0.9)
    throw DomainError("minimize_truncated_curve: R outside the end's z range");

  // rotational boundary radius at z = R (k=0 average of the member)
  const int kR = zg.lower_index(R);
  const double ubar = end.field.values.col(kR).mean();
  const double Ruse = zg.z[kR];
  const double r_target = std::sqrt(Ruse) * (std::sqrt(2.0) + ubar);

  auto rhs = [n](double, const VectorXd& y) {
    VectorXd d(3);
    const double r = y[0], al = y[2];
    d[0] = std::cos(al);
    d[1] = std::sin(al);
    d[2] = -(n - 1) * std::sin(al) / r + std::cos(al);
    return d;
  };
  struct Shot {
    double r_at_R = 0.0, arclen = 0.0;
  };
  auto shoot = [&](double z_tip) {
    ode::Dopri5 ivp(rhs, 1e-12, 1e-13);
    const double r0 = 1e-4;
    VectorXd y0(3);
    y0 << r0, z_tip + r0 * r0 / (2.0 * n), std::atan(r0 / n);
    ivp.init(0.0, y0, 1e-6);
    Shot out;
    double e_prev = ivp.y()[1] - Ruse;
    const double s_cap = 4.0 * (Ruse - z_tip) + 2.0 * r_target + 50.0;
    while (ivp.x() < s_cap) {
      const double x_prev = ivp.x();
      const VectorXd y_prev = ivp.y();
      ivp.step(1e9);
      const double e_cur = ivp.y()[1] - Ruse;
      if (e_prev < 0.0 && e_cur >= 0.0) {
        double lo = 0.0, hi = ivp.x() - x_prev;
        ode::Dopri5 probe = ivp;
        for (int it = 0; it < 70; ++it) {
          const double mid = 0.5 * (lo + hi);
          probe.init(x_prev, y_prev, std::min(mid, 1e-4));
          probe.integrate_to(x_prev + mid);
          ((probe.y()[1] - Ruse < 0.0) ? lo : hi) = mid;
        }
        out.r_at_R = probe.y()[0];
        out.arclen = probe.x();
        return out;
      }
      e_prev = e_cur;
    }
    throw NumericError("minimize_truncated_curve: shot never reached z = R");
  };

  // r(R) decreases in the tip height; bracket and bisect
  double lo = Ruse - (r_target * r_target) / (2.0 * (n - 1)) - 8.0;
  double hi = Ruse - 1e-2;
  if (shoot(lo).r_at_R < r_target)
    throw NumericError("minimize_truncated_curve: bracket failed low");
  for (int it = 0; it < 72; ++it) {
    const double mid = 0.5 * (lo + hi);
    ((shoot(mid).r_at_R > r_target) ? lo : hi) = mid;
  }
  const double z_tip = 0.5 * (lo + hi);
  const Shot fin = shoot(z_tip);

  // store the solution at uniform arclength straight from the integrator
  TranslatorProfile out;
  out.kind = TranslatorProfile::Kind::EndMatchedCurve;
  out.n = n;
  const int M = std::clamp(static_cast<int>(fin.arclen / 0.02), 1200, 24000);
  const double hs = fin.arclen / (M - 1);
  out.curve.resize(M, 2);
  {
    ode::Dopri5 ivp(rhs, 1e-12, 1e-13);
    const double r0 = 1e-4;
    VectorXd y0(3);
    y0 << r0, z_tip + r0 * r0 / (2.0 * n), std::atan(r0 / n);
    ivp.init(0.0, y0, 1e-6);
    out.curve(0, 0) = 0.0;
    out.curve(0, 1) = z_tip;
    for (int i = 1; i < M; ++i) {
      ivp.integrate_to(i * hs);
      out.curve(i, 0) = ivp.y()[0];
      out.curve(i, 1) = ivp.y()[1];
    }
  }

  // plug-back residual of the profile geodesic from positions only
  {
    const VectorXd rp = deriv1_uniform(out.curve.col(0), hs);
    const VectorXd zp = deriv1_uniform(out.curve.col(1), hs);
    const VectorXd rpp = deriv2_uniform(out.curve.col(0), hs);
    const VectorXd zpp = deriv2_uniform(out.curve.col(1), hs);
    double worst = 0.0;
    for (int i = 8; i < M - 8; ++i) {
      const double sp = std::hypot(rp[i], zp[i]);
      const double k = (rp[i] * zpp[i] - rpp[i] * zp[i]) / (sp * sp * sp);
      const double nu_r = -zp[i] / sp, nu_z = rp[i] / sp;
      const double res = k - ((n - 1) * nu_r / std::max(out.curve(i, 0), 1e-9) + nu_z);
      worst = std::max(worst, std::abs(res));
    }
    out.residual = worst;
  }

  // discrete-energy certificate: a short capped descent must not move the
  // curve (the shot solution is already the discrete minimizer up to O(h^2))
  auto energy = [&](const MatrixX2d& c, MatrixX2d* grad) {
    const int MM = static_cast<int>(c.rows());
    double E = 0.0;
    if (grad) grad->setZero();
    for (int i = 0; i + 1 < MM; ++i) {
      const Eigen::Vector2d a = c.row(i), b = c.row(i + 1);
      const double len = (b - a).norm();
      const double rmid = std::max(0.5 * (a.x() + b.x()), 0.0);
      const double zmid = 0.5 * (a.y() + b.y());
      const double rho = std::pow(rmid, n - 1) * std::exp(zmid - Ruse);
      E += rho * len;
      if (!grad) continue;
      const Eigen::Vector2d dlen = (a - b) / std::max(len, 1e-300);
      const double drho_r = (rmid > 0.0) ? 0.5 * (n - 1) * rho / std::max(rmid, 1e-12) : 0.0;
      Eigen::Vector2d drho(drho_r, 0.5 * rho);
      grad->row(i) += (rho * dlen + len * drho).transpose();
      grad->row(i + 1) += (-rho * dlen + len * drho).transpose();
    }
    return E;
  };
  MatrixX2d grad(M, 2);
  double E = energy(out.curve, &grad);
  out.energy_log = std::log(E) + Ruse + std::log(unit_sphere_area(n - 1));
  double gnorm = 0.0;
  {
    const double rho_floor = 1e-4 * std::exp(0.0);  // relative to the top slice weight
    for (int i = 1; i + 1 < M; ++i) {
      const double rho = std::pow(std::max(out.curve(i, 0), 1e-4), n - 1) *
                         std::exp(out.curve(i, 1) - Ruse);
      gnorm = std::max(gnorm, grad.row(i).norm() / (std::max(rho, rho_floor) * hs));
    }
  }
  out.grad_norm = gnorm;
  for (int it = 0; it < cfg.polish_iters; ++it) {
    grad.row(M - 1).setZero();
    grad(0, 0) = 0.0;
    MatrixX2d step(M, 2);
    for (int i = 0; i < M; ++i) {
      const double rho = std::pow(std::max(out.curve(i, 0), 1e-4), n - 1) *
                         std::exp(out.curve(i, 1) - Ruse);
      step.row(i) = grad.row(i) / std::max(rho * hs, 1e-10);
      const double cap = 0.25 * hs;
      const double nrm = step.row(i).norm();
      if (nrm > cap) step.row(i) *= cap / nrm;
    }
    bool accepted = false;
    double tau = 1.0;
    for (int bt = 0; bt < 12; ++bt) {
      MatrixX2d trial = out.curve - tau * step;
      for (int i = 0; i < M; ++i) trial(i, 0) = std::max(trial(i, 0), 0.0);
      if (energy(trial, nullptr) < E) {
        out.curve = trial;
        E = energy(out.curve, &grad);
        accepted = true;
        break;
      }
      tau *= 0.5;
    }
    if (!accepted) break;
  }
  out.min_w = 0.0;
  return out;
}

namespace {

// Relaxation core shared by the spec-facing surface minimizer and the
// fattening probe. Boundary ring (first `sectors` vertices) is fixed.
TranslatorProfile relax_mesh_core(MatrixX3d verts, const MatrixX3i& tris, int sectors,
                                  double Ruse, const MinimizeConfig& cfg) {
  MatrixX3d gloc(verts.rows(), 3);
  VectorXd varea(verts.rows());
  double E = mesh_energy_impl(verts, tris, Ruse);
  double gmeasure = 1e300;
  bool touched = false;
  std::vector<double> minw_hist;
  const double axis_event = 3.0 * 5e-3;
  int iter = 0;
  for (; iter < cfg.descent_max_iters; ++iter) {
    mesh_local_gradient_impl(verts, tris, gloc, varea);
    MatrixX3d step(verts.rows(), 3);
    gmeasure = 0.0;
    // degenerate patches (collapsed triangles) freeze instead of random-walking
    std::vector<double> va_sorted(varea.data(), varea.data() + varea.size());
    std::nth_element(va_sorted.begin(), va_sorted.begin() + va_sorted.size() / 2,
                     va_sorted.end());
    const double va_median = va_sorted[va_sorted.size() / 2];
    for (int v = 0; v < verts.rows(); ++v) {
      if (varea[v] < 1e-3 * va_median) {
        step.row(v).setZero();
        continue;
      }
      const double denom = std::max(std::max(verts(v, 0), 0.05) * varea[v], 1e-12);
      step.row(v) = gloc.row(v) / denom;
      if (v < sectors) step.row(v).setZero();
      const double local_h = std::sqrt(std::max(varea[v], 1e-12));
      const double cap = 0.3 * local_h;
      const double nrm = step.row(v).norm();
      gmeasure = std::max(gmeasure, nrm / std::max(local_h, 1e-9));
      if (nrm > cap) step.row(v) *= cap / nrm;
    }
    if (getenv("SOLITON_DEBUG_MESH") && iter % 200 == 0)
      fprintf(stderr, "  it=%d E=%.6e g=%.3e minw=%.4f zmin=%.2f\n", iter, E, gmeasure,
              verts.col(0).minCoeff(), verts.col(2).minCoeff());
    if (gmeasure < cfg.grad_tol) break;
    const double tau = 0.25;
    MatrixX3d trial = verts - tau * step;
    for (int v = 0; v < trial.rows(); ++v) trial(v, 0) = std::max(trial(v, 0), 0.0);
    const double Et = mesh_energy_impl(trial, tris, Ruse);
    if (Et > E * (1.0 + 1e-9)) {
      trial = verts - 0.5 * tau * step;
      for (int v = 0; v < trial.rows(); ++v) trial(v, 0) = std::max(trial(v, 0), 0.0);
    }
    verts = trial;
    E = mesh_energy_impl(verts, tris, Ruse);
    minw_hist.push_back(verts.col(0).minCoeff());
    if (minw_hist.back() < axis_event) {
      if (getenv("SOLITON_DEBUG_MESH")) {
        int vmin = 0;
        verts.col(0).minCoeff(&vmin);
        fprintf(stderr, "  touch at it=%d vertex=%d (ring %d of?) pos=(%.3f, %.3f, %.2f)\n",
                iter, vmin, vmin / sectors, verts(vmin, 0), verts(vmin, 1), verts(vmin, 2));
      }
      touched = true;
      break;
    }
    if (iter % 12 == 11) {
      MatrixX3d avg = MatrixX3d::Zero(verts.rows(), 3);
      VectorXd cnt = VectorXd::Zero(verts.rows());
      for (int t = 0; t < tris.rows(); ++t)
        for (int q = 0; q < 3; ++q) {
          const int v = tris(t, q), w1 = tris(t, (q + 1) % 3), w2 = tris(t, (q + 2) % 3);
          avg.row(v) += verts.row(w1) + verts.row(w2);
          cnt[v] += 2.0;
        }
      MatrixX3d normals = MatrixX3d::Zero(verts.rows(), 3);
      for (int t = 0; t < tris.rows(); ++t) {
        const Eigen::Vector3d a = verts.row(tris(t, 0)), b = verts.row(tris(t, 1)),
                              c = verts.row(tris(t, 2));
        const Eigen::Vector3d N = (b - a).cross(c - a);
        for (int q = 0; q < 3; ++q) normals.row(tris(t, q)) += N.transpose();
      }
      for (int v = sectors; v < verts.rows(); ++v) {
        Eigen::Vector3d nrm = normals.row(v).transpose();
        if (nrm.norm() < 1e-300) continue;
        nrm.normalize();
        Eigen::Vector3d lap = avg.row(v).transpose() / cnt[v] - verts.row(v).transpose();
        lap -= nrm * nrm.dot(lap);
        verts.row(v) += 0.25 * lap.transpose();
        verts(v, 0) = std::max(verts(v, 0), 0.0);
      }
      E = mesh_energy_impl(verts, tris, Ruse);
    }
  }
  bool settled = false;
  if (!touched && minw_hist.size() > 100) {
    const size_t tail = minw_hist.size() * 7 / 10;
    double lo = 1e300, hi = -1e300;
    for (size_t i = tail; i < minw_hist.size(); ++i) {
      lo = std::min(lo, minw_hist[i]);
      hi = std::max(hi, minw_hist[i]);
    }
    settled = (hi - lo) < std::max(0.02, 1e-3 * std::abs(minw_hist.back()));
  }
  if (gmeasure < cfg.grad_tol) settled = true;

  TranslatorProfile out;
  out.kind = TranslatorProfile::Kind::EndMatchedSurface;
  out.n = 3;
  out.verts = verts;
  out.tris = tris;
  out.energy_log = std::log(std::max(E, 1e-300)) + Ruse + std::log(2.0 * kPi);
  out.grad_norm = gmeasure;
  out.min_w = verts.col(0).minCoeff();
  out.touched_axis = touched;
  out.settled = settled;
  return out;
}

// Tube rings from a loop provider, capped by shrinking the last ring onto a
// given point (or its centroid when unspecified).
void build_tube_mesh(const std::function<MatrixX2d(double)>& loop_at, int sectors, double Ruse,
                     double z_bot, const Eigen::Vector2d* cap_point, int min_rings,
                     MatrixX3d& verts, MatrixX3i& tris) {
  const int tube_rings =
      std::clamp(static_cast<int>(std::ceil((Ruse - z_bot) / 2.5)), min_rings, 360);
  const int cap_rings = std::max(6, tube_rings / 8);
  const int rings = tube_rings + cap_rings;
  verts.resize(rings * sectors + 1, 3);
  for (int l = 0; l < tube_rings; ++l) {
    const double z = Ruse - (Ruse - z_bot) * l / double(tube_rings - 1);
    const MatrixX2d loop = loop_at(z);
    for (int j = 0; j < sectors; ++j)
      verts.row(ring_vertex(l, j, sectors)) << std::max(loop(j, 0), 0.0), loop(j, 1), z;
  }
  const int l0 = tube_rings - 1;
  Eigen::Vector2d cen(0, 0);
  for (int j = 0; j < sectors; ++j)
    cen += Eigen::Vector2d(verts(ring_vertex(l0, j, sectors), 0),
                           verts(ring_vertex(l0, j, sectors), 1));
  cen /= sectors;
  if (cap_point) cen = *cap_point;
  double rad = 0.0;
  for (int j = 0; j < sectors; ++j)
    rad = std::max(rad, (Eigen::Vector2d(verts(ring_vertex(l0, j, sectors), 0),
                                         verts(ring_vertex(l0, j, sectors), 1)) -
                         cen)
                            .norm());
  const double zl0 = verts(ring_vertex(l0, 0, sectors), 2);
  for (int l = 1; l <= cap_rings; ++l) {
    const double phi = 0.5 * kPi * l / (cap_rings + 1.0);
    for (int j = 0; j < sectors; ++j) {
      const int src = ring_vertex(l0, j, sectors);
      const Eigen::Vector2d q =
          cen + (Eigen::Vector2d(verts(src, 0), verts(src, 1)) - cen) * std::cos(phi);
      verts.row(ring_vertex(l0 + l, j, sectors))
          << std::max(q.x(), 0.0), q.y(), zl0 - 0.35 * rad * std::sin(phi);
    }
  }
  verts.row(rings * sectors) << std::max(cen.x(), 0.0), cen.y(), zl0 - 0.35 * rad;

  std::vector<Eigen::Vector3i> tl;
  for (int l = 0; l + 1 < rings; ++l)
    for (int j = 0; j < sectors; ++j) {
      const int a = ring_vertex(l, j, sectors), b = ring_vertex(l, (j + 1) % sectors, sectors);
      const int c = ring_vertex(l + 1, j, sectors),
                d = ring_vertex(l + 1, (j + 1) % sectors, sectors);
      tl.emplace_back(a, b, c);
      tl.emplace_back(b, d, c);
    }
  const int apex = rings * sectors;
  for (int j = 0; j < sectors; ++j)
    tl.emplace_back(ring_vertex(rings - 1, j, sectors),
                    ring_vertex(rings - 1, (j + 1) % sectors, sectors), apex);
  tris.resize(tl.size(), 3);
  for (size_t t = 0; t < tl.size(); ++t) tris.row(t) = tl[t];
}

}  // namespace

TranslatorProfile minimize_truncated_surface(const EndFamilyMember& end, double R,
                                             const MinimizeConfig& cfg) {
  const EndContext& C = *end.ctx;
  if (C.grid.kind != GridKind::ProfileRotational)
    throw DomainError("minimize_truncated_surface: torus-shrinker ends only");
  const LogGrid& zg = end.field.zgrid;
  const int kR = zg.lower_index(R);
  const double Ruse = zg.z[kR];

  const ProfileGeometry& p = C.S.prof;
  const int mprof = p.size();
  const int sectors = cfg.sectors;
  const double ubound = 0.75 * C.grid.reach;

  auto loop_at = [&](double z) {
    MatrixX2d loop(sectors, 2);
    const int kz = zg.lower_index(std::max(z, zg.z[0] * 1.01));
    for (int j = 0; j < sectors; ++j) {
      const int i = (j * mprof) / sectors;
      double uu = end.field.values(i, kz);
      uu = ubound * std::tanh(uu / ubound);  // representable continuation
      loop(j, 0) = std::sqrt(zg.z[kz]) * (p.w[i] + uu * p.nu_w[i]);
      loop(j, 1) = std::sqrt(zg.z[kz]) * (p.y[i] + uu * p.nu_y[i]);
    }
    return align_loop(loop);
  };
  const double z_bot = std::max(zg.z[0] * 1.05, cfg.z_bottom_frac * Ruse);
  MatrixX3d verts;
  MatrixX3i tris;
  build_tube_mesh(loop_at, sectors, Ruse, z_bot, nullptr, cfg.rings, verts, tris);
  return relax_mesh_core(std::move(verts), tris, sectors, Ruse, cfg);
}

FlowState make_flow_state(const MatrixX2d& closed_curve) {
  FlowState st;
  st.curve = closed_curve;
  st.closed = true;
  st.topology = FlowState::Topology::Torus;
  Eigen::RowVector2d cen = closed_curve.colwise().mean();
  for (int i = 0; i < closed_curve.rows(); ++i)
    st.ref_diameter = std::max(st.ref_diameter, 2.0 * (closed_curve.row(i) - cen).norm());
  return st;
}

FlowState rmcf_step(const FlowState& state, double dtau, const FlowOptions& opt) {
  if (state.topology == FlowState::Topology::Extinct) return state;
  const int n = opt.ambient_dim;
  FlowState next = state;
  const int m = static_cast<int>(state.curve.rows());
  const CurveFrame f = curve_frame(state.curve, state.closed);

  // explicit drift: rotational curvature and the rescaling term; the profile
  // curvature itself goes implicit through (I - dtau D2)
  MatrixX2d rhs = state.curve;
  const double rot_cap = 0.5 * opt.max_curvature_h / std::max(state.min_spacing, 1e-4) ;
  for (int i = 0; i < m; ++i) {
    if (!state.closed && (i == 0 || i == m - 1)) continue;
    // regularized rotational curvature: near a genuine pole nu_w vanishes
    // with w, so flooring w only saturates the closing speed near surgeries
    double rot = -(n - 2) * f.nu_w[i] / std::max(state.curve(i, 0), opt.axis_tol);
    rot = std::clamp(rot, -rot_cap, rot_cap);
    const double drift = rot + 0.5 * f.Xnu[i];
    rhs.row(i) += dtau * drift * Eigen::RowVector2d(f.nu_w[i], f.nu_y[i]);
  }

  // defect correction: on uniform grids replace the 3-point curvature by the
  // high-order gamma_ss through the explicit side
  if (state.closed) {
    const double hmin = f.seg_len.minCoeff(), hmax_sp = f.seg_len.maxCoeff();
    if (hmax_sp / hmin < 1.0001 && m >= 32) {
      const double h = f.seg_len.mean();
      const VectorXd wss = deriv2_periodic8(state.curve.col(0), h);
      const VectorXd yss = deriv2_periodic8(state.curve.col(1), h);
      for (int i = 0; i < m; ++i) {
        const int ip = (i + 1) % m, im = (i - 1 + m) % m;
        const double hp = f.seg_len[i], hm2 = f.seg_len[im];
        const double cc = 2.0 / (hp + hm2);
        const Eigen::RowVector2d d2 =
            cc * ((state.curve.row(ip) - state.curve.row(i)) / hp -
                  (state.curve.row(i) - state.curve.row(im)) / hm2);
        rhs.row(i) += dtau * (Eigen::RowVector2d(wss[i], yss[i]) - d2);
      }
    }
  }

  ImplicitBands Bw = make_bands(f, dtau, state.closed, m);
  ImplicitBands By = Bw;
  VectorXd rw = rhs.col(0), ry = rhs.col(1);
  if (!state.closed) {
    // poles: w pinned to the axis; y carries the full (n-1)-fold curvature
    // implicitly through the reflected stencil, the rescaling term explicit
    const double h0 = f.seg_len[0], hN = f.seg_len[m - 2];
    Bw.b[0] = 1.0;
    Bw.c[0] = 0.0;
    Bw.b[m - 1] = 1.0;
    Bw.a[m - 1] = 0.0;
    rw[0] = 0.0;
    rw[m - 1] = 0.0;
    By.b[0] = 1.0 + dtau * (n - 1) * 2.0 / (h0 * h0);
    By.c[0] = -dtau * (n - 1) * 2.0 / (h0 * h0);
    By.b[m - 1] = 1.0 + dtau * (n - 1) * 2.0 / (hN * hN);
    By.a[m - 1] = -dtau * (n - 1) * 2.0 / (hN * hN);
    ry[0] = state.curve(0, 1) * (1.0 + 0.5 * dtau);
    ry[m - 1] = state.curve(m - 1, 1) * (1.0 + 0.5 * dtau);
  }
  next.curve.col(0) = solve_bands(Bw, rw);
  next.curve.col(1) = solve_bands(By, ry);
  if (!state.closed) {
    next.curve(0, 0) = 0.0;
    next.curve(m - 1, 0) = 0.0;
  }
  next.tau = state.tau + dtau;

  // lazy remesh: only when the spacing degrades or the node count is off
  {
    const CurveFrame fr = curve_frame(next.curve, state.closed);
    const double ratio = fr.seg_len.maxCoeff() / std::max(fr.seg_len.minCoeff(), 1e-300);
    if (ratio > 1.2 || next.curve.rows() != opt.remesh_nodes)
      next.curve = resample_catmull_rom(next.curve, opt.remesh_nodes, state.closed);
  }
  const CurveFrame fn = curve_frame(next.curve, state.closed);
  next.min_spacing = fn.seg_len.minCoeff();
  next.max_curvature = fn.kappa.cwiseAbs().maxCoeff();

  const double pinch_abs = opt.pinch_tol * std::max(state.ref_diameter, 1e-6);
  if (state.closed) {
    Eigen::RowVector2d cen = next.curve.colwise().mean();
    double rmax = 0.0, rmin = 1e300;
    for (int i = 0; i < next.curve.rows(); ++i) {
      const double d = (next.curve.row(i) - cen).norm();
      rmax = std::max(rmax, d);
      rmin = std::min(rmin, d);
    }
    next.roundness = rmax / std::max(rmin, 1e-300);
    if (2.0 * rmax < 4.0 * pinch_abs) {
      next.topology = FlowState::Topology::Extinct;
      return next;
    }
    if (next.curve.col(0).minCoeff() < std::max(pinch_abs, opt.axis_touch)) {
      // the loop reached the axis: open it into an arc (sphere topology),
      // dropping the contiguous window that dove below the threshold
      const int mm = static_cast<int>(next.curve.rows());
      int istar = 0;
      next.curve.col(0).minCoeff(&istar);
      const double band = 1.5 * std::max(pinch_abs, opt.axis_touch);
      int lo = istar, hi = istar;
      while (next.curve((lo - 1 + mm) % mm, 0) < band && (istar - lo) < mm / 4) --lo;
      while (next.curve((hi + 1) % mm, 0) < band && (hi - istar) < mm / 4) ++hi;
      const int cut = hi - lo + 1;
      MatrixX2d arc(mm - cut, 2);
      for (int i = 0; i < mm - cut; ++i)
        arc.row(i) = next.curve.row(((hi + 1 + i) % mm + mm) % mm);
      arc(0, 0) = 0.0;
      arc(arc.rows() - 1, 0) = 0.0;
      next.curve = resample_open_uniform(arc, opt.remesh_nodes);
      next.closed = false;
      next.topology = FlowState::Topology::Sphere;
    }
  }
  if (!next.closed) {
    const CurveFrame fa = curve_frame(next.curve, false);
    double mn = 1e300;
    double mean = 0.0;
    for (int i = 1; i + 1 < next.curve.rows(); ++i) mean += fa.Xnu[i];
    const double sgn = (mean >= 0.0) ? 1.0 : -1.0;
    for (int i = 1; i + 1 < next.curve.rows(); ++i) mn = std::min(mn, sgn * fa.Xnu[i]);
    next.min_Xnu = mn;
  }
  if (next.max_curvature * next.min_spacing > opt.max_curvature_h &&
      next.topology == FlowState::Topology::Torus)
    throw NumericError("rmcf_step: curvature blow-up without a recognized event");
  return next;
}

FlowRun run_rmcf(FlowState state, double dtau, double tau_max, const FlowOptions& opt,
                 const std::function<void(const FlowState&)>& observer) {
  FlowRun run;
  const bool started_closed = state.closed;
  while (state.tau < tau_max) {
    state = rmcf_step(state, dtau, opt);
    run.taus.push_back(state.tau);
    run.roundness.push_back(state.roundness);
    run.min_w.push_back(state.curve.col(0).minCoeff());
    run.min_Xnu.push_back(state.min_Xnu);
    Eigen::RowVector2d cen = state.curve.colwise().mean();
    double rmax = 0.0;
    for (int i = 0; i < state.curve.rows(); ++i)
      rmax = std::max(rmax, (state.curve.row(i) - cen).norm());
    run.diameter.push_back(2.0 * rmax);
    if (observer) observer(state);
    if (state.topology == FlowState::Topology::Extinct) {
      run.tau_event = state.tau;
      break;
    }
    if (started_closed && !state.closed && run.tau_event < 0.0) run.tau_event = state.tau;
  }
  run.final_state = state;
  return run;
}

std::vector<BlowDownSlice> blow_down(const TranslatorProfile& bowl,
                                     const std::vector<double>& taus) {
  if (bowl.kind != TranslatorProfile::Kind::BowlGraph)
    throw DomainError("blow_down: bowl graphs only");
  const int n = bowl.n;
  const double rad = std::sqrt(2.0 * (n - 1));
  std::vector<BlowDownSlice> out;
  for (double tau : taus) {
    const double zc = std::exp(-tau);
    if (zc + std::exp(-0.5 * tau) > bowl.F[bowl.F.size() - 1] * 0.9)
      throw DomainError("blow_down: profile window too short for requested tau");
    BlowDownSlice sl;
    sl.tau = tau;
    const double r0 = bowl_inverse(bowl, zc);
    sl.hausdorff_to_S = std::abs(std::exp(0.5 * tau) * r0 - rad);
    for (int q = -8; q <= 8; ++q) {
      const double zhat = q / 8.0;
      const double rr = bowl_inverse(bowl, zc + std::exp(-0.5 * tau) * zhat);
      sl.split_defect =
          std::max(sl.split_defect, std::abs(std::exp(0.5 * tau) * (rr - r0)));
    }
    // Gaussian area of the rescaled surface
    const int m = static_cast<int>(bowl.r.size());
    VectorXd integrand(m);
    for (int i = 0; i < m; ++i) {
      const double r = bowl.r[i];
      const double q = std::exp(tau) * (r * r + (bowl.F[i] - zc) * (bowl.F[i] - zc));
      integrand[i] = std::pow(r, n - 1) * std::sqrt(1.0 + bowl.Fp[i] * bowl.Fp[i]) *
                     std::exp(-0.25 * q);
    }
    const double h = bowl.r[1] - bowl.r[0];
    sl.gaussian_area = std::pow(4.0 * kPi, -0.5 * n) * unit_sphere_area(n - 1) *
                       std::exp(0.5 * n * tau) * integrate_cubic_uniform(integrand, h);
    out.push_back(sl);
  }
  return out;
}

double blow_down_coord_change_defect(const EndField& u, const TranslatorProfile& bowl,
                                     double tau) {
  // The rescaled-graph representation of the blow-down slices must reproduce
  // the directly rescaled bowl slices; the defect measures the
  // cross-representation error between the end field and the stored graph.
  const LogGrid& zg = u.zgrid;
  const double rad = std::sqrt(2.0 * (bowl.n - 1));
  ModalGridFn row0(zg, u.values.row(0).transpose());
  double worst = 0.0;
  for (int q = -6; q <= 6; ++q) {
    const double zhat = q / 6.0;
    const double zeta = std::exp(-tau) + std::exp(-0.5 * tau) * zhat;
    if (zeta < zg.z[4] || zeta > zg.z[zg.size() - 5]) continue;
    const double from_field =
        std::sqrt(1.0 + std::exp(0.5 * tau) * zhat) * (rad + row0(zeta));
    const double direct = std::exp(0.5 * tau) * bowl_inverse(bowl, zeta);
    worst = std::max(worst, std::abs(from_field - direct));
  }
  return worst;
}

RegionProbeReport region_probe(const EndFamilyMember& base, const std::vector<double>& a_grid,
                               double R, const DeformConfig& dcfg, const MinimizeConfig& mcfg) {
  RegionProbeReport rep;
  rep.a_values = a_grid;
  std::vector<double> a_sorted = a_grid;
  std::sort(a_sorted.begin(), a_sorted.end());
  if (a_sorted != a_grid) throw DomainError("region_probe: a_grid must be sorted");

  for (double a : a_grid) {
    EndFamilyMember mem = (a == 0.0) ? base : one_sided_deform(base, a, dcfg).member;
    rep.minimizers.push_back(minimize_truncated_curve(mem, R, mcfg));
  }
  // slice-wise radii: each minimizer curve is a graph z -> r
  const int slices = 24;
  std::vector<double> zs;
  const double z_lo = base.z0 * 0.15, z_hi = R * 0.9;
  for (int s = 0; s < slices; ++s)
    zs.push_back(z_lo * std::pow(z_hi / z_lo, s / double(slices - 1)));
  auto radius_at = [&](const TranslatorProfile& tp, double z) -> double {
    const auto& c = tp.curve;
    if (z <= c(0, 1)) return 0.0;
    for (int i = 0; i + 1 < c.rows(); ++i)
      if (c(i, 1) <= z && z < c(i + 1, 1)) {
        const double f = (z - c(i, 1)) / std::max(c(i + 1, 1) - c(i, 1), 1e-300);
        return (1.0 - f) * c(i, 0) + f * c(i + 1, 0);
      }
    return c(c.rows() - 1, 0);
  };
  std::vector<double> gaps;
  for (size_t ai = 0; ai + 1 < rep.minimizers.size(); ++ai) {
    double gmin = 1e300, gmax = 0.0;
    for (double z : zs) {
      const double g = radius_at(rep.minimizers[ai + 1], z) - radius_at(rep.minimizers[ai], z);
      if (z > rep.minimizers[ai + 1].curve(0, 1) && z > rep.minimizers[ai].curve(0, 1)) {
        if (g <= 0.0) ++rep.nesting_violations;
        gmin = std::min(gmin, g);
        gmax = std::max(gmax, g);
      }
    }
    gaps.push_back(gmax);
    rep.max_gap = std::max(rep.max_gap, gmax);
    rep.min_gap = std::min(rep.min_gap, gmin);
  }
  // linearity of gap vs a spacing
  if (gaps.size() >= 2) {
    double ratio_min = 1e300, ratio_max = 0.0;
    for (size_t i = 0; i < gaps.size(); ++i) {
      const double da = a_grid[i + 1] - a_grid[i];
      ratio_min = std::min(ratio_min, gaps[i] / da);
      ratio_max = std::max(ratio_max, gaps[i] / da);
    }
    rep.gap_linearity = ratio_max / std::max(ratio_min, 1e-300);
  }
  return rep;
}

TopologyClass topology_classify(const TranslatorProfile& profile, double kappa_bar,
                                double axis_tol) {
  if (profile.kind != TranslatorProfile::Kind::EndMatchedSurface)
    throw DomainError("topology_classify: surface profiles only");
  if (profile.touched_axis || profile.min_w < axis_tol) return TopologyClass::TouchesAxis_Disk;
  if (profile.min_w > kappa_bar && profile.settled) return TopologyClass::AvoidsCylinder_Torus;
  return TopologyClass::Undetermined;
}

namespace {

struct CollapseShapes {
  std::vector<double> taus;
  std::vector<MatrixX2d> loops;  // resampled profile loops of the inner flow
  double tau_ext = 0.0;
  Eigen::Vector2d ext_point = Eigen::Vector2d::Zero();
};

// Inner one-sided rescaled flow of the shrinker, snapshotted until extinction;
// the family of strongly inner-deformed ends tracks these shapes below the
// graph-representable window.
CollapseShapes run_collapse(const ShrinkerSurface& T, double kappa0, int sectors) {
  CollapseShapes out;
  const ProfileGeometry& p = T.prof;
  MatrixX2d loop(p.size(), 2);
  for (int i = 0; i < p.size(); ++i) {
    loop(i, 0) = p.w[i] - kappa0 * p.nu_w[i];
    loop(i, 1) = p.y[i] - kappa0 * p.nu_y[i];
  }
  FlowOptions fo;
  fo.remesh_nodes = 256;
  FlowState st = make_flow_state(loop);
  const double dtau = 5e-4, snap = 0.02;
  double next_snap = 0.0;
  while (st.topology == FlowState::Topology::Torus && st.tau < 6.0) {
    if (st.tau >= next_snap) {
      out.taus.push_back(st.tau);
      out.loops.push_back(align_loop(resample_catmull_rom(st.curve, sectors, true)));
      next_snap += snap;
    }
    Eigen::RowVector2d cen = st.curve.colwise().mean();
    out.ext_point = cen.transpose();
    st = rmcf_step(st, dtau, fo);
  }
  out.tau_ext = st.tau;
  return out;
}

MatrixX2d collapse_loop_at(const CollapseShapes& cs, double tau) {
  if (cs.loops.empty()) throw NumericError("fatten_probe: empty collapse record");
  if (tau <= cs.taus.front()) return cs.loops.front();
  for (size_t i = 0; i + 1 < cs.taus.size(); ++i)
    if (cs.taus[i] <= tau && tau < cs.taus[i + 1]) {
      const double f = (tau - cs.taus[i]) / (cs.taus[i + 1] - cs.taus[i]);
      return (1.0 - f) * cs.loops[i] + f * cs.loops[i + 1];
    }
  return cs.loops.back();
}

}  // namespace

namespace {

TopologyClass classify_family_member_impl(const EndFamilyMember& base, double a, double R,
                                          double kappa_bar, const MinimizeConfig& mc,
                                          const CollapseShapes& cs) {
  const EndContext& C = *base.ctx;
  const LogGrid& zg = base.field.zgrid;
  const double Ruse = zg.z[zg.lower_index(R)];
  const ProfileGeometry& p = C.S.prof;
  const int mprof = p.size();
  const int sectors = mc.sectors;
  const double mu1 = C.mu1();
  const double psimax = C.spec.psi1.maxCoeff();
  const double ubound = 0.75 * C.grid.reach;
  const double kappa0 = 0.12;
  const double z_bot_default = std::max(zg.z[0] * 1.05, 4.0);
  {
    auto u_fam = [&](int i, double z) {
      const int kz = zg.lower_index(std::max(z, zg.z[0] * 1.01));
      double uu = base.field.values(i, kz) - a * std::pow(z, mu1) * C.spec.psi1[i];
      return ubound * std::tanh(uu / ubound);
    };
    auto graph_loop = [&](double z) {
      MatrixX2d loop(sectors, 2);
      for (int j = 0; j < sectors; ++j) {
        const int i = (j * mprof) / sectors;
        const double uu = u_fam(i, z);
        loop(j, 0) = std::sqrt(z) * (p.w[i] + uu * p.nu_w[i]);
        loop(j, 1) = std::sqrt(z) * (p.y[i] + uu * p.nu_y[i]);
      }
      return align_loop(loop);
    };
    double z_kappa = -1.0, z_pinch = -1.0;
    if (a > 0.0) {
      z_kappa = std::pow(a * psimax / kappa0, 1.0 / (-mu1));
      z_pinch = z_kappa * std::exp(-cs.tau_ext);
    }
    double z_bot = z_bot_default;
    Eigen::Vector2d cap_pt;
    const Eigen::Vector2d* cap = nullptr;
    std::function<MatrixX2d(double)> loops;
    if (a > 0.0 && z_kappa > z_bot_default) {
      z_bot = std::max(z_pinch * 1.08, 2.0);
      cap_pt = std::sqrt(std::max(z_bot, 1e-9)) * cs.ext_point;
      cap = &cap_pt;
      loops = [&, z_kappa](double z) -> MatrixX2d {
        if (z >= 1.1 * z_kappa) return graph_loop(z);
        const double tau = std::log(std::max(z_kappa / z, 1.0));
        MatrixX2d fl = std::sqrt(z) * collapse_loop_at(cs, tau);
        if (z <= z_kappa) return fl;
        const double f = (1.1 * z_kappa - z) / (0.1 * z_kappa);
        MatrixX2d gl = graph_loop(z);
        return (f * fl + (1.0 - f) * gl).eval();
      };
    } else {
      loops = graph_loop;
    }
    MatrixX3d verts;
    MatrixX3i tris;
    build_tube_mesh(loops, sectors, Ruse, z_bot, cap, mc.rings, verts, tris);
    TranslatorProfile prof = relax_mesh_core(std::move(verts), tris, sectors, Ruse, mc);
    if (getenv("SOLITON_DEBUG_FATTEN"))
      fprintf(stderr, "  classify a=%.3e: z_k=%.1f z_p=%.1f min_w=%.3f touched=%d settled=%d\n",
              a, z_kappa, z_pinch, prof.min_w, (int)prof.touched_axis, (int)prof.settled);
    return topology_classify(prof, kappa_bar);
  }
}

}  // namespace

TopologyClass classify_family_member(const EndFamilyMember& base, double a, double R,
                                     double kappa_bar, const MinimizeConfig& mcfg) {
  const EndContext& C = *base.ctx;
  if (C.grid.kind != GridKind::ProfileRotational)
    throw DomainError("classify_family_member: torus-shrinker ends only");
  const CollapseShapes cs = run_collapse(C.S, 0.12, mcfg.sectors);
  return classify_family_member_impl(base, a, R, kappa_bar, mcfg, cs);
}

FattenBracket fatten_probe(const EndFamilyMember& base, double a_lo, double a_hi, double R,
                           double kappa_bar, double rel_tol, const DeformConfig& dcfg,
                           const MinimizeConfig& mcfg) {
  const EndContext& C = *base.ctx;
  if (C.grid.kind != GridKind::ProfileRotational)
    throw DomainError("fatten_probe: torus-shrinker ends only");
  (void)dcfg;
  const CollapseShapes cs = run_collapse(C.S, 0.12, mcfg.sectors);
  auto classify = [&](double a, const MinimizeConfig& mc) {
    return classify_family_member_impl(base, a, R, kappa_bar, mc, cs);
  };

  TopologyClass lo = classify(a_lo, mcfg);
  TopologyClass hi = classify(a_hi, mcfg);
  if (lo != TopologyClass::TouchesAxis_Disk || hi != TopologyClass::AvoidsCylinder_Torus)
    throw HypothesisError("fatten_probe: initial bracket does not straddle the transition");
  FattenBracket out;
  out.a_minus = a_lo;
  out.a_plus = a_hi;
  const double width0 = a_hi - a_lo;
  while (out.a_plus - out.a_minus > rel_tol * width0) {
    const double mid = 0.5 * (out.a_minus + out.a_plus);
    const TopologyClass c = classify(mid, mcfg);
    ++out.bisections;
    if (c == TopologyClass::TouchesAxis_Disk)
      out.a_minus = mid;
    else if (c == TopologyClass::AvoidsCylinder_Torus)
      out.a_plus = mid;
    else {
      // undetermined band: bracket cannot shrink past it; report honestly
      break;
    }
    if (out.bisections > 40) break;
  }
  MinimizeConfig fine = mcfg;
  fine.rings = (3 * mcfg.rings) / 2;
  fine.sectors = (3 * mcfg.sectors) / 2;
  out.refined_consistent = (classify(out.a_minus, fine) == TopologyClass::TouchesAxis_Disk) &&
                           (classify(out.a_plus, fine) == TopologyClass::AvoidsCylinder_Torus);
  return out;
}

namespace mesh_detail {
double mesh_energy(const MatrixX3d& verts, const MatrixX3i& tris, double zref) {
  return mesh_energy_impl(verts, tris, zref);
}
void mesh_local_gradient(const MatrixX3d& verts, const MatrixX3i& tris, MatrixX3d& gloc,
                         Eigen::VectorXd& varea) {
  mesh_local_gradient_impl(verts, tris, gloc, varea);
}
}  // namespace mesh_detail

}  // namespace soliton
