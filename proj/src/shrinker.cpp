#include "soliton/shrinker.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "soliton/grid.hpp"
#include "soliton/ode.hpp"

namespace soliton {

namespace {

constexpr double kPi = std::numbers::pi;

double unit_sphere_area(int k) {
  // |S^k|
  return 2.0 * std::pow(kPi, 0.5 * (k + 1)) / std::tgamma(0.5 * (k + 1));
}

double wrap_to_pi(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a <= -kPi) a += 2.0 * kPi;
  return a;
}

// Profile geodesic field for the conformal length w^{n-2} e^{-(w^2+y^2)/4}.
// State (w, y, alpha) with unit tangent (cos a, sin a); nu = (-sin a, cos a).
ode::Rhs geodesic_rhs(int n) {
  return [n](double, const VectorXd& s) {
    VectorXd f(3);
    const double w = s[0], y = s[1], a = s[2];
    f[0] = std::cos(a);
    f[1] = std::sin(a);
    f[2] = -std::sin(a) * ((n - 2) / w - 0.5 * w) - 0.5 * y * std::cos(a);
    return f;
  };
}

struct ShotOrbit {
  bool returned = false;
  double defect = 0.0;       // angle deviation from orthogonal return
  double arclength = 0.0;    // arclength at the return crossing
  double w_return = 0.0;
};

// Integrate the half-loop from (w0, 0) with vertical initial velocity until
// the curve returns to {y = 0}. Sentinel defects classify failed orbits so the
// bisection always has a side to move to.
ShotOrbit shoot_half_loop(int n, double w0, const ShootingConfig& cfg) {
  ode::Dopri5 solver(geodesic_rhs(n), cfg.integ_tol, cfg.integ_tol);
  VectorXd s0(3);
  s0 << w0, 0.0, 0.5 * kPi;
  solver.init(0.0, s0, 1e-6);
  solver.set_hmax(0.05);

  ShotOrbit out;
  double e_prev = 0.0;
  while (solver.x() < cfg.max_arclength) {
    const double x_prev = solver.x();
    const VectorXd y_prev = solver.y();
    solver.step(cfg.max_arclength);
    const double w = solver.y()[0], yy = solver.y()[1], al = solver.y()[2];
    if (w < 0.02 || al < -2.5 * kPi) {  // curled into the axis: over-rotation
      out.defect = -kPi;
      return out;
    }
    if (w > 8.0 || al > 1.5 * kPi) {  // escaped outward: under-rotation
      out.defect = kPi;
      return out;
    }
    if (e_prev > 0.0 && yy < 0.0) {
      // refine the crossing by bisecting the last step
      double lo = 0.0, hi = solver.x() - x_prev;
      ode::Dopri5 probe = solver;
      VectorXd yc = solver.y();
      double xc = solver.x();
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        probe.init(x_prev, y_prev, std::min(mid, 1e-4));
        probe.integrate_to(x_prev + mid);
        if (probe.y()[1] > 0.0)
          lo = mid;
        else
          hi = mid;
        xc = probe.x();
        yc = probe.y();
        if (hi - lo < 1e-15 * (1.0 + x_prev)) break;
      }
      out.returned = true;
      out.arclength = xc;
      out.w_return = yc[0];
      out.defect = wrap_to_pi(yc[2] + 0.5 * kPi);
      return out;
    }
    e_prev = yy;
  }
  out.defect = kPi;  // never came back: treat as under-rotation
  return out;
}

// Catmull-Rom reconstruction of a closed node polyline with 4-point
// Gauss-Legendre per segment; integrates f(w,y) |gamma'| dt.
template <class F>
double integrate_over_closed_nodes(const VectorXd& w, const VectorXd& y, F&& f) {
  static const double gx[4] = {0.06943184420297371, 0.33000947820757187, 0.66999052179242813,
                               0.93056815579702629};
  static const double gw[4] = {0.17392742256872693, 0.32607257743127307, 0.32607257743127307,
                               0.17392742256872693};
  const int m = static_cast<int>(w.size());
  auto seg = [&](int i, double t, double& pw, double& py, double& dw, double& dy) {
    const int i0 = (i - 1 + m) % m, i1 = i, i2 = (i + 1) % m, i3 = (i + 2) % m;
    auto cr = [t](double p0, double p1, double p2, double p3, double& v, double& d) {
      const double a = 2.0 * p1;
      const double b = p2 - p0;
      const double c = 2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3;
      const double e = -p0 + 3.0 * p1 - 3.0 * p2 + p3;
      v = 0.5 * (a + b * t + c * t * t + e * t * t * t);
      d = 0.5 * (b + 2.0 * c * t + 3.0 * e * t * t);
    };
    cr(w[i0], w[i1], w[i2], w[i3], pw, dw);
    cr(y[i0], y[i1], y[i2], y[i3], py, dy);
  };
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    double acc = 0.0;
    for (int q = 0; q < 4; ++q) {
      double pw, py, dw, dy;
      seg(i, gx[q], pw, py, dw, dy);
      acc += gw[q] * f(pw, py) * std::hypot(dw, dy);
    }
    total += acc;
  }
  return total;
}

// Gauss-Legendre over the sphere profile (polar angle), essentially exact.
template <class F>
double integrate_over_sphere_profile(double r, double y_center, int panels, F&& f) {
  static const double gx[4] = {0.06943184420297371, 0.33000947820757187, 0.66999052179242813,
                               0.93056815579702629};
  static const double gw[4] = {0.17392742256872693, 0.32607257743127307, 0.32607257743127307,
                               0.17392742256872693};
  const double hphi = kPi / panels;
  double total = 0.0;
  for (int i = 0; i < panels; ++i) {
    for (int q = 0; q < 4; ++q) {
      const double phi = (i + gx[q]) * hphi;
      const double w = r * std::sin(phi), y = y_center - r * std::cos(phi);
      total += gw[q] * f(w, y) * r * hphi;  // ds = r dphi
    }
  }
  return total;
}

double log_bessel_i0(double x) {
  x = std::abs(x);
  if (x < 600.0) return std::log(std::cyl_bessel_i(0.0, x));
  return x - 0.5 * std::log(2.0 * kPi * x) + std::log1p(1.0 / (8.0 * x));
}

}  // namespace

ProfileGeometry ShrinkerSurface::profile(int m) const {
  if (symmetry == Symmetry::RotationalProfile) return prof;
  if (m <= 0) m = 512;
  ProfileGeometry p;
  p.closed = false;
  p.length = kPi * radius;
  p.h = p.length / m;
  p.w.resize(m);
  p.y.resize(m);
  p.tw.resize(m);
  p.ty.resize(m);
  p.nu_w.resize(m);
  p.nu_y.resize(m);
  p.kappa.resize(m);
  p.H.resize(m);
  p.Xnu.resize(m);
  p.A2.resize(m);
  const int n = ambient_dim;
  for (int i = 0; i < m; ++i) {
    const double phi = (i + 0.5) * kPi / m;
    p.w[i] = radius * std::sin(phi);
    p.y[i] = y_center - radius * std::cos(phi);
    p.tw[i] = std::cos(phi);
    p.ty[i] = std::sin(phi);
    p.nu_w[i] = std::sin(phi);
    p.nu_y[i] = -std::cos(phi);
    p.kappa[i] = 1.0 / radius;
    p.H[i] = (n - 1) / radius;
    p.Xnu[i] = p.w[i] * p.nu_w[i] + p.y[i] * p.nu_y[i];
    p.A2[i] = p.kappa[i] * p.kappa[i] + (n - 2) * std::pow(p.nu_w[i] / p.w[i], 2);
  }
  return p;
}

double ShrinkerSurface::reach_estimate() const {
  if (is_round()) return radius;
  double max_curv = 0.0;
  const int m = prof.size();
  for (int i = 0; i < m; ++i) {
    max_curv = std::max(max_curv, std::abs(prof.kappa[i]));
    max_curv = std::max(max_curv, std::abs(prof.nu_w[i] / prof.w[i]));
  }
  double min_gap = 1e300;
  const int skip = std::max(4, m / 16);
  for (int i = 0; i < m; ++i)
    for (int j = i + skip; j < m && (m - (j - i)) >= skip; ++j) {
      const double d = std::hypot(prof.w[i] - prof.w[j], prof.y[i] - prof.y[j]);
      min_gap = std::min(min_gap, d);
    }
  return std::min(1.0 / max_curv, 0.5 * min_gap);
}

ShrinkerSurface make_round_sphere(int n) {
  if (n < 2) throw DomainError("make_round_sphere: dimension must satisfy n >= 2");
  ShrinkerSurface s;
  s.ambient_dim = n;
  s.symmetry = Symmetry::RoundSphere;
  s.radius = std::sqrt(2.0 * (n - 1));
  s.residual_tol = 1e-8;
  s.residual_achieved = 0.0;  // H = <X,nu>/2 exactly
  return s;
}

ShrinkerSurface shoot_angenent_torus(int n, const ShootingConfig& cfg) {
  if (n != 3) throw DomainError("shoot_angenent_torus: only the n = 3 torus is implemented");

  // bracket the root of the return-angle defect
  const int scans = 28;
  std::vector<double> ws(scans), ds(scans);
  for (int i = 0; i < scans; ++i) {
    ws[i] = cfg.bracket_lo + (cfg.bracket_hi - cfg.bracket_lo) * i / (scans - 1);
    ds[i] = shoot_half_loop(n, ws[i], cfg).defect;
  }
  int lo = -1;
  for (int i = 0; i + 1 < scans; ++i)
    if (ds[i] != 0.0 && ds[i] * ds[i + 1] < 0.0) {
      lo = i;
      break;
    }
  if (lo < 0)
    throw NumericError("shoot_angenent_torus: bracket does not straddle a closed orbit");

  double a = ws[lo], b = ws[lo + 1], da = ds[lo];
  for (int it = 0; it < cfg.bisect_iters; ++it) {
    const double mid = 0.5 * (a + b);
    const double dm = shoot_half_loop(n, mid, cfg).defect;
    if (dm == 0.0) {
      a = b = mid;
      break;
    }
    if (dm * da > 0.0) {
      a = mid;
      da = dm;
    } else {
      b = mid;
    }
  }
  const double w0 = 0.5 * (a + b);
  const ShotOrbit half = shoot_half_loop(n, w0, cfg);
  if (!half.returned) throw NumericError("shoot_angenent_torus: refined orbit did not close");

  // Integrate the full loop (no mirroring) with output at uniform arclength;
  // the y -> -y symmetry of the result is then a genuine certificate.
  const int m = cfg.nodes;
  const double period = 2.0 * half.arclength;
  const double h = period / m;
  ode::Dopri5 solver(geodesic_rhs(n), cfg.integ_tol, cfg.integ_tol);
  VectorXd s0(3);
  s0 << w0, 0.0, 0.5 * kPi;
  solver.init(0.0, s0, 1e-6);
  solver.set_hmax(0.05);

  ShrinkerSurface S;
  S.ambient_dim = n;
  S.symmetry = Symmetry::RotationalProfile;
  S.residual_tol = cfg.residual_tol;
  ProfileGeometry& p = S.prof;
  p.closed = true;
  p.length = period;
  p.h = h;
  p.w.resize(m);
  p.y.resize(m);
  p.tw.resize(m);
  p.ty.resize(m);
  p.nu_w.resize(m);
  p.nu_y.resize(m);
  p.kappa.resize(m);
  p.H.resize(m);
  p.Xnu.resize(m);
  p.A2.resize(m);
  auto rhs = geodesic_rhs(n);
  for (int i = 0; i < m; ++i) {
    solver.integrate_to(i * h);
    const double w = solver.y()[0], y = solver.y()[1], al = solver.y()[2];
    const double aprime = rhs(0.0, solver.y())[2];
    p.w[i] = w;
    p.y[i] = y;
    p.tw[i] = std::cos(al);
    p.ty[i] = std::sin(al);
    p.nu_w[i] = -std::sin(al);
    p.nu_y[i] = std::cos(al);
    p.kappa[i] = -aprime;  // A_ss for nu = J T
    const double krot = p.nu_w[i] / w;
    p.H[i] = p.kappa[i] + (n - 2) * krot;
    p.Xnu[i] = w * p.nu_w[i] + y * p.nu_y[i];
    p.A2[i] = p.kappa[i] * p.kappa[i] + (n - 2) * krot * krot;
  }
  solver.integrate_to(period);
  const double closure =
      std::hypot(solver.y()[0] - w0, solver.y()[1]) + std::abs(wrap_to_pi(solver.y()[2] - 0.5 * kPi));
  if (closure > 1e-6) throw NumericError("shoot_angenent_torus: orbit closure failed");

  // embeddedness: no segment pair of the closed polyline may intersect
  for (int i = 0; i < m; ++i) {
    const int i2 = (i + 1) % m;
    for (int j = i + 2; j < m; ++j) {
      if (i == 0 && j == m - 1) continue;
      const int j2 = (j + 1) % m;
      const double ax = p.w[i], ay = p.y[i], bx = p.w[i2], by = p.y[i2];
      const double cx = p.w[j], cy = p.y[j], dx = p.w[j2], dy = p.y[j2];
      auto orient = [](double px, double py, double qx, double qy, double rx, double ry) {
        return (qx - px) * (ry - py) - (qy - py) * (rx - px);
      };
      const double o1 = orient(ax, ay, bx, by, cx, cy), o2 = orient(ax, ay, bx, by, dx, dy);
      const double o3 = orient(cx, cy, dx, dy, ax, ay), o4 = orient(cx, cy, dx, dy, bx, by);
      if (o1 * o2 < 0.0 && o3 * o4 < 0.0)
        throw NumericError("shoot_angenent_torus: profile self-intersects");
    }
  }

  S.inner_intercept = p.w.minCoeff();
  S.outer_intercept = p.w.maxCoeff();
  S.residual_achieved = shrinker_residual_from_positions(p, n);
  if (S.residual_achieved > S.residual_tol)
    throw NumericError("shoot_angenent_torus: residual certificate above tolerance");
  return S;
}

double shrinker_residual_from_positions(const ProfileGeometry& prof, int n) {
  const int m = prof.size();
  if (!prof.closed || m < 32) throw DomainError("residual certificate needs a closed profile");
  const VectorXd wp = deriv1_periodic8(prof.w, prof.h);
  const VectorXd yp = deriv1_periodic8(prof.y, prof.h);
  const VectorXd wpp = deriv2_periodic8(prof.w, prof.h);
  const VectorXd ypp = deriv2_periodic8(prof.y, prof.h);
  double worst = 0.0;
  for (int i = 0; i < m; ++i) {
    const double sp = std::hypot(wp[i], yp[i]);
    const double k = (wp[i] * ypp[i] - wpp[i] * yp[i]) / (sp * sp * sp);
    const double a_ss = -k;
    const double nu_w = -yp[i] / sp, nu_y = wp[i] / sp;
    const double H = a_ss + (n - 2) * nu_w / prof.w[i];
    const double Xnu = prof.w[i] * nu_w + prof.y[i] * nu_y;
    worst = std::max(worst, std::abs(H - 0.5 * Xnu));
  }
  return worst;
}

double gaussian_area(const ShrinkerSurface& S) {
  const int n = S.ambient_dim;
  const double norm = std::pow(4.0 * kPi, -0.5 * (n - 1)) * unit_sphere_area(n - 2);
  auto weight = [n](double w, double y) {
    return std::pow(w, n - 2) * std::exp(-0.25 * (w * w + y * y));
  };
  if (S.is_round()) return norm * integrate_over_sphere_profile(S.radius, S.y_center, 64, weight);
  return norm * integrate_over_closed_nodes(S.prof.w, S.prof.y, weight);
}

double gaussian_area_shifted(const ShrinkerSurface& S, double a, double b, double t0) {
  const int n = S.ambient_dim;
  const double t2 = t0 * t0;
  const double pref = std::pow(4.0 * kPi, -0.5 * (n - 1)) * std::pow(t0, -(n - 1));
  auto weight = [&](double w, double y) {
    const double q = (w * w + a * a + (y - b) * (y - b)) / (4.0 * t2);
    if (n == 2) {
      // |S^0| reduction: two points theta = +-1
      const double c = a * w / (2.0 * t2);
      return 2.0 * std::exp(-q) * std::cosh(c);
    }
    const double larg = log_bessel_i0(a * w / (2.0 * t2));
    return std::pow(w, n - 2) * 2.0 * kPi * std::exp(-q + larg);
  };
  if (S.is_round()) return pref * integrate_over_sphere_profile(S.radius, S.y_center, 64, weight);
  return pref * integrate_over_closed_nodes(S.prof.w, S.prof.y, weight);
}

EntropyReport entropy_estimate(const ShrinkerSurface& S, bool check_residual, double tol) {
  if (check_residual && S.residual_achieved > S.residual_tol)
    throw HypothesisError("entropy_estimate: input violates the shrinker residual bound");
  EntropyReport rep;
  rep.gaussian_area = gaussian_area(S);
  rep.grid_max = -1.0;
  const double offs[] = {0.0, 0.25, 0.5, 1.0};
  const double boffs[] = {-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0};
  for (double a : offs)
    for (double b : boffs)
      for (int k = 0; k <= 12; ++k) {
        const double t0 = std::exp(std::log(0.5) + k * (std::log(2.0) - std::log(0.5)) / 12.0);
        const double f = gaussian_area_shifted(S, a, b, k == 6 ? 1.0 : t0);
        if (f > rep.grid_max) {
          rep.grid_max = f;
          rep.best_x0 = a;
          rep.best_y0 = b;
          rep.best_t0 = (k == 6 ? 1.0 : t0);
        }
      }
  if (rep.grid_max > rep.gaussian_area + tol)
    throw HypothesisError(
        "entropy_estimate: recentering sweep exceeds F[S]; surface is not a shrinker");
  return rep;
}

ShrinkerSurface translated_along_axis(const ShrinkerSurface& S, double dy) {
  ShrinkerSurface out = S;
  if (S.is_round()) {
    out.y_center += dy;
    const ProfileGeometry p = out.profile(256);
    double worst = 0.0;
    for (int i = 0; i < p.size(); ++i)
      worst = std::max(worst, std::abs(p.H[i] - 0.5 * p.Xnu[i]));
    out.residual_achieved = worst;
    return out;
  }
  out.prof.y.array() += dy;
  for (int i = 0; i < out.prof.size(); ++i) {
    out.prof.Xnu[i] = out.prof.w[i] * out.prof.nu_w[i] + out.prof.y[i] * out.prof.nu_y[i];
  }
  out.residual_achieved = (out.prof.H - 0.5 * out.prof.Xnu).cwiseAbs().maxCoeff();
  return out;
}

}  // namespace soliton
