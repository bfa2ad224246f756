#ifndef SOLITON_SPLINE_HPP
#define SOLITON_SPLINE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "soliton/errors.hpp"

namespace soliton {

using Eigen::MatrixX2d;
using Eigen::VectorXd;

// Periodic natural cubic spline on a uniform parameter grid.
class PeriodicCubicSpline {
public:
  PeriodicCubicSpline() = default;
  PeriodicCubicSpline(const VectorXd& values, double period)
      : y_(values), period_(period), h_(period / values.size()) {
    const int n = static_cast<int>(values.size());
    if (n < 4) throw DomainError("PeriodicCubicSpline: need >= 4 nodes");
    // cyclic tridiagonal system for second derivatives
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    VectorXd rhs(n);
    for (int i = 0; i < n; ++i) {
      const int im = (i - 1 + n) % n, ip = (i + 1) % n;
      A(i, im) = h_ / 6.0;
      A(i, i) = 2.0 * h_ / 3.0;
      A(i, ip) = h_ / 6.0;
      rhs[i] = (y_[ip] - 2.0 * y_[i] + y_[im]) / h_;
    }
    m_ = A.partialPivLu().solve(rhs);
  }

  double operator()(double s) const {
    const int n = static_cast<int>(y_.size());
    double u = std::fmod(s, period_);
    if (u < 0) u += period_;
    int i = std::min(static_cast<int>(u / h_), n - 1);
    const int ip = (i + 1) % n;
    const double a = (h_ * (i + 1) - u) / h_, b = (u - h_ * i) / h_;
    return a * y_[i] + b * y_[ip] +
           ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[ip]) * h_ * h_ / 6.0;
  }

  double deriv(double s) const {
    const int n = static_cast<int>(y_.size());
    double u = std::fmod(s, period_);
    if (u < 0) u += period_;
    int i = std::min(static_cast<int>(u / h_), n - 1);
    const int ip = (i + 1) % n;
    const double a = (h_ * (i + 1) - u) / h_, b = (u - h_ * i) / h_;
    return (y_[ip] - y_[i]) / h_ +
           ((1.0 - 3.0 * a * a) * m_[i] + (3.0 * b * b - 1.0) * m_[ip]) * h_ / 6.0;
  }

private:
  VectorXd y_, m_;
  double period_ = 0.0, h_ = 0.0;
};

// Resample a closed polyline to `m` nodes uniform in arclength.
// Input rows are points; the curve closes from the last row back to the first.
inline MatrixX2d resample_closed_uniform(const MatrixX2d& pts, int m) {
  const int n = static_cast<int>(pts.rows());
  if (n < 4) throw DomainError("resample_closed_uniform: too few points");
  std::vector<double> cum(n + 1, 0.0);
  for (int i = 0; i < n; ++i) {
    const int ip = (i + 1) % n;
    cum[i + 1] = cum[i] + (pts.row(ip) - pts.row(i)).norm();
  }
  const double total = cum[n];
  MatrixX2d out(m, 2);
  int seg = 0;
  for (int j = 0; j < m; ++j) {
    const double target = total * j / m;
    while (seg + 1 <= n && cum[seg + 1] < target) ++seg;
    const int ip = (seg + 1) % n;
    const double f = (target - cum[seg]) / std::max(cum[seg + 1] - cum[seg], 1e-300);
    out.row(j) = (1.0 - f) * pts.row(seg) + f * pts.row(ip);
  }
  return out;
}

// Catmull-Rom resampling of a polyline to m nodes uniform in (chord)
// arclength; closed wraps, open clamps the ends.
inline MatrixX2d resample_catmull_rom(const MatrixX2d& pts, int m, bool closed) {
  const int n = static_cast<int>(pts.rows());
  const int segs = closed ? n : n - 1;
  std::vector<double> cum(segs + 1, 0.0);
  for (int i = 0; i < segs; ++i)
    cum[i + 1] = cum[i] + (pts.row((i + 1) % n) - pts.row(i)).norm();
  const double total = cum[segs];
  auto idx = [&](int i) { return closed ? ((i % n + n) % n) : std::clamp(i, 0, n - 1); };
  auto cr = [](double t, double p0, double p1, double p2, double p3) {
    const double a = 2.0 * p1, b = p2 - p0;
    const double c = 2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3;
    const double e = -p0 + 3.0 * p1 - 3.0 * p2 + p3;
    return 0.5 * (a + b * t + c * t * t + e * t * t * t);
  };
  MatrixX2d out(m, 2);
  int seg = 0;
  const int targets = closed ? m : m - 1;
  for (int j = 0; j < m; ++j) {
    const double target = (j == targets) ? total : total * j / targets;
    while (seg + 1 <= segs - 1 && cum[seg + 1] < target) ++seg;
    const double t = (target - cum[seg]) / std::max(cum[seg + 1] - cum[seg], 1e-300);
    for (int c2 = 0; c2 < 2; ++c2)
      out(j, c2) = cr(t, pts(idx(seg - 1), c2), pts(idx(seg), c2), pts(idx(seg + 1), c2),
                      pts(idx(seg + 2), c2));
  }
  if (!closed) {
    out.row(0) = pts.row(0);
    out.row(m - 1) = pts.row(n - 1);
  }
  return out;
}

// Composite quadrature of samples on a uniform grid by local cubic
// reconstruction (4th order). Falls back gracefully for short vectors.
inline double integrate_cubic_uniform(const VectorXd& f, double h) {
  const int n = static_cast<int>(f.size());
  if (n < 2) return 0.0;
  if (n < 5) {  // trapezoid
    double s = 0.5 * (f[0] + f[n - 1]);
    for (int i = 1; i < n - 1; ++i) s += f[i];
    return s * h;
  }
  // Gregory-type end corrections on top of the trapezoid rule give a
  // 4th-order composite rule without parity constraints.
  double s = 0.5 * (f[0] + f[n - 1]);
  for (int i = 1; i < n - 1; ++i) s += f[i];
  // Euler-Maclaurin end correction with 3rd-order one-sided derivatives.
  const double fpa = (-11.0 * f[0] + 18.0 * f[1] - 9.0 * f[2] + 2.0 * f[3]) / (6.0 * h);
  const double fpb =
      (11.0 * f[n - 1] - 18.0 * f[n - 2] + 9.0 * f[n - 3] - 2.0 * f[n - 4]) / (6.0 * h);
  return s * h - h * h / 12.0 * (fpb - fpa);
}

// Trapezoid rule for smooth periodic samples (spectrally accurate).
inline double integrate_periodic(const VectorXd& f, double h) { return f.sum() * h; }

// Weighted length integral int f(x, y) |gamma'| dt over a Catmull-Rom
// reconstruction of a node polyline; 4-point Gauss per segment. `closed`
// wraps the stencil, otherwise the end points are clamped.
template <class F>
double curve_weight_integral(const VectorXd& x, const VectorXd& y, F&& f, bool closed) {
  static const double gx[4] = {0.06943184420297371, 0.33000947820757187, 0.66999052179242813,
                               0.93056815579702629};
  static const double gw[4] = {0.17392742256872693, 0.32607257743127307, 0.32607257743127307,
                               0.17392742256872693};
  const int m = static_cast<int>(x.size());
  const int segs = closed ? m : m - 1;
  auto idx = [&](int i) {
    if (closed) return (i % m + m) % m;
    return std::clamp(i, 0, m - 1);
  };
  auto cr = [](double t, double p0, double p1, double p2, double p3, double& v, double& d) {
    const double a = 2.0 * p1;
    const double b = p2 - p0;
    const double c = 2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3;
    const double e = -p0 + 3.0 * p1 - 3.0 * p2 + p3;
    v = 0.5 * (a + b * t + c * t * t + e * t * t * t);
    d = 0.5 * (b + 2.0 * c * t + 3.0 * e * t * t);
  };
  double total = 0.0;
  for (int i = 0; i < segs; ++i) {
    for (int q = 0; q < 4; ++q) {
      double px, py, dx, dy;
      cr(gx[q], x[idx(i - 1)], x[idx(i)], x[idx(i + 1)], x[idx(i + 2)], px, dx);
      cr(gx[q], y[idx(i - 1)], y[idx(i)], y[idx(i + 1)], y[idx(i + 2)], py, dy);
      total += gw[q] * f(px, py) * std::hypot(dx, dy);
    }
  }
  return total;
}

// Same quadrature accumulated as log(sum of exp terms); term = log f + log |gamma'|.
template <class LogF>
double curve_weight_integral_log(const VectorXd& x, const VectorXd& y, LogF&& logf, bool closed) {
  static const double gx[4] = {0.06943184420297371, 0.33000947820757187, 0.66999052179242813,
                               0.93056815579702629};
  static const double gw[4] = {0.17392742256872693, 0.32607257743127307, 0.32607257743127307,
                               0.17392742256872693};
  const int m = static_cast<int>(x.size());
  const int segs = closed ? m : m - 1;
  auto idx = [&](int i) {
    if (closed) return (i % m + m) % m;
    return std::clamp(i, 0, m - 1);
  };
  auto cr = [](double t, double p0, double p1, double p2, double p3, double& v, double& d) {
    const double a = 2.0 * p1;
    const double b = p2 - p0;
    const double c = 2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3;
    const double e = -p0 + 3.0 * p1 - 3.0 * p2 + p3;
    v = 0.5 * (a + b * t + c * t * t + e * t * t * t);
    d = 0.5 * (b + 2.0 * c * t + 3.0 * e * t * t);
  };
  std::vector<double> terms;
  terms.reserve(segs * 4);
  double peak = -1e300;
  for (int i = 0; i < segs; ++i)
    for (int q = 0; q < 4; ++q) {
      double px, py, dx, dy;
      cr(gx[q], x[idx(i - 1)], x[idx(i)], x[idx(i + 1)], x[idx(i + 2)], px, dx);
      cr(gx[q], y[idx(i - 1)], y[idx(i)], y[idx(i + 1)], y[idx(i + 2)], py, dy);
      const double lt = std::log(gw[q]) + logf(px, py) + std::log(std::hypot(dx, dy));
      terms.push_back(lt);
      peak = std::max(peak, lt);
    }
  double acc = 0.0;
  for (double lt : terms) acc += std::exp(lt - peak);
  return peak + std::log(acc);
}

}  // namespace soliton

#endif
