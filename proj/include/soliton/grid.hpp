#ifndef SOLITON_GRID_HPP
#define SOLITON_GRID_HPP

#include <Eigen/Dense>
#include <cmath>

#include "soliton/errors.hpp"

namespace soliton {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Log-spaced grid in z: uniform in t = log z. All z-differentiation in the
// toolkit happens on this grid via exact chain rules, so stencils only ever
// see a uniform 1-D grid.
struct LogGrid {
  VectorXd z;      // nodes, ascending
  VectorXd t;      // log z, uniformly spaced
  double ht = 0.0; // spacing in t

  LogGrid() = default;
  LogGrid(double z_lo, double z_hi, int n) {
    if (!(z_lo > 0.0) || !(z_hi > z_lo) || n < 8)
      throw DomainError("LogGrid: need 0 < z_lo < z_hi and n >= 8");
    t.resize(n);
    z.resize(n);
    const double t0 = std::log(z_lo), t1 = std::log(z_hi);
    ht = (t1 - t0) / (n - 1);
    for (int i = 0; i < n; ++i) {
      t[i] = t0 + ht * i;
      z[i] = std::exp(t[i]);
    }
    z[0] = z_lo;
    z[n - 1] = z_hi;
  }

  int size() const { return static_cast<int>(z.size()); }

  // Index of the first node with z >= value (clamped).
  int lower_index(double value) const {
    int i = 0;
    while (i < size() - 1 && z[i] < value) ++i;
    return i;
  }
};

// 4th-order first derivative on a uniform grid (one-sided near the ends).
template <typename Derived>
VectorXd deriv1_uniform(const Eigen::MatrixBase<Derived>& f, double h) {
  const int n = static_cast<int>(f.size());
  VectorXd d(n);
  if (n < 7) throw DomainError("deriv1_uniform: grid too short");
  for (int i = 2; i < n - 2; ++i)
    d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
  // 4th-order one-sided stencils
  auto one_sided = [&](int i, int s) {
    return s * (-25.0 * f[i] + 48.0 * f[i + s] - 36.0 * f[i + 2 * s] + 16.0 * f[i + 3 * s] -
                3.0 * f[i + 4 * s]) /
           (12.0 * h);
  };
  d[0] = one_sided(0, 1);
  d[1] = one_sided(1, 1);
  d[n - 1] = one_sided(n - 1, -1);
  d[n - 2] = one_sided(n - 2, -1);
  return d;
}

// 4th-order second derivative on a uniform grid.
template <typename Derived>
VectorXd deriv2_uniform(const Eigen::MatrixBase<Derived>& f, double h) {
  const int n = static_cast<int>(f.size());
  VectorXd d(n);
  if (n < 8) throw DomainError("deriv2_uniform: grid too short");
  const double h2 = h * h;
  for (int i = 2; i < n - 2; ++i)
    d[i] = (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]) / (12.0 * h2);
  auto one_sided = [&](int i, int s) {
    return (45.0 * f[i] - 154.0 * f[i + s] + 214.0 * f[i + 2 * s] - 156.0 * f[i + 3 * s] +
            61.0 * f[i + 4 * s] - 10.0 * f[i + 5 * s]) /
           (12.0 * h2);
  };
  d[0] = one_sided(0, 1);
  d[1] = one_sided(1, 1);
  d[n - 1] = one_sided(n - 1, -1);
  d[n - 2] = one_sided(n - 2, -1);
  return d;
}

// Periodic 4th-order central first derivative.
template <typename Derived>
VectorXd deriv1_periodic(const Eigen::MatrixBase<Derived>& f, double h) {
  const int n = static_cast<int>(f.size());
  VectorXd d(n);
  for (int i = 0; i < n; ++i) {
    const int m2 = (i - 2 + n) % n, m1 = (i - 1 + n) % n, p1 = (i + 1) % n, p2 = (i + 2) % n;
    d[i] = (f[m2] - 8.0 * f[m1] + 8.0 * f[p1] - f[p2]) / (12.0 * h);
  }
  return d;
}

// Periodic 4th-order central second derivative.
template <typename Derived>
VectorXd deriv2_periodic(const Eigen::MatrixBase<Derived>& f, double h) {
  const int n = static_cast<int>(f.size());
  VectorXd d(n);
  const double h2 = h * h;
  for (int i = 0; i < n; ++i) {
    const int m2 = (i - 2 + n) % n, m1 = (i - 1 + n) % n, p1 = (i + 1) % n, p2 = (i + 2) % n;
    d[i] = (-f[m2] + 16.0 * f[m1] - 30.0 * f[i] + 16.0 * f[p1] - f[p2]) / (12.0 * h2);
  }
  return d;
}

// 8th-order periodic first derivative; used where a residual certificate must
// be computed from node positions alone.
template <typename Derived>
VectorXd deriv1_periodic8(const Eigen::MatrixBase<Derived>& f, double h) {
  const int n = static_cast<int>(f.size());
  VectorXd d(n);
  static const double c1 = 4.0 / 5.0, c2 = -1.0 / 5.0, c3 = 4.0 / 105.0, c4 = -1.0 / 280.0;
  for (int i = 0; i < n; ++i) {
    auto at = [&](int off) { return f[(i + off + 4 * n) % n]; };
    d[i] = (c1 * (at(1) - at(-1)) + c2 * (at(2) - at(-2)) + c3 * (at(3) - at(-3)) +
            c4 * (at(4) - at(-4))) /
           h;
  }
  return d;
}

template <typename Derived>
VectorXd deriv2_periodic8(const Eigen::MatrixBase<Derived>& f, double h) {
  const int n = static_cast<int>(f.size());
  VectorXd d(n);
  static const double c0 = -205.0 / 72.0, c1 = 8.0 / 5.0, c2 = -1.0 / 5.0, c3 = 8.0 / 315.0,
                      c4 = -1.0 / 560.0;
  const double h2 = h * h;
  for (int i = 0; i < n; ++i) {
    auto at = [&](int off) { return f[(i + off + 4 * n) % n]; };
    d[i] = (c0 * at(0) + c1 * (at(1) + at(-1)) + c2 * (at(2) + at(-2)) + c3 * (at(3) + at(-3)) +
            c4 * (at(4) + at(-4))) /
           h2;
  }
  return d;
}

// d/dz and d2/dz2 of a column sampled on a LogGrid (chain rule through t=log z).
inline VectorXd dz_on_loggrid(const VectorXd& f, const LogGrid& g) {
  VectorXd ft = deriv1_uniform(f, g.ht);
  return ft.array() / g.z.array();
}

inline VectorXd dzz_on_loggrid(const VectorXd& f, const LogGrid& g) {
  VectorXd ft = deriv1_uniform(f, g.ht);
  VectorXd ftt = deriv2_uniform(f, g.ht);
  return (ftt - ft).array() / (g.z.array() * g.z.array());
}

}  // namespace soliton

#endif
