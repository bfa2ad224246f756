#ifndef SOLITON_ODE_HPP
#define SOLITON_ODE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>

#include "soliton/errors.hpp"

namespace soliton::ode {

using Eigen::MatrixXd;
using Eigen::VectorXd;

using Rhs = std::function<VectorXd(double, const VectorXd&)>;

// Dormand-Prince 5(4) with PI step control. States are small (dim <= 4)
// so dynamic vectors are fine here.
class Dopri5 {
public:
  Dopri5(Rhs f, double rtol = 1e-10, double atol = 1e-12)
      : f_(std::move(f)), rtol_(rtol), atol_(atol) {}

  void set_hmax(double hmax) { hmax_ = hmax; }

  void init(double x, VectorXd y, double h0 = 0.0) {
    x_ = x;
    y_ = std::move(y);
    k1_ = f_(x_, y_);
    h_ = (h0 != 0.0) ? h0 : 1e-4;
    steps_ = 0;
  }

  double x() const { return x_; }
  const VectorXd& y() const { return y_; }
  const VectorXd& dydx() const { return k1_; }  // FSAL derivative at current state
  double suggested_h() const { return h_; }

  // One accepted step, no farther than x_limit. Returns the step actually taken.
  double step(double x_limit) {
    const double dir = (x_limit > x_) ? 1.0 : -1.0;
    double h = dir * std::min(std::abs(h_), hmax_);
    if (dir * (x_ + h) > dir * x_limit) h = x_limit - x_;
    for (int attempt = 0; attempt < 60; ++attempt) {
      if (++steps_ > 50'000'000) throw NumericError("Dopri5: step budget exhausted");
      VectorXd y5, y4;
      trial(h, y5, y4);
      double err = 0.0;
      for (int i = 0; i < y5.size(); ++i) {
        const double sc = atol_ + rtol_ * std::max(std::abs(y_[i]), std::abs(y5[i]));
        err = std::max(err, std::abs(y5[i] - y4[i]) / sc);
      }
      if (err <= 1.0 || std::abs(h) < 1e-14 * (1.0 + std::abs(x_))) {
        x_ += h;
        y_ = y5;
        k1_ = f_(x_, y_);
        const double fac = std::clamp(0.9 * std::pow(std::max(err, 1e-10), -0.2), 0.2, 5.0);
        h_ = std::min(std::abs(h) * fac, hmax_);
        return h;
      }
      h *= std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.5);
    }
    throw NumericError("Dopri5: repeated step rejection");
  }

  // March to xf exactly.
  void integrate_to(double xf) {
    while (std::abs(xf - x_) > 1e-13 * (1.0 + std::abs(xf))) step(xf);
  }

private:
  void trial(double h, VectorXd& y5, VectorXd& y4) {
    static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static const double a21 = 1.0 / 5;
    static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
    static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static const double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695, e4 = 393.0 / 640,
                        e5 = -92097.0 / 339200, e6 = 187.0 / 2100, e7 = 1.0 / 40;
    const VectorXd k2 = f_(x_ + c2 * h, y_ + h * a21 * k1_);
    const VectorXd k3 = f_(x_ + c3 * h, y_ + h * (a31 * k1_ + a32 * k2));
    const VectorXd k4 = f_(x_ + c4 * h, y_ + h * (a41 * k1_ + a42 * k2 + a43 * k3));
    const VectorXd k5 = f_(x_ + c5 * h, y_ + h * (a51 * k1_ + a52 * k2 + a53 * k3 + a54 * k4));
    const VectorXd k6 =
        f_(x_ + h, y_ + h * (a61 * k1_ + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    y5 = y_ + h * (b1 * k1_ + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const VectorXd k7 = f_(x_ + h, y5);
    y4 = y_ + h * (e1 * k1_ + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
  }

  Rhs f_;
  double rtol_, atol_;
  double hmax_ = std::numeric_limits<double>::infinity();
  double x_ = 0.0, h_ = 1e-4;
  VectorXd y_, k1_;
  long steps_ = 0;
};

// Locate a root of event(x, y) along the trajectory, assuming the event
// function changes sign somewhere in (x, x_limit). Uses step-and-bracket,
// then bisection with re-integration of the final partial step.
struct EventResult {
  double x;
  VectorXd y;
  bool found;
};

template <class Event>
EventResult integrate_until(Dopri5& solver, double x_limit, Event&& event) {
  double e_prev = event(solver.x(), solver.y());
  while (std::abs(solver.x() - x_limit) > 1e-13 * (1.0 + std::abs(x_limit))) {
    const double x_prev = solver.x();
    const VectorXd y_prev = solver.y();
    solver.step(x_limit);
    double e_cur = event(solver.x(), solver.y());
    if (e_prev != 0.0 && e_cur * e_prev < 0.0) {
      // bisect over the step by re-integrating prefixes of it
      double lo = 0.0, hi = solver.x() - x_prev;
      Dopri5 probe = solver;
      for (int it = 0; it < 90; ++it) {
        const double mid = 0.5 * (lo + hi);
        probe = solver;
        probe.init(x_prev, y_prev, mid);
        probe.integrate_to(x_prev + mid);
        const double em = event(probe.x(), probe.y());
        if (em == 0.0) break;
        if (em * e_prev < 0.0)
          hi = mid;
        else
          lo = mid;
        if (std::abs(hi - lo) < 1e-14 * (1.0 + std::abs(x_prev))) break;
      }
      return {probe.x(), probe.y(), true};
    }
    e_prev = e_cur;
  }
  return {solver.x(), solver.y(), false};
}

// 4-stage Gauss-Legendre collocation (order 8) for linear systems
//   y'(z) = M(z) y(z) + g(z).
// A-stable, so the e^{-z} branch of the modal operators poses no step
// restriction on log-spaced grids. The tableau is computed at construction
// from the Legendre Jacobi matrix rather than hardcoded digits.
class GaussIrk8 {
public:
  GaussIrk8() {
    // Golub-Welsch on [-1,1], then map to [0,1]
    Eigen::Matrix4d J = Eigen::Matrix4d::Zero();
    for (int k = 1; k < 4; ++k) {
      const double bk = k * k / (4.0 * k * k - 1.0);
      J(k - 1, k) = J(k, k - 1) = std::sqrt(bk);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(J);
    for (int i = 0; i < 4; ++i) {
      c_[i] = 0.5 * (es.eigenvalues()[i] + 1.0);
      b_[i] = es.eigenvectors()(0, i) * es.eigenvectors()(0, i);  // weights sum to 1 on [0,1]
    }
    // collocation condition: sum_j a_ij c_j^k = c_i^{k+1}/(k+1), k=0..3
    Eigen::Matrix4d V;
    for (int k = 0; k < 4; ++k)
      for (int j = 0; j < 4; ++j) V(k, j) = std::pow(c_[j], k);
    Eigen::FullPivLU<Eigen::Matrix4d> lu(V);
    for (int i = 0; i < 4; ++i) {
      Eigen::Vector4d rhs;
      for (int k = 0; k < 4; ++k) rhs[k] = std::pow(c_[i], k + 1) / (k + 1);
      a_.row(i) = lu.solve(rhs).transpose();
    }
  }

  // March over `nodes` (monotone, either direction), taking substeps so that
  // |h| <= hmax within each interval. Returns d x n matrix of states.
  template <class MFun, class GFun>
  MatrixXd solve(const VectorXd& nodes, MFun&& M, GFun&& g, const VectorXd& y0,
                 double hmax = std::numeric_limits<double>::infinity()) const {
    return solve_h(nodes, M, g, y0, [hmax](double) { return hmax; });
  }

  // Same with a position-dependent substep cap; modal solves use
  // hmax ~ z / |mu| so the polynomial branch is resolved at every scale.
  template <class MFun, class GFun, class HFun>
  MatrixXd solve_h(const VectorXd& nodes, MFun&& M, GFun&& g, const VectorXd& y0,
                   HFun&& hmax_at) const {
    const int n = static_cast<int>(nodes.size());
    const int d = static_cast<int>(y0.size());
    MatrixXd out(d, n);
    VectorXd y = y0;
    out.col(0) = y;
    for (int k = 0; k + 1 < n; ++k) {
      const double span = nodes[k + 1] - nodes[k];
      const double hm = std::max(hmax_at(std::min(nodes[k], nodes[k + 1])), 1e-8);
      const int nsub = std::max(1, static_cast<int>(std::ceil(std::abs(span) / hm)));
      const double h = span / nsub;
      double z = nodes[k];
      for (int s = 0; s < nsub; ++s) {
        y = step(z, h, y, M, g);
        z += h;
      }
      out.col(k + 1) = y;
    }
    return out;
  }

  template <class MFun, class GFun>
  VectorXd step(double z, double h, const VectorXd& y, MFun&& M, GFun&& g) const {
    const int d = static_cast<int>(y.size());
    MatrixXd A = MatrixXd::Identity(4 * d, 4 * d);
    VectorXd rhs(4 * d);
    MatrixXd Mi[4];
    for (int i = 0; i < 4; ++i) {
      const double zi = z + c_[i] * h;
      Mi[i] = M(zi);
      rhs.segment(i * d, d) = Mi[i] * y + g(zi);
      for (int j = 0; j < 4; ++j) A.block(i * d, j * d, d, d) -= (h * a_(i, j)) * Mi[i];
    }
    const VectorXd K = Eigen::PartialPivLU<MatrixXd>(A).solve(rhs);
    VectorXd ynext = y;
    for (int i = 0; i < 4; ++i) ynext += (h * b_[i]) * K.segment(i * d, d);
    return ynext;
  }

  const double* nodes01() const { return c_; }
  const double* weights01() const { return b_; }

private:
  double c_[4], b_[4];
  Eigen::Matrix4d a_;
};

}  // namespace soliton::ode

#endif
