#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "soliton/modal_ode.hpp"
#include "soliton/ode.hpp"

using namespace soliton;

namespace {

// independent oracle: adaptive explicit IVP integration of L_mu u = f
Eigen::VectorXd ivp_oracle(double mu, double z0, const Eigen::VectorXd& targets,
                           const std::function<double(double)>& f, double u0, double du0) {
  ode::Dopri5 ivp(
      [&](double z, const Eigen::VectorXd& y) {
        Eigen::VectorXd d(2);
        d << y[1], (f ? f(z) : 0.0) - y[1] + mu / z * y[0];
        return d;
      },
      1e-12, 1e-14);
  Eigen::VectorXd y0(2);
  y0 << u0, du0;
  ivp.init(z0, y0, 1e-4);
  Eigen::VectorXd out(targets.size());
  for (int i = 0; i < targets.size(); ++i) {
    ivp.integrate_to(targets[i]);
    out[i] = ivp.y()[0];
  }
  return out;
}

}  // namespace

TEST_CASE("discrete stencil reproduces L_mu z^alpha") {
  // L_mu z^a = z^{a-1} (a - mu + a(a-1)/z)
  LogGrid g(20.0, 2000.0, 600);
  for (double mu : {-1.5, 0.0, 2.0}) {
    for (double alpha : {-1.0, 0.5, 1.7}) {
      Eigen::VectorXd u(g.size());
      for (int i = 0; i < g.size(); ++i) u[i] = std::pow(g.z[i], alpha);
      const Eigen::VectorXd Lu = modal_apply(mu, u, g);
      double worst = 0.0;
      for (int i = 4; i < g.size() - 4; ++i) {
        const double z = g.z[i];
        const double exact = std::pow(z, alpha - 1.0) * (alpha - mu + alpha * (alpha - 1.0) / z);
        worst = std::max(worst, std::abs(Lu[i] - exact) / (1e-12 + std::abs(exact)));
      }
      CHECK(worst < 1e-8);
    }
  }
}

TEST_CASE("homogeneous polynomial branch") {
  // mu = 0: b == 1 exactly
  auto b0 = solve_homogeneous_poly(0.0, 5.0, 1e4);
  CHECK((b0.values.array() - 1.0).abs().maxCoeff() < 1e-12);

  // two-sided barrier bound for the acceptance mu-set
  for (double mu : {-2.0, -1.0, -0.5, 0.0, 1.0, 3.0}) {
    const double th = homogeneous_threshold(mu);
    auto b = solve_homogeneous_poly(mu, th, 1e4);
    for (int i = 0; i < b.grid.size(); ++i) {
      const double dev = std::abs(b.values[i] / std::pow(b.grid.z[i], mu) - 1.0);
      CHECK(dev <= 1.0 / std::sqrt(b.grid.z[i]) + 1e-12);
    }
    CHECK(b.residual < 1e-6);
  }

  // mu = -1 on [50, 5000] specifically
  auto bm = solve_homogeneous_poly(-1.0, 50.0, 5000.0);
  for (int i = 0; i < bm.grid.size(); ++i)
    CHECK(std::abs(bm.values[i] * bm.grid.z[i] - 1.0) <= std::pow(bm.grid.z[i], -0.5) + 1e-12);

  // mu = 1: b(z)/z -> 1, checked at z = 1e4 against the IVP oracle
  auto b1 = solve_homogeneous_poly(1.0, homogeneous_threshold(1.0), 1e4);
  CHECK(std::abs(b1.values[b1.grid.size() - 1] / 1e4 - 1.0) < 2e-2);
  Eigen::VectorXd tg(1);
  tg << 1e4;
  const auto orc =
      ivp_oracle(1.0, b1.grid.z[0], tg, nullptr, b1.values[0], b1.derivs[0]);
  CHECK(std::abs(orc[0] - b1.values[b1.grid.size() - 1]) /
            std::abs(orc[0]) < 1e-8);

  CHECK_THROWS_AS(solve_homogeneous_poly(3.0, 5.0, 1e4), DomainError);  // below threshold
}

TEST_CASE("fast decay branch") {
  // mu = 0: w = e^{z0 - z} exactly
  auto w0 = solve_fast_decay(0.0, 100.0, 1100.0);
  for (int i = 0; i < w0.grid.size(); ++i)
    CHECK(std::abs(w0.log_values[i] - (100.0 - w0.grid.z[i])) < 1e-9);

  // mu = -1: paper envelope with (-mu)^+ = 1
  auto wm = solve_fast_decay(-1.0, 100.0, 1100.0);
  for (int i = 0; i < wm.grid.size(); ++i) {
    const double envlog = (100.0 - wm.grid.z[i]) + 2.0 * std::log(wm.grid.z[i] / 100.0);
    CHECK(wm.log_values[i] <= envlog + 1e-10);
  }
  CHECK(wm.values[0] == doctest::Approx(1.0));

  // mu = 2: |w'(z0)| <= 4
  auto w2 = solve_fast_decay(2.0, 100.0, 1100.0);
  CHECK(std::abs(w2.derivs[0]) <= 4.0);

  CHECK_THROWS_AS(solve_fast_decay(0.0, 100.0, 105.0), DomainError);  // range too short
}

TEST_CASE("inhomogeneous solves") {
  auto f = [](double z) { return 1.0 / z; };

  // f = 0, c0 = 0: u = 0 by uniqueness
  auto uz = solve_inhomogeneous(-1.0, 0.0, 60.0, 6000.0, [](double) { return 0.0; });
  CHECK(uz.values.cwiseAbs().maxCoeff() < 1e-12);

  // mu > alpha + 1: the norm bound 2/(mu - alpha - 1)
  auto u = solve_inhomogeneous(2.0, 0.0, 60.0, 6000.0, f);
  const auto nu = weighted_norm_samples(u.values, u.grid, 60.0, 1.0, false);
  LogGrid fg(60.0, 6000.0, 400);
  Eigen::VectorXd fv(fg.size());
  for (int i = 0; i < fg.size(); ++i) fv[i] = f(fg.z[i]);
  const auto nf = weighted_norm_samples(fv, fg, 60.0, 0.0, false);
  CHECK(nu.value <= 2.0 * nf.value);

  // linearity in f for the decay-class branch
  auto u1 = solve_inhomogeneous(2.0, 0.0, 60.0, 6000.0, [](double z) { return 1.0 / z; });
  auto u2 = solve_inhomogeneous(2.0, 0.0, 60.0, 6000.0,
                                [](double z) { return std::sin(z / 40.0) / z; });
  auto u12 = solve_inhomogeneous(2.0, 0.0, 60.0, 6000.0,
                                 [](double z) { return (1.0 + std::sin(z / 40.0)) / z; });
  CHECK((u12.values - u1.values - u2.values).cwiseAbs().maxCoeff() < 1e-9);

  // mu < alpha + 1 with prescribed slope, against the IVP oracle
  InhomogeneousBc bc;
  bc.c0 = 1.0;
  auto um = solve_inhomogeneous(-1.0, 0.0, 60.0, 6000.0, f, bc);
  Eigen::VectorXd targets(7);
  for (int i = 0; i < 7; ++i) targets[i] = um.grid.z[(i + 1) * um.grid.size() / 8];
  const auto orc = ivp_oracle(-1.0, 60.0, targets, f, 0.0, 1.0);
  for (int i = 0; i < 7; ++i) {
    const double mine = um.values[(i + 1) * um.grid.size() / 8];
    CHECK(std::abs(mine - orc[i]) / (1e-12 + std::abs(orc[i])) < 1e-6);
  }

  CHECK_THROWS_AS(solve_inhomogeneous(1.0, 0.0, 60.0, 600.0, f), DomainError);  // resonance
  CHECK_THROWS_AS(solve_inhomogeneous(2.0, 0.0, 2.0, 600.0, f), DomainError);   // z0 too small
}

TEST_CASE("uniqueness under far-anchor changes") {
  auto f = [](double z) { return std::exp(-z / 300.0) / z; };
  auto ua = solve_inhomogeneous(2.0, 0.0, 60.0, 4000.0, f);
  auto ub = solve_inhomogeneous(2.0, 0.0, 60.0, 9000.0, f);
  ModalGridFn interp(ub.grid, ub.values);
  double worst = 0.0;
  for (int i = 8; i < ua.grid.size() - 8; ++i)
    worst = std::max(worst, std::abs(ua.values[i] - interp(ua.grid.z[i])));
  CHECK(worst < 1e-7);
}

TEST_CASE("weighted norm closed forms and signals") {
  LogGrid g(50.0, 50000.0, 900);
  // u = z^beta with beta < alpha: closed form z0^{beta-alpha}/sqrt(2(alpha-beta))
  const double beta = -1.2, alpha = -0.3;
  Eigen::VectorXd u(g.size());
  for (int i = 0; i < g.size(); ++i) u[i] = std::pow(g.z[i], beta);
  const auto r = weighted_norm_samples(u, g, 50.0, alpha, false);
  const double closed = std::pow(50.0, beta - alpha) / std::sqrt(2.0 * (alpha - beta));
  CHECK(r.finite);
  CHECK(r.value == doctest::Approx(closed).epsilon(1e-6));

  // u = z^alpha: borderline divergence, signaled not thrown
  for (int i = 0; i < g.size(); ++i) u[i] = std::pow(g.z[i], alpha);
  const auto rd = weighted_norm_samples(u, g, 50.0, alpha, false);
  CHECK_FALSE(rd.finite);

  // fast-decay branch: finite for any alpha
  auto w = solve_fast_decay(1.0, 50.0, 1000.0);
  CHECK(weighted_norm(w, -3.0).finite);
  CHECK(weighted_norm(w, 3.0).finite);
}
