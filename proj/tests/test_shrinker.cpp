#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "soliton/shrinker.hpp"

using namespace soliton;

TEST_CASE("round sphere closed forms") {
  auto C = make_round_sphere(2);
  CHECK(C.radius == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  auto p = C.profile(128);
  for (int i = 0; i < p.size(); ++i) {
    CHECK(p.H[i] == doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-12));
    CHECK(p.Xnu[i] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  }
  auto S3 = make_round_sphere(3);
  CHECK(S3.radius == doctest::Approx(2.0));
  CHECK(S3.profile(64).H[10] == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(make_round_sphere(1), DomainError);
}

TEST_CASE("gaussian area closed forms") {
  // circle: sqrt(2 pi) e^{-1/2}; sphere in R^3: 4/e
  auto C = make_round_sphere(2);
  const double FC = gaussian_area(C);
  CHECK(FC == doctest::Approx(std::sqrt(2.0 * M_PI) * std::exp(-0.5)).epsilon(1e-10));
  auto S3 = make_round_sphere(3);
  CHECK(gaussian_area(S3) == doctest::Approx(4.0 / std::exp(1.0)).epsilon(1e-10));
}

TEST_CASE("angenent torus shooting") {
  auto T = shoot_angenent_torus(3);
  CHECK(T.residual_achieved < 1e-8);
  CHECK(T.inner_intercept > 0.0);
  CHECK(T.outer_intercept < 8.0);
  // kappa_bar: cylinder radius below the inner intercept stays positive
  CHECK(0.9 * T.inner_intercept > 0.0);

  // reflection symmetry of the full (unmirrored) loop
  const auto& p = T.prof;
  const int m = p.size();
  double sym = 0.0;
  for (int i = 1; i < m; ++i)
    sym = std::max(sym, std::hypot(p.w[i] - p.w[m - i], p.y[i] + p.y[m - i]));
  CHECK(sym < 1e-11);

  // entropy ordering against the sphere
  CHECK(gaussian_area(T) > gaussian_area(make_round_sphere(3)));

  CHECK_THROWS_AS(shoot_angenent_torus(2), DomainError);
  ShootingConfig bad;
  bad.bracket_lo = 3.5;  // entirely outside the closed orbit
  bad.bracket_hi = 4.0;
  CHECK_THROWS_AS(shoot_angenent_torus(3, bad), NumericError);
}

TEST_CASE("gaussian area refinement order on the torus") {
  // node-count refinement of the profile quadrature (cubic reconstruction)
  double F[3];
  int Ms[3] = {48, 96, 192};
  for (int k = 0; k < 3; ++k) {
    ShootingConfig cfg;
    cfg.nodes = Ms[k];
    F[k] = gaussian_area(shoot_angenent_torus(3, cfg));
  }
  const double d1 = std::abs(F[0] - F[1]);
  const double d2 = std::abs(F[1] - F[2]);
  const double order = std::log2(d1 / d2);
  CHECK(order >= 1.8);
}

TEST_CASE("entropy estimate and violations") {
  auto C = make_round_sphere(2);
  const auto rep = entropy_estimate(C);
  CHECK(rep.grid_max <= rep.gaussian_area + 1e-8);
  CHECK(rep.gaussian_area == doctest::Approx(std::sqrt(2.0 * M_PI) * std::exp(-0.5)));

  // a translated circle is not a shrinker: the recentering sweep beats F
  auto bad = translated_along_axis(C, 0.7);
  CHECK(bad.residual_achieved > bad.residual_tol);
  CHECK_THROWS_AS(entropy_estimate(bad), HypothesisError);                 // residual gate
  CHECK_THROWS_AS(entropy_estimate(bad, false), HypothesisError);          // sweep gate

  auto T = shoot_angenent_torus(3);
  const auto rt = entropy_estimate(T);
  CHECK(rt.best_x0 == doctest::Approx(0.0));
  CHECK(rt.best_y0 == doctest::Approx(0.0));
  CHECK(rt.best_t0 == doctest::Approx(1.0));
  CHECK(rt.gaussian_area == doctest::Approx(1.85122).epsilon(2e-4));
}

TEST_CASE("position-only residual certificate is independent") {
  auto T = shoot_angenent_torus(3);
  ProfileGeometry p = T.prof;
  // corrupt the cached analytic fields; the certificate must not notice
  p.H.setZero();
  p.Xnu.setZero();
  CHECK(shrinker_residual_from_positions(p, 3) == doctest::Approx(T.residual_achieved));
  // but corrupting positions must show up
  p.w[10] += 1e-4;
  CHECK(shrinker_residual_from_positions(p, 3) > 1e-4);
}
