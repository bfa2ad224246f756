#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "soliton/spectrum.hpp"

using namespace soliton;

TEST_CASE("circle spectrum is k^2/2 - 1") {
  auto C = make_round_sphere(2);
  SpectrumOptions opt;
  opt.grid_nodes = 256;
  auto spec = compute_spectrum(C, opt);
  CHECK(spec.index_I == 3);
  CHECK(spec.mu1 == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(spec.mu_minus == doctest::Approx(-0.5).epsilon(1e-12));
  // merged list: -1, -1/2 x2, 1 x2, 7/2 x2, ...
  const double expect[] = {-1.0, -0.5, -0.5, 1.0, 1.0, 3.5, 3.5, 7.0, 7.0};
  for (int j = 0; j < 9; ++j) CHECK(spec.modes[j].mu == doctest::Approx(expect[j]).epsilon(1e-12));
}

TEST_CASE("sphere blocks: -1 in k=0, translations at -1/2") {
  auto S3 = make_round_sphere(3);
  SpectrumOptions opt;
  opt.k_max = 4;
  opt.grid_nodes = 400;
  auto fam = assemble_jacobi(S3, opt.k_max, opt);
  CHECK(fam.sup_asymmetry < 1e-10);
  auto spec = eigensolve(fam, 32);
  CHECK(spec.modes[0].mu == doctest::Approx(-1.0).epsilon(1e-10));
  CHECK(spec.modes[0].fourier_k == 0);
  for (int j = 1; j <= 3; ++j) CHECK(spec.modes[j].mu == doctest::Approx(-0.5).epsilon(1e-4));
  CHECK(spec.index_I == 4);  // n + 1 for the round sphere
}

TEST_CASE("sphere eigenvalue convergence order under grid doubling") {
  auto S3 = make_round_sphere(3);
  double errs[3];
  int Ms[3] = {64, 128, 256};
  for (int k = 0; k < 3; ++k) {
    SpectrumOptions opt;
    opt.k_max = 2;
    opt.grid_nodes = Ms[k];
    auto spec = compute_spectrum(S3, opt);
    // l = 2 eigenvalue of the k=0 block: l(l+1)/4 - 1 = 1/2
    double found = 1e300;
    for (const auto& md : spec.modes)
      if (md.fourier_k == 0 && std::abs(md.mu - 0.5) < std::abs(found - 0.5)) found = md.mu;
    errs[k] = std::abs(found - 0.5);
  }
  const double order = std::log2(errs[0] / errs[1]);
  const double order2 = std::log2(errs[1] / errs[2]);
  CHECK(order >= 1.8);
  CHECK(order2 >= 1.8);
}

TEST_CASE("torus spectrum: universal eigenvalues, index, Perron") {
  auto T = shoot_angenent_torus(3);
  SpectrumOptions opt;
  opt.k_max = 8;
  auto fam = assemble_jacobi(T, opt.k_max, opt);
  CHECK(fam.sup_asymmetry < 1e-10);
  auto spec = eigensolve(fam, 96);

  // -1 and -1/2 within 1e-3 (here far better)
  double best1 = 1e300, besth = 1e300;
  int j1 = -1;
  for (size_t j = 0; j < spec.modes.size(); ++j) {
    if (std::abs(spec.modes[j].mu + 1.0) < best1 && spec.modes[j].fourier_k == 0) {
      best1 = std::abs(spec.modes[j].mu + 1.0);
      j1 = static_cast<int>(j);
    }
    besth = std::min(besth, std::abs(spec.modes[j].mu + 0.5));
  }
  CHECK(best1 < 1e-3);
  CHECK(besth < 1e-3);
  CHECK(spec.index_I >= 5);  // n + 2 for non-spheres
  CHECK(spec.mu1 <= -1.0);
  CHECK(spec.mu_minus >= -0.5 - 1e-6);
  CHECK(spec.mu_minus < 0.0);

  // the -1 eigenfunction is the mean curvature
  const VectorXd& psi = spec.modes[j1].profile_fn;
  const VectorXd& H = T.prof.H;
  const double num = (psi.array() * H.array() * spec.weights.array()).sum();
  const double den = std::sqrt((H.array().square() * spec.weights.array()).sum());
  CHECK(std::abs(num) / den >= 0.999);

  // Perron property
  CHECK(spec.psi1.minCoeff() > 0.0);

  // Gram identity
  double gram = 0.0;
  for (int a = 0; a < 12; ++a)
    for (int b = a; b < 12; ++b) {
      if (spec.modes[a].fourier_k != spec.modes[b].fourier_k ||
          spec.modes[a].parity != spec.modes[b].parity)
        continue;
      const double ip = (spec.modes[a].profile_fn.array() * spec.modes[b].profile_fn.array() *
                         spec.weights.array())
                            .sum();
      gram = std::max(gram, std::abs(ip - (a == b ? 1.0 : 0.0)));
    }
  CHECK(gram < 1e-8);
}

TEST_CASE("projection below a spectral level") {
  auto C = make_round_sphere(2);
  SpectrumOptions opt;
  opt.grid_nodes = 128;
  auto spec = compute_spectrum(C, opt);

  // gamma below mu1: nothing to project onto
  CHECK(project_below(spec, -2.0, spec.psi1).size() == 0);

  // phi = psi1 at gamma = 0: coefficients (1, 0, 0)
  VectorXd c = project_below(spec, 0.0, spec.psi1);
  REQUIRE(c.size() == 3);
  CHECK(c[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(c[1]) < 1e-12);
  CHECK(std::abs(c[2]) < 1e-12);

  // phi = psi1 + psi_last
  VectorXd phi = spec.psi1 + spec.modes.back().profile_fn;
  c = project_below(spec, 0.0, phi);
  CHECK(c[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(c[1]) < 1e-12);

  // near-eigenvalue gamma
  CHECK_THROWS_AS(project_below(spec, -0.5 + 1e-5, phi), HypothesisError);
}

TEST_CASE("resolution guard") {
  auto C = make_round_sphere(2);
  SpectrumOptions opt;
  opt.grid_nodes = 8;
  CHECK_THROWS_AS(assemble_jacobi(C, 4, opt), DomainError);
}
