#include "soliton/modal_ode.hpp"

#include <cmath>

#include "soliton/errors.hpp"
#include "soliton/ode.hpp"
#include "soliton/spline.hpp"

namespace soliton {

namespace {

// asymptotic series b = z^mu sum_j a_j z^{-j}, a_{j+1} = a_j (mu-j)(mu-j-1)/(j+1);
// truncated where the (divergent) terms stop shrinking
void series_ic(double mu, double z, double& b, double& bp) {
  constexpr int kTerms = 7;
  double a[kTerms];
  a[0] = 1.0;
  for (int j = 0; j + 1 < kTerms; ++j) a[j + 1] = a[j] * (mu - j) * (mu - j - 1) / (j + 1);
  b = 0.0;
  bp = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (int j = 0; j < kTerms; ++j) {
    const double term = a[j] * std::pow(z, mu - j);
    if (std::abs(term) > prev) break;
    prev = std::abs(term);
    b += term;
    bp += a[j] * (mu - j) * std::pow(z, mu - j - 1);
  }
}

Eigen::Matrix2d modal_matrix(double mu, double z) {
  Eigen::Matrix2d M;
  M << 0.0, 1.0, mu / z, -1.0;
  return M;
}

double interior_residual(double mu, const VectorXd& u, const LogGrid& g,
                         const std::function<double(double)>& f) {
  const VectorXd Lu = modal_apply(mu, u, g);
  double worst = 0.0;
  const int n = g.size();
  for (int i = 4; i < n - 4; ++i) {
    const double fv = f ? f(g.z[i]) : 0.0;
    const double scale = 1.0 + std::abs(fv) + std::abs(mu * u[i] / g.z[i]);
    worst = std::max(worst, std::abs(Lu[i] - fv) / scale);
  }
  return worst;
}

int grid_points(double z_lo, double z_hi, int ppd) {
  const double decades = std::log10(z_hi / z_lo);
  return std::max(64, static_cast<int>(std::ceil(decades * ppd)) + 1);
}

// The e^{-z} transient excited at the left endpoint needs dz <~ 0.1 to be
// representable on the output grid; on a log grid this only binds when the
// left endpoint is large.
int layer_resolving_ppd(double z_lo, int ppd) {
  const int need = static_cast<int>(std::ceil(z_lo * std::log(10.0) / 0.1));
  return std::min(std::max(ppd, need), 2400);
}

// Backward Riccati sweep of the decaying branch: returns (r, log w) at grid
// nodes, integrating r' = -(r^2 + r - mu/z), (log w)' = r from a padded anchor.
void riccati_backward(double mu, const LogGrid& g, VectorXd& r_out, VectorXd& logw_out) {
  const int n = g.size();
  r_out.resize(n);
  logw_out.resize(n);
  auto rhs = [mu](double z, double r) { return -(r * r + r - mu / z); };
  const double pad = 40.0;
  double z = g.z[n - 1] + pad;
  double r = -1.0 - mu / z + (mu * mu + mu) / (z * z);
  double lw = 0.0;  // log w up to an additive constant
  auto rk4 = [&](double h) {
    const double k1 = rhs(z, r);
    const double k2 = rhs(z + 0.5 * h, r + 0.5 * h * k1);
    const double k3 = rhs(z + 0.5 * h, r + 0.5 * h * k2);
    const double k4 = rhs(z + h, r + h * k3);
    const double l1 = r, l2 = r + 0.5 * h * k1, l3 = r + 0.5 * h * k2, l4 = r + h * k3;
    r += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    lw += h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
    z += h;
  };
  auto march_to = [&](double target) {
    const double span = target - z;
    const int nsub = std::max(1, static_cast<int>(std::ceil(std::abs(span) / 0.125)));
    const double h = span / nsub;
    for (int s = 0; s < nsub; ++s) rk4(h);
    z = target;
  };
  for (int i = n - 1; i >= 0; --i) {
    march_to(g.z[i]);
    r_out[i] = r;
    logw_out[i] = lw;
  }
  // normalize w(z0) = 1 at the first node
  const double l0 = logw_out[0];
  logw_out.array() -= l0;
}

}  // namespace

double homogeneous_threshold(double mu) {
  const double A = std::abs(mu * (mu - 1.0));
  const double B = (2.0 * mu - 1.0) * (2.0 * mu - 3.0);
  // -x/2 + A + B/(4x) <= 0  for x = sqrt(z):  x >= A + sqrt(A^2 + B/2)
  const double disc = std::max(A * A + 0.5 * B, 0.0);
  const double x = A + std::sqrt(disc);
  return std::max(x * x, 5.0);
}

double fast_decay_threshold(double mu) {
  if (mu <= 0.0) {
    // barriers e^{-z+z0}(z/z0)^{-mu±1}: L a_+ <= 0 needs z >= mu(mu-1) ( = |mu|(|mu|+1) )
    return std::max({5.0, mu * (mu - 1.0), -(mu + 1.0) * (mu + 2.0)});
  }
  return 5.0;  // for mu > 0 the pair e^{-z+z0}, e^{-z+z0}(z/z0)^{-mu} works for all z >= 5
}

VectorXd modal_apply(double mu, const VectorXd& u, const LogGrid& g) {
  const VectorXd uz = dz_on_loggrid(u, g);
  const VectorXd uzz = dzz_on_loggrid(u, g);
  return uzz + uz - (mu * u.array() / g.z.array()).matrix();
}

ModalSolution solve_homogeneous_poly(double mu, double z_lo, double z_hi, int ppd) {
  const double thresh = homogeneous_threshold(mu);
  if (z_lo < thresh)
    throw DomainError("solve_homogeneous_poly: range starts below the barrier threshold " +
                      std::to_string(thresh));
  if (!(z_hi > z_lo * 1.5)) throw DomainError("solve_homogeneous_poly: range too short");

  ModalSolution sol;
  sol.mu = mu;
  sol.z0 = z_lo;
  sol.kind = ModalKind::HomogeneousPoly;
  sol.grid = LogGrid(z_lo, z_hi, grid_points(z_lo, z_hi, ppd));

  // The e^{-z} branch dies off in forward z, so a forward sweep from the
  // series seed lands on the polynomial branch; renormalize against the
  // series at the far anchor where it is sharpest.
  double b0, bp0;
  series_ic(mu, z_lo, b0, bp0);
  VectorXd y0(2);
  y0 << b0, bp0;
  ode::GaussIrk8 irk;
  auto M = [mu](double z) { return modal_matrix(mu, z); };
  auto gz = [](double) { return Eigen::Vector2d::Zero().eval(); };
  const double hmax = 0.35 / std::max(1.0, std::abs(mu));
  const Eigen::MatrixXd path = irk.solve(sol.grid.z, M, gz, y0, hmax);

  double bh, bph;
  series_ic(mu, z_hi, bh, bph);
  const double c = bh / path(0, sol.grid.size() - 1);
  sol.values = c * path.row(0).transpose();
  sol.derivs = c * path.row(1).transpose();
  sol.residual = interior_residual(mu, sol.values, sol.grid, nullptr);
  return sol;
}

ModalSolution solve_fast_decay(double mu, double z0, double z_hi, int ppd) {
  const double thresh = fast_decay_threshold(mu);
  if (z0 < thresh)
    throw DomainError("solve_fast_decay: z0 below the barrier threshold " +
                      std::to_string(thresh));
  if (z_hi - z0 < 10.0)
    throw DomainError("solve_fast_decay: need z_hi - z0 >= 10 for branch separation");

  ModalSolution sol;
  sol.mu = mu;
  sol.z0 = z0;
  sol.kind = ModalKind::FastDecay;
  sol.grid = LogGrid(z0, z_hi, grid_points(z0, z_hi, ppd));

  VectorXd r, lw;
  riccati_backward(mu, sol.grid, r, lw);
  sol.has_log = true;
  sol.log_values = lw;
  const int n = sol.grid.size();
  sol.values.resize(n);
  sol.derivs.resize(n);
  for (int i = 0; i < n; ++i) {
    sol.values[i] = std::exp(lw[i]);  // underflows to 0 harmlessly far out
    sol.derivs[i] = r[i] * sol.values[i];
  }
  // Riccati residual is the well-scaled certificate here
  const VectorXd rz = dz_on_loggrid(r, sol.grid);
  double worst = 0.0;
  for (int i = 4; i < n - 4; ++i) {
    const double res = rz[i] + r[i] * r[i] + r[i] - mu / sol.grid.z[i];
    worst = std::max(worst, std::abs(res) / (1.0 + std::abs(mu / sol.grid.z[i])));
  }
  sol.residual = worst;
  return sol;
}

ModalSolution solve_inhomogeneous(double mu, double alpha, double z0, double z_hi,
                                  const std::function<double(double)>& f,
                                  const InhomogeneousBc& bc, int ppd) {
  if (std::abs(alpha - (mu - 1.0)) < 1e-12)
    throw DomainError("solve_inhomogeneous: resonance alpha = mu - 1");
  const double hyp = std::abs((2.0 * alpha + 2.0) * (2.0 * alpha + 3.0)) /
                     std::abs(alpha + 1.0 - mu);
  const double thresh = std::max(homogeneous_threshold(std::min(std::abs(mu), 2.0)), hyp);
  if (z0 < thresh)
    throw DomainError("solve_inhomogeneous: z0 below hypothesis threshold " +
                      std::to_string(thresh));

  ModalSolution sol;
  sol.mu = mu;
  sol.z0 = z0;
  sol.kind = ModalKind::Inhomogeneous;
  sol.grid = LogGrid(z0, z_hi, grid_points(z0, z_hi, layer_resolving_ppd(z0, ppd)));
  const int n = sol.grid.size();

  ode::GaussIrk8 irk;
  const double hmax = 0.35 / std::max(1.0, std::abs(mu));

  if (mu > alpha + 1.0) {
    // decay-class solution by variation of parameters on the (b, w) basis;
    // all exponentials enter through ratios, assembled in log form.
    double b0, bp0;
    series_ic(mu, z0, b0, bp0);
    VectorXd yb(2);
    yb << b0, bp0;
    auto M = [mu](double z) { return modal_matrix(mu, z); };
    auto zero2 = [](double) { return Eigen::Vector2d::Zero().eval(); };
    const Eigen::MatrixXd bpath = irk.solve(sol.grid.z, M, zero2, yb, hmax);
    VectorXd r, lw;
    riccati_backward(mu, sol.grid, r, lw);
    const double W0 = bpath(0, 0) * r[0] - bpath(1, 0);  // Wronskian at z0, w(z0)=1
    if (std::abs(W0) < 1e-200) throw NumericError("solve_inhomogeneous: degenerate basis");

    ModalGridFn bfun(sol.grid, bpath.row(0).transpose());
    ModalGridFn bpfun(sol.grid, bpath.row(1).transpose());
    ModalGridFn rfun(sol.grid, r);
    ModalGridFn lwfun(sol.grid, lw);
    const double zin = z0;

    // I(z) = w(z) int_{z0}^z b f / W ds   solves I' = r I + (b w / W) f
    auto MI = [&](double z) {
      Eigen::Matrix<double, 1, 1> m;
      m(0, 0) = rfun(z);
      return m;
    };
    auto gI = [&](double z) {
      Eigen::Matrix<double, 1, 1> v;
      v(0, 0) = bfun(z) * std::exp(lwfun(z) + (z - zin)) * f(z) / W0;
      return v;
    };
    const Eigen::MatrixXd Ipath =
        irk.solve(sol.grid.z, MI, gI, VectorXd::Zero(1), 0.35);

    // K(z) = b(z) int_z^{z_hi} w f / W ds  solves K' = (b'/b) K - (b w / W) f
    auto MK = [&](double z) {
      Eigen::Matrix<double, 1, 1> m;
      m(0, 0) = bpfun(z) / bfun(z);
      return m;
    };
    auto gK = [&](double z) {
      Eigen::Matrix<double, 1, 1> v;
      v(0, 0) = -bfun(z) * std::exp(lwfun(z) + (z - zin)) * f(z) / W0;
      return v;
    };
    VectorXd nodes_rev(n);
    for (int i = 0; i < n; ++i) nodes_rev[i] = sol.grid.z[n - 1 - i];
    const Eigen::MatrixXd Krev = irk.solve(nodes_rev, MK, gK, VectorXd::Zero(1), hmax);

    sol.values.resize(n);
    for (int i = 0; i < n; ++i) sol.values[i] = Ipath(0, i) + Krev(0, n - 1 - i);
    const double cw = -sol.values[0];  // enforce u(z0) = 0 with the fast branch
    for (int i = 0; i < n; ++i) sol.values[i] += cw * std::exp(lw[i]);
    sol.derivs = dz_on_loggrid(sol.values, sol.grid);
  } else {
    // mu < alpha + 1: explicit double-integral representation on the b branch,
    // evaluated through its equivalent first-order system:
    //   A~' = -A~ + f b,   g' = b^{-2} (A~ + c0 b(z0) e^{z0 - z}),   u = b g.
    double b0, bp0;
    series_ic(mu, z0, b0, bp0);
    VectorXd yb(2);
    yb << b0, bp0;
    auto M = [mu](double z) { return modal_matrix(mu, z); };
    auto zero2 = [](double) { return Eigen::Vector2d::Zero().eval(); };
    const Eigen::MatrixXd bpath = irk.solve(sol.grid.z, M, zero2, yb, hmax);
    ModalGridFn bfun(sol.grid, bpath.row(0).transpose());

    auto MA = [](double) {
      Eigen::Matrix<double, 1, 1> m;
      m(0, 0) = -1.0;
      return m;
    };
    auto gA = [&](double z) {
      Eigen::Matrix<double, 1, 1> v;
      v(0, 0) = f(z) * bfun(z);
      return v;
    };
    const Eigen::MatrixXd Apath = irk.solve(sol.grid.z, MA, gA, VectorXd::Zero(1), 0.35);
    ModalGridFn Afun(sol.grid, Apath.row(0).transpose());

    const double c0term = bc.c0 * b0;
    auto Mg = [](double) { return Eigen::Matrix<double, 1, 1>::Zero().eval(); };
    auto gg = [&](double z) {
      Eigen::Matrix<double, 1, 1> v;
      const double b = bfun(z);
      v(0, 0) = (Afun(z) + c0term * std::exp(z0 - z)) / (b * b);
      return v;
    };
    const Eigen::MatrixXd gpath = irk.solve(sol.grid.z, Mg, gg, VectorXd::Zero(1), hmax);
    sol.values.resize(n);
    for (int i = 0; i < n; ++i) sol.values[i] = bpath(0, i) * gpath(0, i);
    sol.derivs = dz_on_loggrid(sol.values, sol.grid);
  }

  sol.residual = interior_residual(mu, sol.values, sol.grid, f);
  return sol;
}

WeightedNormResult weighted_norm_samples(const VectorXd& u, const LogGrid& grid, double z0,
                                         double alpha, bool exponential_tail) {
  const int n = grid.size();
  int i0 = grid.lower_index(z0);
  WeightedNormResult out;
  // integral of u^2 z^{-2 alpha - 1} dz = integral u^2 e^{-2 alpha t} dt
  VectorXd integrand(n - i0);
  for (int i = i0; i < n; ++i)
    integrand[i - i0] = u[i] * u[i] * std::exp(-2.0 * alpha * grid.t[i]);
  const double core = integrate_cubic_uniform(integrand, grid.ht);

  // fitted tail exponent over the last decade
  double tail = 0.0;
  if (!exponential_tail) {
    const double t_hi = grid.t[n - 1];
    int j0 = n - 1;
    while (j0 > i0 && grid.t[j0] > t_hi - std::log(10.0)) --j0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (int j = j0; j < n; ++j) {
      const double a = std::abs(u[j]);
      if (a < 1e-280) continue;
      const double X = grid.t[j], Y = std::log(a);
      sx += X;
      sy += Y;
      sxx += X * X;
      sxy += X * Y;
      ++cnt;
    }
    if (cnt >= 4) {
      const double beta = (cnt * sxy - sx * sy) / std::max(cnt * sxx - sx * sx, 1e-300);
      out.tail_exponent = beta;
      if (beta >= alpha - 1e-3) {
        out.finite = false;
        out.value = std::numeric_limits<double>::infinity();
        return out;
      }
      const double uh = std::abs(u[n - 1]);
      tail = uh * uh * std::pow(grid.z[n - 1], -2.0 * alpha) / (2.0 * (alpha - beta));
    }
  }
  out.value = std::sqrt(std::max(core + tail, 0.0));
  out.error_bar = (out.value > 0.0) ? 0.5 * tail / out.value : 0.0;
  out.finite = true;
  return out;
}

WeightedNormResult weighted_norm(const ModalSolution& u, double alpha) {
  return weighted_norm_samples(u.values, u.grid, u.z0, alpha,
                               u.kind == ModalKind::FastDecay);
}

namespace modal_detail {

ModeBasis make_mode_basis(double mu, const LogGrid& grid) {
  ModeBasis B;
  B.mu = mu;
  B.grid = grid;
  const int n = grid.size();
  const double z_in = grid.z[0];
  const double disc = 0.25 + mu / z_in;
  if (disc <= 1e-3)
    throw NumericError("mode basis: oscillatory regime at the inner boundary (z0 too small)");
  const double rho0 = -0.5 + std::sqrt(disc);

  // High modes grow like exp(2 sqrt(mu z)); march (b, b') cell by cell with
  // renormalization and keep only (log b, b'/b).
  ode::GaussIrk8 irk;
  auto M = [mu](double z) { return modal_matrix(mu, z); };
  auto zero2 = [](double) { return Eigen::Vector2d::Zero().eval(); };
  const double mu_scale = std::max(1.0, std::abs(mu));
  auto hmax = [mu_scale](double z) { return std::min(20.0, 0.3 * z / mu_scale); };
  B.log_b.resize(n);
  B.rho_b.resize(n);
  VectorXd y(2);
  y << 1.0, rho0;
  double shift = 0.0;
  B.log_b[0] = 0.0;
  B.rho_b[0] = rho0;
  for (int k = 0; k + 1 < n; ++k) {
    VectorXd seg(2);
    seg << grid.z[k], grid.z[k + 1];
    y = irk.solve_h(seg, M, zero2, y, hmax).col(1);
    if (!(y[0] > 0.0) || !y.allFinite())
      throw NumericError("mode basis: polynomial branch lost positivity (z0 too small)");
    const double s = std::abs(y[0]);
    if (s > 1e120) {
      y /= s;
      shift += std::log(s);
    }
    B.log_b[k + 1] = std::log(y[0]) + shift;
    B.rho_b[k + 1] = y[1] / y[0];
  }
  riccati_backward(mu, grid, B.r_w, B.log_w);
  B.W0 = B.r_w[0] - B.rho_b[0];  // b(z_in)=1, w(z_in)=1
  if (std::abs(B.W0) < 1e-200) throw NumericError("mode basis: degenerate Wronskian");
  return B;
}

VectorXd decay_class_solve(const ModeBasis& B, const VectorXd& f, double boundary_value) {
  const LogGrid& g = B.grid;
  const int n = g.size();
  const double zin = g.z[0];
  ModalGridFn ffun(g, f), rfun(g, B.r_w), lwfun(g, B.log_w), logbfun(g, B.log_b),
      rhobfun(g, B.rho_b);
  auto src = [&](double z) {
    return std::exp(logbfun(z) + lwfun(z) + (z - zin)) * ffun(z) / B.W0;
  };
  ode::GaussIrk8 irk;
  const double mu_scale = std::max(1.0, std::abs(B.mu));
  auto hmax = [mu_scale](double z) { return std::min(20.0, 0.3 * z / mu_scale); };

  auto MI = [&](double z) {
    Eigen::Matrix<double, 1, 1> m;
    m(0, 0) = rfun(z);
    return m;
  };
  auto gI = [&](double z) {
    Eigen::Matrix<double, 1, 1> v;
    v(0, 0) = src(z);
    return v;
  };
  const Eigen::MatrixXd Ipath = irk.solve_h(g.z, MI, gI, VectorXd::Zero(1), hmax);

  // analytic tail of the suppressed-branch integral at the far anchor
  double beta_hat = -2.0;
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (int j = n - 1; j >= 0 && g.t[n - 1] - g.t[j] < 0.5 * std::log(10.0); --j) {
      const double a = std::abs(f[j]);
      if (a < 1e-280) continue;
      sx += g.t[j];
      sy += std::log(a);
      sxx += g.t[j] * g.t[j];
      sxy += g.t[j] * std::log(a);
      ++cnt;
    }
    if (cnt >= 4) {
      const double denom = cnt * sxx - sx * sx;
      if (std::abs(denom) > 1e-12) beta_hat = (cnt * sxy - sx * sy) / denom;
    }
  }
  double Kinit = 0.0;
  const double denom_tail = B.mu - beta_hat - 1.0;
  if (denom_tail > 0.1 && std::abs(f[n - 1]) > 1e-290)
    Kinit = src(g.z[n - 1]) * g.z[n - 1] / denom_tail;

  auto MK = [&](double z) {
    Eigen::Matrix<double, 1, 1> m;
    m(0, 0) = rhobfun(z);
    return m;
  };
  auto gK = [&](double z) {
    Eigen::Matrix<double, 1, 1> v;
    v(0, 0) = -src(z);
    return v;
  };
  VectorXd nodes_rev(n);
  for (int i = 0; i < n; ++i) nodes_rev[i] = g.z[n - 1 - i];
  const Eigen::MatrixXd Krev =
      irk.solve_h(nodes_rev, MK, gK, VectorXd::Constant(1, Kinit), hmax);

  VectorXd u(n);
  for (int i = 0; i < n; ++i) u[i] = Ipath(0, i) + Krev(0, n - 1 - i);
  const double cw = boundary_value - u[0];
  for (int i = 0; i < n; ++i) u[i] += cw * std::exp(B.log_w[i]);
  return u;
}

VectorXd prescribed_slope_solve(const ModeBasis& B, const VectorXd& f, double c0) {
  const LogGrid& g = B.grid;
  const int n = g.size();
  const double zin = g.z[0];
  ModalGridFn ffun(g, f), logbfun(g, B.log_b);
  ode::GaussIrk8 irk;
  const double mu_scale = std::max(1.0, std::abs(B.mu));
  auto hmax = [mu_scale](double z) { return std::min(20.0, 0.3 * z / mu_scale); };

  auto MA = [](double) {
    Eigen::Matrix<double, 1, 1> m;
    m(0, 0) = -1.0;
    return m;
  };
  auto gA = [&](double z) {
    Eigen::Matrix<double, 1, 1> v;
    v(0, 0) = ffun(z) * std::exp(logbfun(z));
    return v;
  };
  const Eigen::MatrixXd Apath = irk.solve_h(g.z, MA, gA, VectorXd::Zero(1), hmax);
  ModalGridFn Afun(g, Apath.row(0).transpose());

  auto Mg = [](double) { return Eigen::Matrix<double, 1, 1>::Zero().eval(); };
  auto gg = [&](double z) {
    Eigen::Matrix<double, 1, 1> v;
    v(0, 0) = std::exp(-2.0 * logbfun(z)) * (Afun(z) + c0 * std::exp(zin - z));
    return v;
  };
  const Eigen::MatrixXd gpath = irk.solve_h(g.z, Mg, gg, VectorXd::Zero(1), hmax);
  VectorXd u(n);
  for (int i = 0; i < n; ++i) u[i] = std::exp(B.log_b[i]) * gpath(0, i);
  return u;
}

}  // namespace modal_detail

double ModalGridFn::operator()(double z) const {
  const int n = grid_.size();
  const double t = std::log(z);
  double x = (t - grid_.t[0]) / grid_.ht;
  int i = std::clamp(static_cast<int>(std::floor(x)) - 1, 0, n - 4);
  const double s = x - (i + 1);
  // 4-point Lagrange in t
  const double c0 = -s * (s - 1.0) * (s - 2.0) / 6.0;
  const double c1 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
  const double c2 = -(s + 1.0) * s * (s - 2.0) / 2.0;
  const double c3 = (s + 1.0) * s * (s - 1.0) / 6.0;
  return c0 * vals_[i] + c1 * vals_[i + 1] + c2 * vals_[i + 2] + c3 * vals_[i + 3];
}

}  // namespace soliton
