#include "soliton/end_builder.hpp"

#include <algorithm>
#include <cmath>

#include "soliton/errors.hpp"

namespace soliton {

namespace {

using modal_detail::ModeBasis;

double quintic_smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}

struct ModeWorkspace {
  std::vector<ModeBasis> bases;      // per spectrum mode (only for active modes)
  std::vector<int> active;           // spectrum indices solved directly
  LogGrid zgrid;
};

// Modes participating in the mode-by-mode solves: k=0 only on rotationally
// reduced grids, eigenvalues below the truncation cap.
ModeWorkspace make_workspace(const EndContext& ctx, const LogGrid& zg) {
  ModeWorkspace ws;
  ws.zgrid = zg;
  for (int j = 0; j < static_cast<int>(ctx.spec.modes.size()); ++j) {
    if (ctx.grid.kind == GridKind::ProfileRotational && ctx.spec.modes[j].fourier_k != 0)
      continue;
    if (ctx.spec.modes[j].mu > ctx.spec.mu_max) continue;
    ws.active.push_back(j);
  }
  ws.bases.reserve(ws.active.size());
  for (int j : ws.active) ws.bases.push_back(modal_detail::make_mode_basis(ctx.spec.modes[j].mu, zg));
  return ws;
}

EndField synthesize(const EndContext& ctx, const ModeWorkspace& ws,
                    const std::vector<VectorXd>& mode_vals) {
  EndField u;
  u.sgrid = ctx.grid;
  u.zgrid = ws.zgrid;
  u.values = MatrixXd::Zero(ctx.grid.size(), ws.zgrid.size());
  for (size_t a = 0; a < ws.active.size(); ++a)
    u.values += ctx.spec.modes[ws.active[a]].profile_fn * mode_vals[a].transpose();
  return u;
}

// eta(z) (SR(v) + z^{-1} T(0)) assembled as eta (z^{-1} T(v) + T_S v); the
// second form needs only the nonlinear evaluation and the spectral T_S.
MatrixXd picard_rhs(const EndContext& ctx, const ModeWorkspace& ws, const EndField& v,
                    double z0, bool drop_flat_source = false) {
  const MatrixXd Tv = translator_mc(v);
  const MatrixXd TSv = apply_TS_spectral(v, ctx.spec);
  MatrixXd T0;
  if (drop_flat_source) {
    EndField zero = v;
    zero.values.setZero();
    T0 = translator_mc(zero);
  }
  MatrixXd rhs(v.rows(), v.cols());
  for (int k = 0; k < v.cols(); ++k) {
    const double z = v.zgrid.z[k];
    const double eta = cutoff_eta(z, z0);
    for (int i = 0; i < v.rows(); ++i) {
      double val = Tv(i, k);
      if (drop_flat_source) val -= T0(i, k);
      rhs(i, k) = eta * (val / z + TSv(i, k));
    }
  }
  return rhs;
}

// fields built by the construction carry geometry only where the cutoff is
// active; below that the values are construction bookkeeping
int active_col(const LogGrid& zg, double z0) { return zg.lower_index(0.45 * z0); }

struct SweepResult {
  std::vector<VectorXd> mode_vals;
  EndField field;
};

// One application of the Picard map: solve T_S u = rhs mode by mode with the
// boundary data of the construction. `seed` adds a homogeneous-branch seed to
// one mode (one-sided deformations).
SweepResult apply_picard_map(const EndContext& ctx, const ModeWorkspace& ws, const MatrixXd& rhs,
                             const VectorXd& phi_by_mode, bool prescribe_slopes,
                             int seed_mode = -1, const VectorXd* seed_vals = nullptr) {
  SweepResult out;
  const MatrixXd coeff = [&] {
    EndField tmp;
    tmp.sgrid = ctx.grid;
    tmp.zgrid = ws.zgrid;
    tmp.values = rhs;
    tmp.graph_bound = 1e300;  // rhs is not a graph; skip the bound check
    return field_to_modes(tmp, ctx.spec);
  }();
  out.mode_vals.resize(ws.active.size());
  for (size_t a = 0; a < ws.active.size(); ++a) {
    const int j = ws.active[a];
    const double mu = ctx.spec.modes[j].mu;
    const VectorXd f = coeff.row(j).transpose();
    const bool seeded = (static_cast<int>(a) == seed_mode && seed_vals);
    if (prescribe_slopes && mu < -SpectrumData::kKernelTol) {
      out.mode_vals[a] = modal_detail::prescribed_slope_solve(ws.bases[a], f, phi_by_mode[j]);
    } else {
      // a homogeneous-branch seed shifts the boundary value so the total
      // still vanishes at the inner edge
      const double bval = seeded ? -(*seed_vals)[0] : 0.0;
      out.mode_vals[a] = modal_detail::decay_class_solve(ws.bases[a], f, bval);
    }
    if (seeded) out.mode_vals[a] += *seed_vals;
  }
  out.field = synthesize(ctx, ws, out.mode_vals);
  return out;
}

double sup_abs_window(const MatrixXd& T, const LogGrid& zg, double z_lo, double z_hi) {
  double worst = 0.0;
  for (int k = 0; k < zg.size(); ++k) {
    if (zg.z[k] < z_lo || zg.z[k] > z_hi) continue;
    worst = std::max(worst, T.col(k).cwiseAbs().maxCoeff());
  }
  return worst;
}

void certify(EndFamilyMember& m, const EndContext& ctx, const EndBuildConfig& cfg) {
  const LogGrid& zg = m.field.zgrid;
  const double z_hi = zg.z[zg.size() - 1];
  const MatrixXd T = translator_mc(m.field);
  m.residual = sup_abs_window(T, zg, m.z0, std::min(100.0 * m.z0, 0.8 * z_hi));

  const FieldDerivs dv = field_derivs(m.field);
  m.decay_margin = 1e300;
  const double mu_minus = ctx.mu_minus();
  for (int s = 0; s < cfg.rate_samples; ++s) {
    const double R = m.z0 * std::pow((0.45 * z_hi) / m.z0, s / double(cfg.rate_samples - 1));
    const double nrm = star_norm(m.field, dv, R, NormVariant::Star).total;
    m.decay_margin = std::min(m.decay_margin, std::pow(R, 0.5 * mu_minus) - nrm);
  }

  // boundary certificates
  m.boundary_err = m.field.values.col(0).cwiseAbs().maxCoeff();
  const MatrixXd coeff = field_to_modes(m.field, ctx.spec);
  int neg = 0;
  for (int j = 0; j < coeff.rows(); ++j) {
    if (!ctx.spec.is_negative(j)) continue;
    if (ctx.grid.kind == GridKind::ProfileRotational && ctx.spec.modes[j].fourier_k != 0) {
      ++neg;
      continue;
    }
    // one-sided 4th-order slope at the inner boundary
    const VectorXd cj = coeff.row(j).transpose();
    const VectorXd cz = dz_on_loggrid(cj, zg);
    const double phi_j = (m.phi.size() > neg) ? m.phi[neg] : 0.0;
    m.boundary_err = std::max(m.boundary_err, std::abs(cz[0] - phi_j));
    ++neg;
  }
}

}  // namespace

double cutoff_eta(double z, double z0) {
  return quintic_smoothstep((z / z0 - 0.5) / 0.25);
}

EndContext make_end_context(const ShrinkerSurface& S, int surface_nodes, int k_max) {
  EndContext ctx;
  ctx.S = S;
  if (S.is_round() && S.ambient_dim == 2) {
    ctx.grid = make_circle_grid(S, surface_nodes);
    SpectrumOptions opt;
    opt.k_max = k_max;
    opt.grid_nodes = surface_nodes;
    ctx.spec = compute_spectrum(S, opt);
  } else if (!S.is_round() && S.ambient_dim == 3) {
    ctx.grid = make_profile_rotational_grid(S);
    SpectrumOptions opt;
    opt.k_max = k_max;
    // the flat-state source varies over the profile; the rotational solves
    // need a deep k=0 overtone stack before its projection tail is negligible
    opt.count = 8192;
    opt.mu_max = 240.0;
    ctx.spec = compute_spectrum(S, opt);
  } else {
    throw DomainError("make_end_context: unsupported shrinker type");
  }
  return ctx;
}

double xnorm(const EndField& u, double gamma, double z_lo, double z_hi, int samples) {
  const FieldDerivs dv = field_derivs(u);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const double R = z_lo * std::pow((0.45 * z_hi) / z_lo, s / double(samples - 1));
    const double nrm = star_norm(u, dv, R, NormVariant::Star).total;
    worst = std::max(worst, std::pow(R, -gamma) * nrm);
  }
  return worst;
}

EndFamilyMember build_end(const std::shared_ptr<const EndContext>& ctx, const VectorXd& phi,
                          double z0, const EndBuildConfig& cfg) {
  const EndContext& C = *ctx;
  const double gamma = (cfg.gamma != 0.0) ? cfg.gamma : 0.5 * C.mu_minus();
  if (!(gamma > C.mu_minus() && gamma < 0.0))
    throw HypothesisError("build_end: gamma outside (mu_minus, 0)");
  if (phi.size() != C.index())
    throw DomainError("build_end: phi must have one entry per negative mode");
  if (phi.norm() > cfg.delta0 * std::pow(z0, gamma))
    throw HypothesisError("build_end: |phi| exceeds delta0 z0^gamma");

  const double z_in = z0 / 12.0;
  const double z_hi = z0 * cfg.z_hi_factor;
  const int npts = std::max(96, static_cast<int>(std::ceil(std::log10(z_hi / z_in) * cfg.ppd)));
  LogGrid zg(z_in, z_hi, npts);

  ModeWorkspace ws;
  try {
    ws = make_workspace(C, zg);
  } catch (const NumericError& e) {
    throw HypothesisError(std::string("build_end: ") + e.what());
  }

  // phi indexed over negative modes in spectrum order -> per-mode slopes
  VectorXd phi_by_mode = VectorXd::Zero(C.spec.modes.size());
  {
    int neg = 0;
    for (int j = 0; j < static_cast<int>(C.spec.modes.size()); ++j)
      if (C.spec.is_negative(j)) {
        if (C.grid.kind == GridKind::ProfileRotational && C.spec.modes[j].fourier_k != 0) {
          if (std::abs(phi[neg]) > 0.0)
            throw HypothesisError("build_end: non-rotational phi on a rotational grid");
          ++neg;
          continue;
        }
        phi_by_mode[j] = phi[neg++];
      }
  }

  EndFamilyMember m;
  m.phi = phi;
  m.z0 = z0;
  m.gamma = gamma;
  m.ctx = ctx;

  EndField v;
  v.sgrid = C.grid;
  v.zgrid = zg;
  v.values = MatrixXd::Zero(C.grid.size(), zg.size());
  v.active_from = active_col(zg, z0);
  double prev_delta = -1.0;
  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    const MatrixXd rhs = picard_rhs(C, ws, v, z0, cfg.drop_flat_source);
    SweepResult next = apply_picard_map(C, ws, rhs, phi_by_mode, /*prescribe=*/true);
    next.field.active_from = v.active_from;
    EndField diff = next.field;
    diff.values -= v.values;
    diff.graph_bound = 1e300;
    const double delta = xnorm(diff, gamma, z0, z_hi, cfg.rate_samples);
    if (prev_delta > 0.0) {
      const double factor = delta / prev_delta;
      m.iteration_log.push_back(factor);
      if (getenv("SOLITON_DEBUG_PICARD"))
        fprintf(stderr, "  sweep %d delta=%.3e factor=%.3f\n", sweep, delta, factor);
      // stagnation just above fp_tol is the iteration noise floor, not a
      // contraction failure
      if (factor >= 0.85 && delta < 50.0 * cfg.fp_tol) {
        v = next.field;
        break;
      }
      if (sweep >= 3 && factor >= 1.0)
        throw HypothesisError("build_end: Picard map not contracting (z0 too small)");
    }
    prev_delta = std::max(delta, 1e-300);
    v = next.field;
    if (delta < cfg.fp_tol) break;
    if (sweep == cfg.max_sweeps - 1)
      throw NumericError("build_end: Picard iteration did not reach fp_tol");
  }
  m.field = v;
  certify(m, C, cfg);
  return m;
}

double choose_z0(const std::shared_ptr<const EndContext>& ctx, double z0_init,
                 const EndBuildConfig& cfg) {
  double z0 = z0_init;
  const int I = (*ctx).index();
  for (int attempt = 0; attempt < 12; ++attempt) {
    try {
      EndBuildConfig probe = cfg;
      probe.max_sweeps = 10;
      probe.fp_tol = 1e-7;
      probe.z_hi_factor = std::min(cfg.z_hi_factor, 200.0);
      EndFamilyMember m = build_end(ctx, VectorXd::Zero(I), z0, probe);
      // demand visible contraction margin
      double worst = 0.0;
      for (size_t i = 1; i < m.iteration_log.size(); ++i)
        worst = std::max(worst, m.iteration_log[i]);
      if (worst < 0.75) return z0;
    } catch (const HypothesisError&) {
    } catch (const NumericError&) {
    }
    z0 *= 2.0;
  }
  throw NumericError("choose_z0: no contracting z0 found");
}

DeformResult one_sided_deform(const EndFamilyMember& base, double a, const DeformConfig& dcfg) {
  const EndContext& C = *base.ctx;
  const double mu1 = C.mu1();
  const double delta = dcfg.delta;
  if (delta >= dcfg.delta2)
    throw HypothesisError("one_sided_deform: delta above the admissible cap");
  const double a_cap = delta * std::pow(base.z0, -mu1);
  if (std::abs(a) > a_cap)
    throw HypothesisError("one_sided_deform: |a| beyond the admissible window");

  DeformResult out;
  if (a == 0.0) {
    out.member = base;
    out.measured_constant = 0.0;
    out.one_sided = false;
    return out;
  }

  const LogGrid& zg = base.field.zgrid;
  ModeWorkspace ws = make_workspace(C, zg);

  // seed: a * bhat(z) psi_1 with bhat the homogeneous branch normalized to
  // z^{mu1} at the far anchor
  int a1 = -1;
  for (size_t i = 0; i < ws.active.size(); ++i)
    if (ws.active[i] == 0) a1 = static_cast<int>(i);
  if (a1 < 0) throw NumericError("one_sided_deform: ground mode missing from workspace");
  const ModeBasis& B1 = ws.bases[a1];
  const double z_far = zg.z[zg.size() - 1];
  VectorXd bvals = B1.b_values();
  VectorXd bhat = bvals * (std::pow(z_far, mu1) / bvals[zg.size() - 1]);
  VectorXd seed = a * bhat;

  const VectorXd phi_zero = VectorXd::Zero(C.spec.modes.size());
  EndField v = base.field;
  v.active_from = std::max(base.field.active_from, active_col(zg, base.z0));
  {
    EndField seed_field = synthesize(C, ws, [&] {
      std::vector<VectorXd> mv(ws.active.size(), VectorXd::Zero(zg.size()));
      mv[a1] = seed;
      return mv;
    }());
    v.values += seed_field.values;
  }

  EndField base_active = base.field;
  base_active.active_from = v.active_from;
  const MatrixXd rhs_base = picard_rhs(C, ws, base_active, base.z0);
  double prev_delta = -1.0, dn0 = -1.0;
  EndBuildConfig bc = dcfg.build;
  const double theta = 0.7;  // damped sweeps; the largest admissible seeds sit
                             // near the edge of the contraction regime
  for (int sweep = 0; sweep < bc.max_sweeps; ++sweep) {
    // T_S(u - u0) = eta (SR(v) - SR(u0)); assembled the same way as the
    // master map, then the base solution is subtracted.
    MatrixXd rhs = picard_rhs(C, ws, v, base.z0);
    rhs -= rhs_base;
    SweepResult diff = apply_picard_map(C, ws, rhs, phi_zero, /*prescribe=*/false, a1, &seed);
    EndField next = diff.field;
    next.active_from = v.active_from;
    next.values += base.field.values;
    next.values = theta * next.values + (1.0 - theta) * v.values;
    EndField delta_f = next;
    delta_f.values -= v.values;
    delta_f.graph_bound = 1e300;
    delta_f.active_from = 0;
    const double dn = xnorm(delta_f, mu1 + 0.5 * base.gamma, base.z0,
                            zg.z[zg.size() - 1], bc.rate_samples);
    if (dn0 < 0.0) dn0 = std::max(dn, 1e-300);
    if (getenv("SOLITON_DEBUG_PICARD"))
      fprintf(stderr, "  deform sweep %d dn=%.3e rel=%.3e factor=%.3f\n", sweep, dn, dn / dn0,
              prev_delta > 0 ? dn / prev_delta : -1.0);
    const double rel = dn / dn0;
    if (prev_delta > 0.0 && dn / prev_delta >= 0.85 && rel < 1e-6) {
      v = next;
      break;
    }
    if (prev_delta > 0.0 && sweep >= 5 && dn / prev_delta >= 1.0 && rel > 1e-4)
      throw HypothesisError("one_sided_deform: iteration not contracting");
    prev_delta = std::max(dn, 1e-300);
    v = next;
    if (rel < 1e-9 || dn < bc.fp_tol) break;
    if (sweep == bc.max_sweeps - 1 && rel > 1e-6)
      throw NumericError("one_sided_deform: iteration did not reach tolerance");
  }

  out.member = base;
  out.member.phi = VectorXd();  // slopes are induced, not prescribed
  out.member.field = v;
  certify(out.member, C, dcfg.build);

  // measured constant of the deformation estimate
  EndField dev = v;
  dev.values -= base.field.values;
  for (int k = 0; k < dev.cols(); ++k) {
    const double zp = std::pow(zg.z[k], mu1);
    dev.values.col(k) -= (a * zp) * C.spec.psi1;
  }
  dev.graph_bound = 1e300;
  const FieldDerivs dd = field_derivs(dev);
  double worst = 0.0;
  for (int s = 0; s < dcfg.build.rate_samples; ++s) {
    const double R =
        base.z0 * std::pow((0.45 * z_far) / base.z0, s / double(dcfg.build.rate_samples - 1));
    const double nrm = star_norm(dev, dd, R, NormVariant::Star).total;
    const double denom =
        (1.0 + std::abs(a)) * std::pow(R / base.z0, 0.5 * base.gamma) * std::pow(R, mu1);
    worst = std::max(worst, nrm / denom);
  }
  out.measured_constant = worst;

  // one-sidedness: strict ordering beyond a reported z
  if (a != 0.0) {
    const MatrixXd diff = (v.values - base.field.values) * (a > 0 ? 1.0 : -1.0);
    int k_bar = -1;
    for (int k = zg.size() - 1; k >= 0; --k) {
      if (diff.col(k).minCoeff() > 0.0)
        k_bar = k;
      else
        break;
    }
    out.one_sided = (k_bar >= 0);
    out.one_sided_from = (k_bar >= 0) ? zg.z[k_bar] : zg.z[zg.size() - 1];
  }
  return out;
}

RateReport asymptotic_rate(const EndContext& ctx, const EndField& u, double snap_tol) {
  const LogGrid& zg = u.zgrid;
  const int K = zg.size();
  if (zg.z[K - 1] / zg.z[0] < 100.0)
    throw DomainError("asymptotic_rate: need at least two decades in z");
  const MatrixXd coeff = field_to_modes(u, ctx.spec);
  const double t_hi = zg.t[K - 1];
  int k0 = K - 1;
  while (k0 > 0 && zg.t[k0] > t_hi - std::log(10.0)) --k0;

  RateReport rep;
  rep.rate = -1e300;
  double amp_best = 0.0;
  const double floor_amp = 1e-13 * std::max(1e-300, u.values.cwiseAbs().maxCoeff());
  for (int j = 0; j < coeff.rows(); ++j) {
    if (ctx.grid.kind == GridKind::ProfileRotational && ctx.spec.modes[j].fourier_k != 0)
      continue;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (int k = k0; k < K; ++k) {
      const double av = std::abs(coeff(j, k));
      if (av < floor_amp) continue;
      sx += zg.t[k];
      sy += std::log(av);
      sxx += zg.t[k] * zg.t[k];
      sxy += zg.t[k] * std::log(av);
      ++cnt;
    }
    if (cnt < 8) continue;
    const double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    rep.rate = std::max(rep.rate, slope);
    const double amp = std::abs(coeff(j, K - 1));
    if (amp > amp_best) {
      amp_best = amp;
      rep.leading_mode = j;
    }
  }
  if (rep.rate < -1e299) throw NumericError("asymptotic_rate: no mode above the noise floor");
  rep.snapped_rate = rep.rate;
  for (const auto& md : ctx.spec.modes)
    if (std::abs(md.mu - rep.rate) < snap_tol) {
      rep.snapped_rate = md.mu;
      rep.snapped = true;
      break;
    }
  return rep;
}

CloseReport exp_closeness(const EndField& u_plus, const EndField& u_minus, double beta,
                          double noise_floor) {
  CloseReport rep;
  EndField diff = u_plus;
  diff.values -= u_minus.values;
  diff.graph_bound = 1e300;
  const LogGrid& zg = diff.zgrid;
  const double z_hi = zg.z[zg.size() - 1];
  const double z_lo = zg.z[0];
  const double scale =
      std::max(u_plus.values.cwiseAbs().maxCoeff(), u_minus.values.cwiseAbs().maxCoeff());
  rep.noise_floor = std::max(noise_floor, 1e-11 * std::max(scale, 1e-30));

  const FieldDerivs dd = field_derivs(diff);
  std::vector<double> Rs, ds;
  const int samples = 18;
  for (int s = 0; s < samples; ++s) {
    const double R = (3.0 * z_lo) * std::pow((z_hi - 2.0) / (3.0 * z_lo), s / double(samples - 1));
    const double d = star_norm(diff, dd, R, NormVariant::Sharp).total;
    Rs.push_back(R);
    ds.push_back(d);
  }
  if (*std::max_element(ds.begin(), ds.end()) < rep.noise_floor) {
    rep.verdict = CloseVerdict::ExpClose;
    rep.exp_rate = std::numeric_limits<double>::infinity();
    return rep;
  }
  auto fit = [&](bool log_abscissa, double& slope, double& r2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    int cnt = 0;
    for (size_t i = 0; i < Rs.size(); ++i) {
      if (ds[i] < rep.noise_floor) continue;
      const double X = log_abscissa ? std::log(Rs[i]) : Rs[i];
      const double Y = std::log(ds[i]);
      sx += X;
      sy += Y;
      sxx += X * X;
      sxy += X * Y;
      syy += Y * Y;
      ++cnt;
    }
    if (cnt < 5) {
      slope = 0;
      r2 = -1;
      return;
    }
    slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    const double ybar = sy / cnt, xbar = sx / cnt;
    const double ss_tot = syy - cnt * ybar * ybar;
    const double ss_res = ss_tot - slope * (sxy - cnt * xbar * ybar);
    r2 = (ss_tot > 0) ? 1.0 - ss_res / ss_tot : 1.0;
  };
  double se, re2, sp, rp2;
  fit(false, se, re2);
  fit(true, sp, rp2);
  rep.exp_rate = -se;
  rep.poly_rate = sp;
  rep.exp_fit_r2 = re2;
  rep.poly_fit_r2 = rp2;
  if (re2 > rp2 && rep.exp_rate >= beta)
    rep.verdict = CloseVerdict::ExpClose;
  else if (rp2 >= re2 && rp2 > 0.9 && rep.poly_rate < -0.2)
    rep.verdict = CloseVerdict::PolySeparated;
  else
    rep.verdict = CloseVerdict::Inconclusive;
  return rep;
}

MatchResult match_general_end(const std::shared_ptr<const EndContext>& ctx, const EndField& w,
                              double z0, const EndBuildConfig& cfg) {
  const EndContext& C = *ctx;
  const double gamma = (cfg.gamma != 0.0) ? cfg.gamma : 0.5 * C.mu_minus();
  const LogGrid& zg = w.zgrid;
  if (zg.z[0] > z0 / 12.0 * 1.0001)
    throw DomainError("match_general_end: w must cover [z0/12, z_hi]");
  if (xnorm(w, gamma, z0, zg.z[zg.size() - 1], cfg.rate_samples) > 1.0)
    throw HypothesisError("match_general_end: w violates the smallness hypothesis");

  ModeWorkspace ws = make_workspace(C, zg);
  // project w into the spectral span; the remainder is exponentially small
  // for admissible inputs and lands in the closeness report
  const MatrixXd wc = field_to_modes(w, C.spec);
  std::vector<VectorXd> w_modes(ws.active.size());
  for (size_t a = 0; a < ws.active.size(); ++a) w_modes[a] = wc.row(ws.active[a]).transpose();

  const VectorXd phi_zero = VectorXd::Zero(C.spec.modes.size());
  EndField v = synthesize(C, ws, w_modes);
  const MatrixXd TSw = apply_TS_spectral(v, C.spec);
  EndField wspan = v;

  double prev_delta = -1.0;
  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    // T_S (u - w) = eta (SR(v) + z^{-1} T(0)) - T_S w, decay class in every mode
    MatrixXd rhs = picard_rhs(C, ws, v, z0);
    rhs -= TSw;
    const MatrixXd coeff = [&] {
      EndField tmp;
      tmp.sgrid = C.grid;
      tmp.zgrid = zg;
      tmp.values = rhs;
      tmp.graph_bound = 1e300;
      return field_to_modes(tmp, C.spec);
    }();
    std::vector<VectorXd> mode_vals(ws.active.size());
    for (size_t a = 0; a < ws.active.size(); ++a) {
      const int j = ws.active[a];
      const VectorXd f = coeff.row(j).transpose();
      const double bval = -w_modes[a][0];
      mode_vals[a] = modal_detail::decay_class_solve(ws.bases[a], f, bval);
      mode_vals[a] += w_modes[a];
    }
    EndField next = synthesize(C, ws, mode_vals);
    EndField delta_f = next;
    delta_f.values -= v.values;
    delta_f.graph_bound = 1e300;
    const double dn = xnorm(delta_f, gamma, z0, zg.z[zg.size() - 1], cfg.rate_samples);
    if (prev_delta > 0.0 && dn / prev_delta >= 0.85 && dn < 50.0 * cfg.fp_tol) {
      v = next;
      break;
    }
    if (prev_delta > 0.0 && sweep >= 3 && dn / prev_delta >= 1.0)
      throw HypothesisError("match_general_end: anchored iteration not contracting");
    prev_delta = std::max(dn, 1e-300);
    v = next;
    if (dn < cfg.fp_tol) break;
    if (sweep == cfg.max_sweeps - 1)
      throw NumericError("match_general_end: iteration did not reach fp_tol");
  }

  MatchResult out;
  out.matched = v;
  const MatrixXd coeff = field_to_modes(v, C.spec);
  std::vector<double> phis;
  for (int j = 0; j < coeff.rows(); ++j) {
    if (!C.spec.is_negative(j)) continue;
    if (C.grid.kind == GridKind::ProfileRotational && C.spec.modes[j].fourier_k != 0) {
      phis.push_back(0.0);
      continue;
    }
    const VectorXd cj = coeff.row(j).transpose();
    const VectorXd cz = dz_on_loggrid(cj, zg);
    phis.push_back(cz[0]);
  }
  out.phi = Eigen::Map<VectorXd>(phis.data(), phis.size());
  out.closeness = exp_closeness(v, wspan, 0.45, 10.0 * cfg.fp_tol);
  return out;
}

}  // namespace soliton
