#include "soliton/cli_runner.hpp"

#include <chrono>
#include <fstream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "soliton/errors.hpp"
#include "soliton/io.hpp"
#include "soliton/profile_flow.hpp"

namespace soliton::cli {

namespace fs = std::filesystem;
using io::json;

namespace {

struct Certificate {
  std::string name;
  std::string file;    // csv file (empty: value check)
  std::string column;  // column name
  std::string kind;    // "max_abs_le" | "min_ge" | "value_le" | "value_ge"
  double bound = 0.0;
  double value = 0.0;  // for value checks
};

json cert_to_json(const Certificate& c) {
  return json{{"name", c.name},   {"file", c.file},   {"column", c.column},
              {"kind", c.kind},   {"bound", c.bound}, {"value", c.value}};
}

struct BundleWriter {
  fs::path dir;
  json metadata;
  std::vector<Certificate> certs;
  std::vector<std::string> csv_files;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  explicit BundleWriter(const fs::path& d, const json& config) : dir(d) {
    fs::create_directories(dir);
    metadata["version"] = kVersion;
    metadata["tolerance_version"] = kToleranceVersion;
    metadata["config"] = config;
    metadata["config_hash"] = io::config_hash(config);
  }

  void csv(const std::string& name, const std::vector<std::string>& cols,
           const std::vector<Eigen::VectorXd>& data) {
    io::write_csv(dir / name, cols, data);
    csv_files.push_back(name);
  }

  void finish() {
    json cj = json::array();
    for (const auto& c : certs) cj.push_back(cert_to_json(c));
    metadata["certificates"] = cj;
    metadata["csv_files"] = csv_files;
    metadata["elapsed_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                              t0)
            .count();
    io::write_json(dir / "metadata.json", metadata);
    // plot script: one figure per csv, first column on the x axis
    std::ostringstream py;
    py << "import csv, sys\nimport matplotlib\nmatplotlib.use('Agg')\n"
       << "import matplotlib.pyplot as plt\n\n"
       << "files = " << json(csv_files).dump() << "\n"
       << "for f in files:\n"
       << "    with open(f) as fh:\n"
       << "        rows = list(csv.reader(fh))\n"
       << "    head, data = rows[0], rows[1:]\n"
       << "    cols = list(zip(*[[float(v) for v in r] for r in data]))\n"
       << "    plt.figure()\n"
       << "    for i in range(1, len(head)):\n"
       << "        if len(head) <= 8 or i <= 4:\n"
       << "            plt.plot(cols[0], cols[i], label=head[i])\n"
       << "    plt.xlabel(head[0]); plt.legend(); plt.title(f)\n"
       << "    plt.savefig(f.replace('.csv', '.png'), dpi=110)\n";
    io::write_text(dir / "plot.py", py.str());
  }
};

ShrinkerSurface load_or_make_shrinker(const json& params) {
  const std::string which = params.value("shrinker", "circle");
  if (which == "circle") return make_round_sphere(2);
  if (which == "sphere") return make_round_sphere(params.value("n", 3));
  if (which == "torus") {
    ShootingConfig cfg;
    cfg.nodes = params.value("nodes", 512);
    return shoot_angenent_torus(3, cfg);
  }
  return io::shrinker_from_json(io::read_json(which));
}

void require(const json& j, const char* key, const char* type, const std::string& where) {
  if (!j.contains(key))
    throw DomainError("config" + where + ": missing required field '" + key + "'");
  const auto& v = j.at(key);
  const std::string t = type;
  const bool ok = (t == "string" && v.is_string()) || (t == "number" && v.is_number()) ||
                  (t == "object" && v.is_object()) || (t == "array" && v.is_array());
  if (!ok)
    throw DomainError("config" + where + "/" + key + ": expected " + t);
}

// ------------------------- subcommand implementations -------------------------

void run_shrinker(const json& params, BundleWriter& bw) {
  const std::string kind = params.value("kind", "sphere");
  ShrinkerSurface S;
  if (kind == "sphere") {
    S = make_round_sphere(params.value("n", 2));
  } else if (kind == "torus") {
    ShootingConfig cfg;
    cfg.nodes = params.value("nodes", 512);
    S = shoot_angenent_torus(3, cfg);
    const ProfileGeometry& p = S.prof;
    bw.csv("profile.csv", {"w", "y", "H", "Xnu", "A2"}, {p.w, p.y, p.H, p.Xnu, p.A2});
    double sym = 0.0;
    const int m = p.size();
    for (int i = 1; i < m; ++i)
      sym = std::max(sym, std::hypot(p.w[i] - p.w[m - i], p.y[i] + p.y[m - i]));
    bw.certs.push_back({"reflection_symmetry", "", "", "value_le", 1e-5, sym});
  } else {
    throw DomainError("config/params/kind: expected 'sphere' or 'torus'");
  }
  io::write_json(bw.dir / "shrinker.json", io::shrinker_to_json(S));
  bw.certs.push_back(
      {"shrinker_residual", "", "", "value_le", S.residual_tol, S.residual_achieved});
  const EntropyReport rep = entropy_estimate(S);
  bw.metadata["gaussian_area"] = rep.gaussian_area;
  bw.metadata["entropy_grid_max"] = rep.grid_max;
  bw.certs.push_back({"entropy_sweep_below_F", "", "", "value_le", rep.gaussian_area + 1e-8,
                      rep.grid_max});
}

void run_spectrum(const json& params, BundleWriter& bw) {
  ShrinkerSurface S = load_or_make_shrinker(params);
  SpectrumOptions opt;
  opt.k_max = params.value("k_max", 10);
  if (params.contains("grid_nodes")) opt.grid_nodes = params["grid_nodes"].get<int>();
  SpectrumData spec = compute_spectrum(S, opt);
  io::write_json(bw.dir / "spectrum.json", io::spectrum_to_json(spec));
  VectorXd mus(spec.modes.size()), ks(spec.modes.size());
  for (size_t i = 0; i < spec.modes.size(); ++i) {
    mus[i] = spec.modes[i].mu;
    ks[i] = spec.modes[i].fourier_k;
  }
  bw.csv("eigenvalues.csv", {"mu", "fourier_mode"}, {mus, ks});
  // Gram certificate
  double gram_err = 0.0;
  for (size_t a = 0; a < spec.modes.size(); ++a)
    for (size_t b = a; b < std::min(spec.modes.size(), a + 8); ++b) {
      if (spec.modes[a].fourier_k != spec.modes[b].fourier_k ||
          spec.modes[a].parity != spec.modes[b].parity)
        continue;
      const double ip = (spec.modes[a].profile_fn.array() * spec.modes[b].profile_fn.array() *
                         spec.weights.array())
                            .sum();
      gram_err = std::max(gram_err, std::abs(ip - (a == b ? 1.0 : 0.0)));
    }
  bw.certs.push_back({"gram_identity", "", "", "value_le", 1e-8, gram_err});
  bw.metadata["index_I"] = spec.index_I;
  bw.metadata["mu1"] = spec.mu1;
  bw.metadata["mu_minus"] = spec.mu_minus;
  bw.certs.push_back({"mu_minus_in_range", "", "", "value_le", 0.0, spec.mu_minus});
  bw.certs.push_back({"mu1_le_minus_one", "", "", "value_le", -1.0 + 1e-6, spec.mu1});
}

void run_modal(const json& params, BundleWriter& bw) {
  const double mu = params.value("mu", -1.0);
  const double alpha = params.value("alpha", 0.0);
  const double z_hi = params.value("z_hi", 1e4);
  {
    const double th = homogeneous_threshold(mu);
    ModalSolution b = solve_homogeneous_poly(mu, th, z_hi);
    VectorXd bound_margin(b.grid.size());
    for (int i = 0; i < b.grid.size(); ++i) {
      const double dev = std::abs(b.values[i] / std::pow(b.grid.z[i], mu) - 1.0);
      bound_margin[i] = 1.0 / std::sqrt(b.grid.z[i]) - dev;
    }
    bw.csv("homogeneous.csv", {"z", "b", "db", "bound_margin"},
           {b.grid.z, b.values, b.derivs, bound_margin});
    bw.certs.push_back({"homogeneous_two_sided_bound", "homogeneous.csv", "bound_margin",
                        "min_ge", 0.0, bound_margin.minCoeff()});
    bw.certs.push_back({"homogeneous_residual", "", "", "value_le", 1e-6, b.residual});
    bw.metadata["homogeneous_threshold"] = th;
  }
  {
    const double z0 = std::max(params.value("z0", 100.0), fast_decay_threshold(mu));
    ModalSolution w = solve_fast_decay(mu, z0, z0 + std::max(900.0, 0.1 * z_hi));
    VectorXd env_margin(w.grid.size());
    for (int i = 0; i < w.grid.size(); ++i) {
      const double envlog =
          (z0 - w.grid.z[i]) + (1.0 + std::max(-mu, 0.0)) * std::log(w.grid.z[i] / z0);
      env_margin[i] = envlog - w.log_values[i];
    }
    bw.csv("fast_decay.csv", {"z", "log_w", "dw", "envelope_margin"},
           {w.grid.z, w.log_values, w.derivs, env_margin});
    bw.certs.push_back({"fast_decay_envelope", "fast_decay.csv", "envelope_margin", "min_ge",
                        -1e-12, env_margin.minCoeff()});
    bw.certs.push_back({"fast_decay_slope", "", "", "value_le", 2.0 + std::max(mu, 0.0),
                        std::abs(w.derivs[0])});
  }
  if (std::abs(alpha - (mu - 1.0)) > 1e-9) {
    const double hyp =
        std::abs((2 * alpha + 2) * (2 * alpha + 3)) / std::abs(alpha + 1 - mu);
    const double z0 = std::max({params.value("z0", 60.0), homogeneous_threshold(std::min(std::abs(mu), 2.0)), hyp});
    InhomogeneousBc bc;
    bc.c0 = params.value("c0", 0.0);
    auto f = [](double z) { return 1.0 / z; };
    ModalSolution u = solve_inhomogeneous(mu, alpha, z0, 100.0 * z0, f, bc);
    VectorXd fres(u.grid.size());
    const VectorXd Lu = modal_apply(mu, u.values, u.grid);
    for (int i = 0; i < u.grid.size(); ++i) fres[i] = Lu[i] - f(u.grid.z[i]);
    bw.csv("inhomogeneous.csv", {"z", "u", "du", "residual"},
           {u.grid.z, u.values, u.derivs, fres});
    bw.certs.push_back({"inhomogeneous_residual", "", "", "value_le", 1e-4, u.residual});
    if (mu > alpha + 1.0) {
      const auto nu = weighted_norm(u, alpha + 1.0);
      LogGrid fg(z0, 100.0 * z0, 400);
      VectorXd fv(fg.size());
      for (int i = 0; i < fg.size(); ++i) fv[i] = f(fg.z[i]);
      const auto nf = weighted_norm_samples(fv, fg, z0, alpha, false);
      bw.certs.push_back({"inhomogeneous_norm_bound", "", "", "value_le",
                          2.0 / (mu - alpha - 1.0) * nf.value, nu.value});
    }
  }
}

void run_op(const json& params, BundleWriter& bw) {
  ShrinkerSurface S = load_or_make_shrinker(params);
  if (!S.is_round() || S.ambient_dim != 2)
    throw DomainError("config/params/shrinker: op command expects the circle");
  auto grid = make_circle_grid(S, params.value("surface_nodes", 96));
  LogGrid zg(params.value("z_lo", 40.0), params.value("z_hi", 400.0), 240);
  EndField zero{grid, zg, Eigen::MatrixXd::Zero(grid.size(), zg.size())};
  const Eigen::MatrixXd T0 = translator_mc(zero);
  VectorXd t0g(zg.size()), t0cf(zg.size());
  for (int k = 0; k < zg.size(); ++k) {
    t0g[k] = T0(0, k);
    t0cf[k] = translator_t0_round(S.radius, 2, zg.z[k]);
  }
  bw.csv("t0.csv", {"z", "T0_grid", "T0_closed_form"}, {zg.z, t0g, t0cf});
  double worst = 0.0;
  for (int k = 4; k < zg.size() - 4; ++k) worst = std::max(worst, std::abs(t0g[k] - t0cf[k]));
  bw.certs.push_back({"t0_matches_closed_form", "", "", "value_le", 1e-9, worst});
  const auto rep = star_norm(zero, zg.z[0] * 1.5, NormVariant::Star);
  bw.metadata["star_norm_zero_total"] = rep.total;
}

void run_bowl(const json& params, BundleWriter& bw) {
  const int n = params.value("n", 2);
  const double r_max = params.value("r_max", 210.0);
  TranslatorProfile bowl = solve_bowl(n, r_max);
  VectorXd G(bowl.r.size());
  for (int i = 0; i < bowl.r.size(); ++i)
    G[i] = (bowl.r[i] > 0) ? bowl.F[i] - bowl.r[i] * bowl.r[i] / (2.0 * (n - 1)) +
                                 std::log(bowl.r[i])
                           : 0.0;
  bw.csv("bowl.csv", {"r", "F", "Fp", "G"}, {bowl.r, bowl.F, bowl.Fp, G});
  bw.certs.push_back({"bowl_residual", "", "", "value_le", 1e-8, bowl.residual});
  bw.metadata["c_inf"] = bowl.c_inf;
  bw.metadata["asym_C"] = bowl.asym_C;
  bw.certs.push_back({"bowl_asym_constant", "", "", "value_le", 5.0, bowl.asym_C});
}

std::shared_ptr<EndContext> context_for(const json& params) {
  ShrinkerSurface S = load_or_make_shrinker(params);
  return std::make_shared<EndContext>(
      make_end_context(S, params.value("surface_nodes", 96), params.value("k_max", 10)));
}

EndBuildConfig build_config(const json& params) {
  EndBuildConfig cfg;
  cfg.z_hi_factor = params.value("z_hi_factor", 1000.0);
  cfg.ppd = params.value("ppd", 120);
  if (params.contains("gamma")) cfg.gamma = params["gamma"].get<double>();
  if (params.contains("fp_tol")) cfg.fp_tol = params["fp_tol"].get<double>();
  return cfg;
}

VectorXd phi_from_params(const json& params, const EndContext& ctx, double z0, double gamma,
                         unsigned seed) {
  const int I = ctx.index();
  VectorXd phi = VectorXd::Zero(I);
  if (params.contains("phi") && params["phi"].is_array()) {
    const auto& a = params["phi"];
    for (int i = 0; i < std::min<int>(I, a.size()); ++i) phi[i] = a[i].get<double>();
  } else if (params.value("phi", "zero") == std::string("random")) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int i = 0; i < I; ++i) phi[i] = U(rng);
    phi *= 0.25 * std::pow(z0, (gamma != 0.0 ? gamma : 0.5 * ctx.mu_minus())) / std::sqrt(I);
  }
  return phi;
}

void write_member(const EndFamilyMember& m, BundleWriter& bw) {
  io::save_end_field(bw.dir, "end_field", m.field);
  bw.csv_files.push_back("end_field.csv");
  VectorXd factors(m.iteration_log.size());
  for (size_t i = 0; i < m.iteration_log.size(); ++i) factors[i] = m.iteration_log[i];
  VectorXd sweeps(m.iteration_log.size());
  for (int i = 0; i < sweeps.size(); ++i) sweeps[i] = i + 1;
  if (sweeps.size() > 0) bw.csv("convergence.csv", {"sweep", "factor"}, {sweeps, factors});
  json mj;
  mj["z0"] = m.z0;
  mj["gamma"] = m.gamma;
  mj["residual"] = m.residual;
  mj["decay_margin"] = m.decay_margin;
  mj["boundary_err"] = m.boundary_err;
  json pj = json::array();
  for (int i = 0; i < m.phi.size(); ++i) pj.push_back(m.phi[i]);
  mj["phi"] = pj;
  io::write_json(bw.dir / "member.json", mj);
  const double res_tol =
      (m.ctx->grid.kind == GridKind::CircleFull) ? 1e-5 : 2e-3;
  bw.certs.push_back({"end_residual", "", "", "value_le", res_tol, m.residual});
  bw.certs.push_back({"decay_certificate_margin", "", "", "value_ge", 0.0, m.decay_margin});
  bw.certs.push_back({"boundary_conditions", "", "", "value_le", 1e-6, m.boundary_err});
}

void run_end(const json& params, BundleWriter& bw, unsigned seed) {
  const std::string action = params.value("action", "build");
  auto ctx = context_for(params);
  EndBuildConfig cfg = build_config(params);
  double z0 = params.value("z0", 0.0);
  if (z0 <= 0.0) z0 = choose_z0(ctx, ctx->grid.kind == GridKind::CircleFull ? 20.0 : 120.0, cfg);
  bw.metadata["z0"] = z0;
  const double gamma = (cfg.gamma != 0.0) ? cfg.gamma : 0.5 * ctx->mu_minus();
  const VectorXd phi = phi_from_params(params, *ctx, z0, gamma, seed);

  if (action == "build") {
    EndFamilyMember m = build_end(ctx, phi, z0, cfg);
    write_member(m, bw);
    return;
  }
  if (action == "deform") {
    EndFamilyMember base = build_end(ctx, phi, z0, cfg);
    DeformConfig dc;
    dc.build = cfg;
    dc.delta = params.value("delta", 0.02);
    const double a = params.value("a", 0.5) * dc.delta * std::pow(z0, -ctx->mu1());
    DeformResult dr = one_sided_deform(base, a, dc);
    write_member(dr.member, bw);
    bw.metadata["a"] = a;
    bw.metadata["deform_measured_constant"] = dr.measured_constant;
    bw.metadata["one_sided_from"] = dr.one_sided_from;
    bw.certs.push_back({"deform_estimate_constant", "", "", "value_le", std::sqrt(dc.delta),
                        dr.measured_constant});
    return;
  }
  if (action == "rate") {
    EndFamilyMember m = build_end(ctx, phi, z0, cfg);
    const RateReport rr = asymptotic_rate(*ctx, m.field);
    bw.metadata["rate"] = rr.rate;
    bw.metadata["snapped_rate"] = rr.snapped_rate;
    bw.metadata["leading_mode"] = rr.leading_mode;
    bw.certs.push_back({"rate_at_most_mu_minus", "", "", "value_le",
                        ctx->mu_minus() + 5e-2, rr.rate});
    return;
  }
  if (action == "match") {
    // bowl-extracted end over the circle, matched back into the family
    TranslatorProfile bowl = solve_bowl(2, params.value("r_max", 260.0));
    const double z_in = z0 / 12.0;
    EndField w = bowl_to_end(bowl, 0.0, 0.0, ctx->grid, z_in, 0.8 * bowl.F[bowl.F.size() - 1],
                             cfg.ppd);
    MatchResult mr = match_general_end(ctx, w, z0, cfg);
    json mj;
    json pj = json::array();
    for (int i = 0; i < mr.phi.size(); ++i) pj.push_back(mr.phi[i]);
    mj["phi"] = pj;
    mj["verdict"] = (mr.closeness.verdict == CloseVerdict::ExpClose)
                        ? "exp_close"
                        : (mr.closeness.verdict == CloseVerdict::PolySeparated ? "poly_separated"
                                                                               : "inconclusive");
    mj["exp_rate"] = mr.closeness.exp_rate;
    io::write_json(bw.dir / "match.json", mj);
    bw.certs.push_back({"match_exp_rate", "", "", "value_ge", 0.45,
                        std::min(mr.closeness.exp_rate, 1e3)});
    return;
  }
  throw DomainError("config/params/action: unknown end action '" + action + "'");
}

void run_minimize(const json& params, BundleWriter& bw, unsigned seed) {
  auto ctx = context_for(params);
  EndBuildConfig cfg = build_config(params);
  double z0 = params.value("z0", 0.0);
  if (z0 <= 0.0) z0 = choose_z0(ctx, 20.0, cfg);
  const VectorXd phi = phi_from_params(params, *ctx, z0,
                                       cfg.gamma != 0.0 ? cfg.gamma : 0.5 * ctx->mu_minus(),
                                       seed);
  EndFamilyMember m = build_end(ctx, phi, z0, cfg);
  const double R = params.value("R", 2.0 * z0);
  MinimizeConfig mc;
  mc.polish_iters = params.value("polish_iters", 40);
  TranslatorProfile tp = minimize_truncated_curve(m, R, mc);
  bw.csv("minimizer.csv", {"r", "z"}, {tp.curve.col(0), tp.curve.col(1)});
  bw.metadata["tip_z"] = tp.curve(0, 1);
  bw.metadata["energy_log"] = tp.energy_log;
  bw.certs.push_back({"minimizer_residual", "", "", "value_le", 1e-6, tp.residual});
  bw.certs.push_back({"minimizer_grad_norm", "", "", "value_le", 2e-3, tp.grad_norm});
}

void run_flow(const json& params, BundleWriter& bw) {
  ShootingConfig sc;
  sc.nodes = params.value("nodes", 512);
  ShrinkerSurface T = shoot_angenent_torus(3, sc);
  const std::string which = params.value("which", "inner");
  const double kap = params.value("kappa", 0.08);
  Eigen::MatrixX2d loop(T.prof.size(), 2);
  loop.col(0) = T.prof.w;
  loop.col(1) = T.prof.y;
  if (which != "stationary") {
    const double sgn = (which == "inner") ? -1.0 : 1.0;
    loop.col(0) += sgn * kap * T.prof.nu_w;
    loop.col(1) += sgn * kap * T.prof.nu_y;
  }
  FlowOptions fo;
  FlowRun run = run_rmcf(make_flow_state(loop), params.value("dtau", 4e-4),
                         params.value("tau_max", 4.0), fo);
  const int K = static_cast<int>(run.taus.size());
  VectorXd taus(K), rnd(K), mw(K), mx(K), dia(K);
  for (int i = 0; i < K; ++i) {
    taus[i] = run.taus[i];
    rnd[i] = run.roundness[i];
    mw[i] = run.min_w[i];
    mx[i] = run.min_Xnu[i];
    dia[i] = run.diameter[i];
  }
  bw.csv("flow.csv", {"tau", "roundness", "min_w", "min_Xnu", "diameter"},
         {taus, rnd, mw, mx, dia});
  bw.metadata["tau_event"] = run.tau_event;
  bw.metadata["final_topology"] = static_cast<int>(run.final_state.topology);
  if (which == "inner")
    bw.certs.push_back({"extinction_time_positive", "", "", "value_ge", 1e-6, run.tau_event});
  if (which == "outer")
    bw.certs.push_back({"star_shaped_after_crossing", "", "", "value_ge", 1e-9,
                        run.final_state.min_Xnu});
}

void run_fatten(const json& params, BundleWriter& bw) {
  ShootingConfig sc;
  sc.nodes = params.value("nodes", 512);
  ShrinkerSurface T = shoot_angenent_torus(3, sc);
  auto ctx = std::make_shared<EndContext>(make_end_context(T, 0, params.value("k_max", 8)));
  EndBuildConfig cfg = build_config(params);
  cfg.z_hi_factor = params.value("z_hi_factor", 150.0);
  cfg.ppd = params.value("ppd", 90);
  double z0 = params.value("z0", 240.0);
  EndFamilyMember m0 = build_end(ctx, VectorXd::Zero(ctx->index()), z0, cfg);
  const double R = params.value("R", 1.5 * z0);
  const double kappa_bar = 0.9 * T.inner_intercept;
  MinimizeConfig mc;
  mc.rings = params.value("rings", 24);
  mc.sectors = params.value("sectors", 36);
  mc.descent_max_iters = params.value("descent_max_iters", 1400);
  DeformConfig dc;
  dc.build = cfg;
  // default bracket: from the undeformed end to the fully collapse-shaped window
  const double psimax = ctx->spec.psi1.maxCoeff();
  const double a_hi = params.value(
      "a_hi", 0.12 / psimax * std::pow(0.73 * R * std::exp(1.2), -ctx->mu1()));
  const double a_lo = params.value("a_lo", 0.0);
  FattenBracket fb =
      fatten_probe(m0, a_lo, a_hi, R, kappa_bar, params.value("rel_tol", 1e-2), dc, mc);
  json rep;
  rep["a_minus"] = fb.a_minus;
  rep["a_plus"] = fb.a_plus;
  rep["bisections"] = fb.bisections;
  rep["refined_consistent"] = fb.refined_consistent;
  rep["kappa_bar"] = kappa_bar;
  rep["R"] = R;
  io::write_json(bw.dir / "bracket.json", rep);
  bw.metadata["bracket"] = rep;
  bw.certs.push_back({"bracket_ordered", "", "", "value_ge", 0.0, fb.a_plus - fb.a_minus});
}

}  // namespace

void validate_config(const json& config) {
  require(config, "command", "string", "");
  const std::string cmd = config.at("command").get<std::string>();
  static const char* known[] = {"shrinker", "spectrum", "modal",  "op",           "bowl",
                                "end",      "minimize", "flow",   "fatten-probe", "verify"};
  bool ok = false;
  for (const char* k : known) ok = ok || (cmd == k);
  if (!ok) throw DomainError("config/command: unknown command '" + cmd + "'");
  if (cmd != "verify") require(config, "output_dir", "string", "");
  if (config.contains("params") && !config.at("params").is_object())
    throw DomainError("config/params: expected object");
  if (config.contains("seed") && !config.at("seed").is_number())
    throw DomainError("config/seed: expected number");
}

RunResult run(const json& config) {
  try {
    validate_config(config);
    const std::string cmd = config.at("command").get<std::string>();
    const json params = config.value("params", json::object());
    const unsigned seed = config.value("seed", 0u);
    if (cmd == "verify") {
      require(config, "bundle", "string", "");
      return verify_bundle(config.at("bundle").get<std::string>());
    }
    BundleWriter bw(config.at("output_dir").get<std::string>(), config);
    if (cmd == "shrinker")
      run_shrinker(params, bw);
    else if (cmd == "spectrum")
      run_spectrum(params, bw);
    else if (cmd == "modal")
      run_modal(params, bw);
    else if (cmd == "op")
      run_op(params, bw);
    else if (cmd == "bowl")
      run_bowl(params, bw);
    else if (cmd == "end")
      run_end(params, bw, seed);
    else if (cmd == "minimize")
      run_minimize(params, bw, seed);
    else if (cmd == "flow")
      run_flow(params, bw);
    else if (cmd == "fatten-probe")
      run_fatten(params, bw);
    bw.finish();
    // self-check the freshly written certificates
    for (const auto& c : bw.certs) {
      const bool ok = (c.kind == "value_le" && c.value <= c.bound) ||
                      (c.kind == "value_ge" && c.value >= c.bound) ||
                      (c.kind == "min_ge" && c.value >= c.bound) ||
                      (c.kind == "max_abs_le" && c.value <= c.bound);
      if (!ok)
        return {3, "certificate failed: " + c.name + " (value " + std::to_string(c.value) +
                       " vs bound " + std::to_string(c.bound) + ")"};
    }
    return {0, "ok"};
  } catch (const HypothesisError& e) {
    return {2, std::string("hypothesis failure: ") + e.what()};
  } catch (const DomainError& e) {
    return {1, std::string("config/domain error: ") + e.what()};
  } catch (const NumericError& e) {
    return {3, std::string("numeric failure: ") + e.what()};
  }
}

RunResult verify_bundle(const fs::path& dir) {
  json meta;
  try {
    meta = io::read_json(dir / "metadata.json");
  } catch (const std::exception& e) {
    return {1, std::string("verify: ") + e.what()};
  }
  std::string report;
  if (meta.value("tolerance_version", kToleranceVersion) != kToleranceVersion)
    report += "warning: tolerance version differs from the current defaults\n";
  bool all_ok = true;
  for (const auto& cj : meta.value("certificates", json::array())) {
    const std::string name = cj.value("name", "?");
    const std::string kind = cj.value("kind", "value_le");
    const double bound = cj.value("bound", 0.0);
    double value = cj.value("value", 0.0);
    const std::string file = cj.value("file", "");
    if (!file.empty()) {
      // re-derive the value from the stored column
      try {
        auto cols = io::read_csv(dir / file);
        const std::string column = cj.value("column", "");
        bool found = false;
        for (auto& [cname, vals] : cols)
          if (cname == column) {
            value = (kind == "min_ge") ? vals.minCoeff() : vals.cwiseAbs().maxCoeff();
            found = true;
          }
        if (!found) {
          report += "fail: " + name + " (column missing)\n";
          all_ok = false;
          continue;
        }
      } catch (const std::exception& e) {
        return {1, std::string("verify: ") + e.what()};
      }
    }
    const bool ok = (kind == "value_le" && value <= bound) ||
                    (kind == "max_abs_le" && value <= bound) ||
                    (kind == "value_ge" && value >= bound) || (kind == "min_ge" && value >= bound);
    report += (ok ? "pass: " : "fail: ") + name + "\n";
    all_ok = all_ok && ok;
  }
  return {all_ok ? 0 : 3, report};
}

int main_entry(int argc, char** argv) {
  CLI::App app{"soliton-forge: constructive translating-soliton toolkit"};
  app.require_subcommand(0, 1);

  std::string config_file, output_dir = "out", bundle;
  long seed = 0;
  json params = json::object();
  app.add_option("--config", config_file, "run config JSON file");

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", output_dir, "output directory");
    sub->add_option("--seed", seed, "RNG seed");
  };
  auto opt_into = [&params](const std::string& key) {
    return [&params, key](const std::string& v) {
      try {
        params[key] = json::parse(v);
      } catch (...) {
        params[key] = v;
      }
    };
  };

  std::vector<std::pair<std::string, std::string>> subs = {
      {"shrinker", "build a self-shrinker (kind=sphere|torus)"},
      {"spectrum", "Jacobi spectrum of a shrinker"},
      {"modal", "degenerate modal ODE solves"},
      {"op", "translator operator diagnostics"},
      {"bowl", "bowl soliton graph and asymptotics"},
      {"end", "translating end family (action=build|deform|rate|match)"},
      {"minimize", "truncated I-minimizer with end boundary"},
      {"flow", "rescaled MCF of rotational profiles"},
      {"fatten-probe", "topology-transition bracket for torus ends"}};
  std::string chosen;
  for (auto& [name, desc] : subs) {
    CLI::App* sub = app.add_subcommand(name, desc);
    add_common(sub);
    sub->add_option_function<std::string>("--set", [&](const std::string& kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw CLI::ValidationError("--set expects key=value");
      opt_into(kv.substr(0, eq))(kv.substr(eq + 1));
    }, "set a params key, e.g. --set mu=-1")->take_all();
    sub->callback([&chosen, name = name] { chosen = name; });
    // frequent convenience flags
    if (name == "shrinker") {
      sub->add_option_function<std::string>("--kind", opt_into("kind"));
      sub->add_option_function<std::string>("--n", opt_into("n"));
    }
    if (name == "spectrum") sub->add_option_function<std::string>("--shrinker", opt_into("shrinker"));
    if (name == "modal") {
      sub->add_option_function<std::string>("--mu", opt_into("mu"));
      sub->add_option_function<std::string>("--alpha", opt_into("alpha"));
      sub->add_option_function<std::string>("--c0", opt_into("c0"));
    }
    if (name == "end") {
      sub->add_option_function<std::string>("--action", opt_into("action"));
      sub->add_option_function<std::string>("--z0", opt_into("z0"));
      sub->add_option_function<std::string>("--phi", opt_into("phi"));
    }
    if (name == "flow") sub->add_option_function<std::string>("--which", opt_into("which"));
  }
  CLI::App* ver = app.add_subcommand("verify", "re-check a bundle's certificates");
  ver->add_option("bundle", bundle, "bundle directory")->required();
  ver->callback([&chosen] { chosen = "verify"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  json config;
  if (!config_file.empty()) {
    std::ifstream in(config_file);
    if (!in) {
      fprintf(stderr, "cannot open config %s\n", config_file.c_str());
      return 1;
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
      config = json::parse(text);
    } catch (const json::parse_error& e) {
      size_t line = 1;
      for (size_t i = 0; i < std::min(e.byte, text.size()); ++i)
        if (text[i] == '\n') ++line;
      fprintf(stderr, "config parse error at line %zu: %s\n", line, e.what());
      return 1;
    }
  } else {
    if (chosen.empty()) {
      fprintf(stderr, "no subcommand; see --help\n");
      return 1;
    }
    config["command"] = chosen;
    config["params"] = params;
    config["seed"] = seed;
    if (chosen == "verify")
      config["bundle"] = bundle;
    else
      config["output_dir"] = output_dir;
  }

  const RunResult res = run(config);
  if (!res.message.empty() && res.message != "ok") fprintf(stderr, "%s\n", res.message.c_str());
  return res.exit_code;
}

}  // namespace soliton::cli
