#include "specmax/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "specmax/error.hpp"
#include "specmax/oracle.hpp"
#include "specmax/random_field.hpp"
#include "specmax/report.hpp"
#include "specmax/variation.hpp"

namespace specmax {

namespace {

void ensure_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw config_error("cannot create output directory: " + cfg.out_dir);
}

ConformalFactor starting_factor(const DiscreteManifold& m, const RunConfig& cfg) {
  if (cfg.start == "constant") return constant_factor(m);
  Rng rng(cfg.seed);
  return make_conformal(m, smooth_positive_field(m, rng, cfg.start_amplitude));
}

void describe_manifold(Report& rep, const DiscreteManifold& m) {
  rep.section("manifold");
  rep.kv("nodes", static_cast<long>(m.node_count));
  rep.kv("dim", static_cast<long>(m.dim));
  rep.kv("volume", m.total_weight());
  rep.kv("edges", static_cast<long>(m.edges.size()));
  rep.kv("factors", static_cast<long>(m.factors.size()));
}

}  // namespace

int cmd_spectrum(const RunConfig& cfg) {
  ensure_out_dir(cfg);
  DiscreteManifold m = instantiate_manifold(cfg);
  ConformalFactor u = constant_factor(m);

  EigenOptions o = eigen_options(cfg);
  o.need_inertia = true;
  SpectrumSlice s = generalized_spectrum(m, u, cfg.count, o);
  NegativeCount nc = negative_count(m, u, o);
  FirstEigenSign fes = first_eigen_sign(m, u, o);

  Report rep("spectrum");
  describe_manifold(rep, m);

  rep.section("spectrum");
  rep.kv("count", static_cast<long>(s.eigenvalues.size()));
  const double probe_tol = std::max(o.solver_tol, 1e-6);
  for (Eigen::Index j = 0; j < s.eigenvalues.size(); ++j) {
    char key[32];
    std::snprintf(key, sizeof key, "lambda[%ld]", static_cast<long>(j + 1));
    const double bound = j < s.eigenvalues.size() - std::max(0, o.loose_tail)
                             ? o.solver_tol
                             : probe_tol;
    rep.checked(key, s.eigenvalues(j), "residual_bound", bound,
                s.residuals(j) <= bound);
  }
  rep.kv("nu", static_cast<long>(nc.nu));
  rep.kv("nu_certified", s.nu_certified || m.node_count <= o.dense_threshold);
  rep.kv("cluster2_size", static_cast<long>(s.cluster2.size()));
  {
    std::vector<double> cl;
    for (int idx : s.cluster2) cl.push_back(static_cast<double>(idx + 1));
    rep.array("cluster2_indices", cl);
  }
  rep.kv("dense_path", s.dense_path);

  rep.section("checks");
  rep.kv("first_eigen_constant_sign", fes.constant_sign);
  rep.kv("first_eigen_simple", fes.simple);
  rep.kv("gap_lambda2_lambda1", fes.gap);
  if (fes.simple) {
    const double l2o = lambda2_orthogonal(m, u, o);
    rep.checked("lambda2_orthogonal_vs_full", std::abs(l2o - s.eigenvalues(1)),
                "tol", 1e-9, std::abs(l2o - s.eigenvalues(1)) <= 1e-9);
  }

  rep.section("warnings");
  const bool degenerate = nc.nu <= 1;
  rep.kv("maximization_degenerate", degenerate);
  if (degenerate)
    rep.kv("warning", std::string("nu([g]) <= 1: maximization problem degenerate"));
  rep.kv("kernel_warning", nc.kernel_warning || s.kernel_warning);
  if (nc.kernel_warning || s.kernel_warning)
    rep.kv("warning_kernel",
           std::string("eigenvalue within null_tol of 0: assumption 0 not in "
                       "Spec(L_g) at risk"));

  rep.write(cfg.out_dir + "/spectrum_report.txt");
  std::cout << rep.str();
  return kExitOk;
}

int cmd_optimize(const RunConfig& cfg) {
  ensure_out_dir(cfg);
  DiscreteManifold m = instantiate_manifold(cfg);
  ConformalFactor u0 = starting_factor(m, cfg);

  OptimParams params = optimizer_params(cfg, m);
  params.checkpoint_dir = cfg.out_dir;
  ExtremalReport rep = continuation(m, u0, cfg.schedule, params);

  Report out("optimize");
  describe_manifold(out, m);

  out.section("result");
  out.kv("classification", std::string(to_string(rep.classification)));
  out.kv("k", static_cast<long>(rep.k));
  out.kv("lambda2", rep.lambda2);
  out.kv("f2", rep.f2);
  out.kv("polished", rep.polished);
  out.kv("polish_iterations", static_cast<long>(rep.polish_iterations));
  out.kv("polish_residual", rep.polish_residual);
  out.kv("residual_slope", rep.residual_slope);
  out.kv("beta_min", rep.beta_min);
  if (!rep.unresolved_reason.empty())
    out.kv("unresolved_reason", rep.unresolved_reason);

  if (rep.classification == Classification::Nodal) {
    out.section("nodal");
    out.checked("u_vs_absphi_rel_sup", rep.detail.u_vs_absphi_rel_sup, "tol",
                10.0 * params.eul_tol,
                rep.detail.u_vs_absphi_rel_sup <= 10.0 * params.eul_tol);
    out.checked("nodal_residual", rep.detail.nodal_residual, "tol",
                10.0 * params.eul_tol,
                rep.detail.nodal_residual <= 10.0 * params.eul_tol);
    out.kv("sign_change", rep.detail.sign_change);
  } else if (rep.classification == Classification::HarmonicMap) {
    out.section("harmonic_map");
    out.checked("psi_sq_sum_err", rep.detail.psi_sq_sum_err, "tol",
                10.0 * params.eul_tol,
                rep.detail.psi_sq_sum_err <= 10.0 * params.eul_tol);
    out.kv("harmonic_residual", rep.detail.harmonic_residual);
    out.kv("support_restricted", rep.detail.support_restricted);
  }

  out.section("stages");
  out.kv("count", static_cast<long>(rep.stages.size()));
  for (size_t i = 0; i < rep.stages.size(); ++i) {
    const EpsStage& st = rep.stages[i];
    char prefix[32];
    std::snprintf(prefix, sizeof prefix, "stage[%zu].", i);
    const std::string p(prefix);
    out.kv(p + "eps", st.eps);
    out.kv(p + "lambda2", st.lambda2);
    out.kv(p + "f2eps", st.f2eps);
    out.kv(p + "gamma1", st.gamma1);
    out.kv(p + "residual_l2", st.residual_l2);
    out.kv(p + "limit_residual", st.limit_residual);
    out.kv(p + "k_effective", static_cast<long>(st.k_effective));
    out.kv(p + "iterations", static_cast<long>(st.iterations));
    out.kv(p + "converged", st.converged);
    out.kv(p + "from_checkpoint", st.from_checkpoint);
  }

  // per-iteration diagnostics mirror the monitored a-priori bounds
  std::vector<std::vector<double>> rows;
  for (const IterationStat& h : rep.history)
    rows.push_back({h.eps, static_cast<double>(h.iter), h.f2eps, h.lambda2,
                    h.residual_l2, h.sup_u, h.inf_u, h.lipschitz,
                    h.int_u_minus_eps, h.eps_int_u_minus_eps_minus_n, h.gamma1,
                    h.step});
  write_csv(cfg.out_dir + "/diagnostics.csv",
            {"eps", "iter", "f2eps", "lambda2", "residual_l2", "sup_u", "inf_u",
             "lipschitz", "int_u_minus_eps", "eps_int_u_minus_eps_minus_n",
             "gamma1", "step"},
            rows);

  Checkpoint final_cp;
  final_cp.eps = 0.0;
  final_cp.lambda2 = rep.lambda2;
  final_cp.f2eps = rep.f2;
  final_cp.converged = rep.classification != Classification::Unresolved;
  final_cp.u = rep.u_final.values;
  write_checkpoint(cfg.out_dir + "/final_state.txt", final_cp);

  out.write(cfg.out_dir + "/optimize_report.txt");
  std::cout << out.str();
  return rep.classification != Classification::Unresolved ? kExitOk
                                                          : kExitDiverged;
}

int cmd_verify(const RunConfig& cfg) {
  ensure_out_dir(cfg);
  DiscreteManifold m = instantiate_manifold(cfg);
  EigenOptions o = eigen_options(cfg);
  Rng root(cfg.seed);
  Report rep("verify");
  describe_manifold(rep, m);

  const double n_exp = exponent_N(m.dim);

  // ---- one-sided derivatives vs finite differences
  rep.section("fd_derivatives");
  const int fd_cases = 3;
  for (int c = 0; c < fd_cases; ++c) {
    Rng rng = root.fork(100 + static_cast<uint64_t>(c));
    ConformalFactor u = normalize_conformal(
        m, make_conformal(m, smooth_positive_field(m, rng, 0.2)));
    Eigen::VectorXd h = smooth_bounded_field(m, rng, 1.0);
    FdReport fd = fd_derivative_check(m, u, h, default_t_list(), o);
    char key[64];
    std::snprintf(key, sizeof key, "case[%d].", c);
    const std::string p(key);
    rep.kv(p + "right", fd.pair.right);
    rep.kv(p + "left", fd.pair.left);
    rep.checked(p + "right_le_left", fd.pair.left - fd.pair.right, "min", -1e-12,
                fd.pair.left - fd.pair.right >= -1e-12);
    if (fd.order_estimable) {
      rep.checked(p + "order_right", fd.fitted_order_right, "min", 0.9,
                  fd.fitted_order_right >= 0.9);
      rep.checked(p + "order_left", fd.fitted_order_left, "min", 0.9,
                  fd.fitted_order_left >= 0.9);
    } else {
      rep.checked(p + "max_deviation_at_noise_floor", fd.max_deviation, "tol",
                  1e-6, fd.max_deviation <= 1e-6);
    }
  }
  // constructed multiplicity case at the symmetric point
  {
    ConformalFactor one = constant_factor(m);
    SpectrumSlice s = generalized_spectrum(m, one, 4, o);
    if (s.cluster2.size() >= 2 && m.coords.cols() > 0) {
      int col = 0;
      for (const FactorInfo& f : m.factors)
        if (f.kind == "circle" && std::abs(f.radius - 1.0) < 1e-12)
          col = f.coord_col;
      Eigen::VectorXd h = (2.0 * m.coords.col(col)).array().cos().matrix();
      FdReport fd = fd_derivative_check(m, one, h, default_t_list(), o);
      rep.kv("constructed.right", fd.pair.right);
      rep.kv("constructed.left", fd.pair.left);
      rep.checked("constructed.separation", fd.pair.left - fd.pair.right, "min",
                  1e-4, fd.pair.left - fd.pair.right > 1e-4);
      rep.checked("constructed.order_right", fd.fitted_order_right, "min", 0.9,
                  fd.fitted_order_right >= 0.9);
      rep.checked("constructed.order_left", fd.fitted_order_left, "min", 0.9,
                  fd.fitted_order_left >= 0.9);
    } else {
      rep.kv("constructed.skipped",
             std::string("lambda_2 numerically simple at u = 1"));
    }
  }

  // ---- continuity sandwich
  rep.section("continuity_sandwich");
  for (int c = 0; c < 2; ++c) {
    Rng rng = root.fork(200 + static_cast<uint64_t>(c));
    ConformalFactor u = normalize_conformal(
        m, make_conformal(m, smooth_positive_field(m, rng, 0.15)));
    Eigen::VectorXd h = smooth_bounded_field(m, rng, 1.0);
    SandwichReport sw =
        continuity_sandwich_check(m, u, h, {0.2, 0.1, 0.05}, o);
    char key[64];
    std::snprintf(key, sizeof key, "case[%d].", c);
    const std::string p(key);
    rep.checked(p + "bounds_hold", sw.all_hold ? 1.0 : 0.0, "min", 1.0,
                sw.all_hold);
    const double cont_bound =
        3.0 * (n_exp - 2.0) *
            std::max(std::abs(sw.lambda1), std::abs(sw.lambda2)) *
            h.cwiseAbs().maxCoeff() +
        1.0;
    rep.checked(p + "lambda2_continuity_constant", sw.lambda2_continuity_constant,
                "max", cont_bound,
                sw.lambda2_continuity_constant <= cont_bound);
  }

  // ---- maximality sampling
  rep.section("maximality");
  MaximalityReport mx = maximality_sample_test(m, cfg.trials, cfg.seed,
                                               cfg.maximality_tol, cfg.out_dir,
                                               cfg.threads);
  rep.kv("trials", static_cast<long>(mx.trials));
  rep.kv("f2_const", mx.f2_const);
  rep.checked("violations", static_cast<double>(mx.violations), "max", 0.0,
              mx.violations == 0);
  rep.kv("worst_gap", mx.worst_gap);
  rep.array("nearest_equality_cv", mx.nearest_equality_cv);
  if (cfg.trials >= 100) {
    double worst_cv = 0.0;
    for (double cv : mx.nearest_equality_cv) worst_cv = std::max(worst_cv, cv);
    rep.checked("nearest_equality_cv_max", worst_cv, "max", 1e-2,
                worst_cv < 1e-2);
  }
  {
    // equality case: a constant field must reproduce F2(1) to rounding
    ConformalFactor uc = constant_factor(m, 0.7);
    const double f2c = evaluate_f2(m, uc, o);
    const double diff = std::abs(f2c - mx.f2_const);
    rep.checked("constant_equality_gap", diff, "tol", cfg.maximality_tol,
                diff <= cfg.maximality_tol);
  }
  if (!mx.failing_dump.empty()) rep.kv("failing_dump", mx.failing_dump);

  // ---- worked-example inequalities
  const int ineq_trials = std::min(cfg.trials, 50);
  rep.section("key_inequality");
  {
    KeyInequalityReport k1 = key_inequality_check(m, constant_factor(m), o);
    rep.checked("equality_at_constant", std::abs(k1.margin), "tol", 1e-8,
                std::abs(k1.margin) <= 1e-8);
    int holds = 0;
    for (int t = 0; t < ineq_trials; ++t) {
      Rng rng = root.fork(300 + static_cast<uint64_t>(t));
      ConformalFactor u =
          make_conformal(m, smooth_positive_field(m, rng, 0.3));
      KeyInequalityReport kr = key_inequality_check(m, u, o);
      if (kr.holds) ++holds;
    }
    rep.checked("holds", static_cast<double>(holds), "min",
                static_cast<double>(ineq_trials), holds == ineq_trials);
  }

  rep.section("theta_sweep");
  {
    ThetaSweepReport t1 = theta_sweep(m, constant_factor(m), 4096, o);
    rep.checked("constant_f_spread",
                std::abs(t1.max_f_grid - t1.lambda2_tilde), "tol", 1e-8,
                std::abs(t1.max_f_grid - t1.lambda2_tilde) <= 1e-8);
    int holds = 0, matches = 0;
    for (int t = 0; t < ineq_trials; ++t) {
      Rng rng = root.fork(400 + static_cast<uint64_t>(t));
      ConformalFactor u =
          make_conformal(m, smooth_positive_field(m, rng, 0.3));
      ThetaSweepReport tr = theta_sweep(m, u, 4096, o);
      if (tr.bound_holds) ++holds;
      if (tr.case1 || tr.match_error <= 1e-8 * (1.0 + std::abs(tr.pen_value)))
        ++matches;
    }
    rep.checked("bound_holds", static_cast<double>(holds), "min",
                static_cast<double>(ineq_trials), holds == ineq_trials);
    rep.checked("critical_point_matches", static_cast<double>(matches), "min",
                static_cast<double>(ineq_trials), matches == ineq_trials);
  }

  rep.write(cfg.out_dir + "/verify_report.txt");
  std::cout << rep.str();
  if (!rep.all_passed()) {
    std::cerr << "verification failed in:";
    for (const std::string& f : rep.failures()) std::cerr << " " << f;
    std::cerr << "\n";
    return kExitVerifyFailed;
  }
  return kExitOk;
}

int cmd_report(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.out_dir);
  if (!fs::exists(dir))
    throw config_error("output directory does not exist: " + cfg.out_dir);

  bool found = false;
  const fs::path opt = dir / "optimize_report.txt";
  if (fs::exists(opt)) {
    std::ifstream in(opt);
    std::cout << in.rdbuf();
    found = true;
  }
  std::vector<fs::path> cps;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("checkpoint_", 0) == 0 && name.find(".txt") != std::string::npos)
      cps.push_back(e.path());
  }
  std::sort(cps.begin(), cps.end());
  for (const auto& p : cps) {
    Checkpoint cp = read_checkpoint(p.string());
    std::printf("%s: eps=%.6g lambda2=%.12g residual_l2=%.3e k=%d converged=%d\n",
                p.filename().string().c_str(), cp.eps, cp.lambda2,
                cp.residual_l2, cp.k_effective, cp.converged ? 1 : 0);
    found = true;
  }
  if (!found)
    throw config_error("no reports or checkpoints under: " + cfg.out_dir);
  return kExitOk;
}

}  // namespace specmax
