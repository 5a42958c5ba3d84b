#include "specmax/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "specmax/error.hpp"
#include "specmax/simplex_lsq.hpp"

namespace specmax {

namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

double f2_from_parts(double lambda2, double vol_n, double n_exp) {
  return lambda2 * std::pow(vol_n, (n_exp - 2.0) / n_exp);
}

double f2eps_from_parts(double lambda2, double vol_n, double int_u_minus_eps,
                        double eps, double n_exp) {
  return f2_from_parts(lambda2, vol_n, n_exp) -
         int_u_minus_eps * std::pow(vol_n, eps / n_exp);
}

// monotone scalar equation gamma1 t^2 - gamma2 t^{-(eps+N-2)} = y, y >= 0
double f_inverse(double y, const RegParams& rp, double n_exp) {
  if (!(y >= 0.0)) y = 0.0;
  if (rp.gamma2 <= 0.0) return std::sqrt(y / rp.gamma1);

  const double p = rp.epsilon + n_exp - 2.0;
  const double lo0 = std::pow(rp.gamma2 / rp.gamma1, 1.0 / (rp.epsilon + n_exp));
  double a = lo0;           // f(a) <= 0
  double b = std::sqrt(y / rp.gamma1) + lo0;  // f(b) >= y ... >= 0
  double t = std::max(std::sqrt(y / rp.gamma1), lo0);
  for (int it = 0; it < 100; ++it) {
    const double tp = std::pow(t, -p);
    const double f = rp.gamma1 * t * t - rp.gamma2 * tp - y;
    const double scale = rp.gamma1 * t * t + rp.gamma2 * tp + y;
    if (std::abs(f) <= 1e-15 * scale) return t;
    if (f > 0.0)
      b = t;
    else
      a = t;
    const double fp = 2.0 * rp.gamma1 * t + p * rp.gamma2 * std::pow(t, -p - 1.0);
    double tn = t - f / fp;
    if (!(tn > a && tn < b)) tn = 0.5 * (a + b);
    if (std::abs(tn - t) <= 1e-16 * t) return tn;
    t = tn;
  }
  return t;
}

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return 0.0;
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-300) return 0.0;
  return (n * sxy - sx * sy) / denom;
}

EigenOptions solver_opts(const DiscreteManifold& m, const OptimParams& params,
                         int nu_hint) {
  EigenOptions o = params.eig;
  const int nneg = nu_hint > 0 ? nu_hint : 3;
  o.count = std::max(4, nneg + 1);
  o.loose_tail = 1;
  (void)m;
  return o;
}

// certificate candidate modes: eigenvalues above lambda_2 that are negative
// and within the window; the fit decides which of them carry weight.
std::vector<int> certificate_modes(const SpectrumSlice& s, double window,
                                   double null_tol) {
  std::vector<int> modes;
  const double l2 = s.eigenvalues(1);
  for (int j = 1; j < s.eigenvalues.size(); ++j) {
    const double l = s.eigenvalues(j);
    if (l >= -null_tol) break;
    if (l - l2 <= window) modes.push_back(j);
  }
  if (modes.empty()) modes.push_back(1);
  return modes;
}

struct FitData {
  Eigen::VectorXd c;
  std::vector<int> modes;
  double divided_residual = 0.0;
};

FitData fit_simplex_on_modes(const DiscreteManifold& m, const SpectrumSlice& s,
                             const std::vector<int>& modes, const Vec& target) {
  Mat a(m.node_count, static_cast<Eigen::Index>(modes.size()));
  for (size_t j = 0; j < modes.size(); ++j)
    a.col(static_cast<Eigen::Index>(j)) =
        s.eigenvectors.col(modes[j]).array().square().matrix();
  SimplexFit fit = simplex_lsq(a, target, m.weights);
  FitData out;
  out.c = fit.c;
  out.modes = modes;
  out.divided_residual = fit.objective;
  return out;
}

}  // namespace

const char* to_string(Classification c) {
  switch (c) {
    case Classification::Nodal:
      return "Nodal";
    case Classification::HarmonicMap:
      return "HarmonicMap";
    default:
      return "Unresolved";
  }
}

double lipschitz_proxy(const DiscreteManifold& m, const Vec& values) {
  double worst = 0.0;
  for (const Edge& e : m.edges)
    worst = std::max(worst, std::abs(values(e.i) - values(e.j)) / e.length);
  return worst;
}

RegParams compute_reg_params(const DiscreteManifold& m, const ConformalFactor& u,
                             double eps, double lambda2) {
  if (!(eps > 0.0)) throw config_error("epsilon must be positive");
  if (!(lambda2 < 0.0))
    throw config_error("regularization requires lambda_2(u) < 0 (is nu > 1?)");
  RegParams rp;
  rp.epsilon = eps;
  const double int_u_minus_eps = integral_u_pow(m, u, -eps);
  rp.gamma1 = 1.0 - (1.0 / (u.N - 2.0)) * (eps / lambda2) * int_u_minus_eps;
  rp.gamma2 = (1.0 / (u.N - 2.0)) * eps / std::abs(lambda2);
  rp.beta = 2.0 / (eps + u.N);
  return rp;
}

double evaluate_f2(const DiscreteManifold& m, const ConformalFactor& u,
                   const EigenOptions& opts) {
  EigenOptions o = opts;
  o.count = std::max(opts.count, 4);
  o.loose_tail = std::max(opts.loose_tail, 1);
  SpectrumSlice s = generalized_spectrum(m, u, o.count, o);
  return f2_from_parts(s.eigenvalues(1), conformal_volume(m, u), u.N);
}

double evaluate_f2eps(const DiscreteManifold& m, const ConformalFactor& u,
                      double eps, const EigenOptions& opts) {
  if (!(eps > 0.0)) throw config_error("epsilon must be positive");
  if (!u.strictly_positive())
    throw config_error("not in D_eps: conformal factor vanishes at a node");
  EigenOptions o = opts;
  o.count = std::max(opts.count, 4);
  o.loose_tail = std::max(opts.loose_tail, 1);
  SpectrumSlice s = generalized_spectrum(m, u, o.count, o);
  return f2eps_from_parts(s.eigenvalues(1), conformal_volume(m, u),
                          integral_u_pow(m, u, -eps), eps, u.N);
}

EulerCertificate euler_certificate(const DiscreteManifold& m,
                                   const ConformalFactor& u, double eps,
                                   const SpectrumSlice& s,
                                   const OptimParams& params) {
  if (s.eigenvalues.size() < 2)
    throw config_error("certificate needs at least two eigenvalues");
  if (!u.strictly_positive())
    throw config_error("certificate requires a strictly positive factor");
  const double l1 = s.eigenvalues(0);
  const double l2 = s.eigenvalues(1);
  if (l2 - l1 <= params.eig.cluster_tol_rel * std::abs(l2))
    throw diverged_error("nu or connectivity violated: lambda_2 cluster "
                         "collides with lambda_1");

  RegParams rp = compute_reg_params(m, u, eps, l2);
  const double window =
      std::max(params.eig.cluster_tol_rel * std::abs(l2),
               params.cert_window_frac * (l2 - l1));
  std::vector<int> modes = certificate_modes(s, window, params.eig.null_tol);
  if (s.nu >= 0 && static_cast<int>(modes.size()) > s.nu)
    throw config_error("certificate cluster dimension exceeds nu: cluster_tol "
                       "too loose");

  const Eigen::ArrayXd uv = u.values.array();
  Vec target = (rp.gamma1 * uv.square() -
                rp.gamma2 * uv.pow(2.0 - u.N - eps))
                   .matrix();
  FitData fit = fit_simplex_on_modes(m, s, modes, target);

  EulerCertificate cert;
  cert.params = rp;
  cert.modes = fit.modes;
  cert.c = fit.c;

  Eigen::ArrayXd phi_sum = Eigen::ArrayXd::Zero(m.node_count);
  for (size_t j = 0; j < fit.modes.size(); ++j)
    phi_sum += fit.c(static_cast<Eigen::Index>(j)) *
               s.eigenvectors.col(fit.modes[j]).array().square();

  const Eigen::ArrayXd undivided = rp.gamma1 * uv.pow(u.N) -
                                   uv.pow(u.N - 2.0) * phi_sum -
                                   rp.gamma2 * uv.pow(-eps);
  cert.residual_l2 =
      std::sqrt((m.weights.array() * undivided.square()).sum());
  cert.residual_sup = undivided.abs().maxCoeff();
  cert.limit_residual =
      (m.weights.array() * (rp.gamma1 * uv.square() - phi_sum).abs()).sum();
  cert.k_effective = 0;
  for (Eigen::Index j = 0; j < cert.c.size(); ++j)
    if (cert.c(j) > params.c_drop_tol) ++cert.k_effective;
  return cert;
}

MaximizeResult maximize_f2eps(const DiscreteManifold& m, const ConformalFactor& u0,
                              double eps, const OptimParams& params) {
  if (!(eps > 0.0)) throw config_error("epsilon must be positive");
  if (!u0.strictly_positive())
    throw config_error("starting factor must be strictly positive (D_eps)");

  MaximizeResult res;
  res.u = normalize_conformal(m, u0);

  EigenOptions o = solver_opts(m, params, -1);
  o.need_inertia = true;
  res.spectrum = generalized_spectrum(m, res.u, o.count, o);
  const int nu = res.spectrum.nu >= 0
                     ? res.spectrum.nu
                     : negative_count(m, res.u, params.eig).nu;
  o = solver_opts(m, params, nu);
  if (static_cast<int>(res.spectrum.eigenvalues.size()) < o.count)
    res.spectrum = generalized_spectrum(m, res.u, o.count, o);

  double f_cur = f2eps_from_parts(res.spectrum.eigenvalues(1), 1.0,
                                  integral_u_pow(m, res.u, -eps), eps, res.u.N);

  Mat warm_store;
  int stalls = 0;
  for (int iter = 1; iter <= params.max_iters; ++iter) {
    res.iterations = iter;
    res.certificate = euler_certificate(m, res.u, eps, res.spectrum, params);

    IterationStat st;
    st.iter = iter;
    st.eps = eps;
    st.f2eps = f_cur;
    st.lambda2 = res.spectrum.eigenvalues(1);
    st.residual_l2 = res.certificate.residual_l2;
    st.sup_u = res.u.values.maxCoeff();
    st.inf_u = res.u.values.minCoeff();
    st.lipschitz = lipschitz_proxy(m, res.u.values);
    st.int_u_minus_eps = integral_u_pow(m, res.u, -eps);
    st.eps_int_u_minus_eps_minus_n =
        eps * integral_u_pow(m, res.u, -eps - res.u.N);
    st.gamma1 = res.certificate.params.gamma1;

    if (res.certificate.residual_l2 <= params.eul_tol) {
      res.history.push_back(st);
      res.converged = true;
      break;
    }

    // nodewise monotone update u <- f^{-1}(sum c phi^2)
    Eigen::ArrayXd phi_sum = Eigen::ArrayXd::Zero(m.node_count);
    for (size_t j = 0; j < res.certificate.modes.size(); ++j)
      phi_sum += res.certificate.c(static_cast<Eigen::Index>(j)) *
                 res.spectrum.eigenvectors.col(res.certificate.modes[j])
                     .array()
                     .square();
    Vec unew(m.node_count);
    for (Eigen::Index i = 0; i < m.node_count; ++i)
      unew(i) = f_inverse(phi_sum(i), res.certificate.params, res.u.N);
    ConformalFactor u_new = normalize_conformal(m, make_conformal(m, unew));

    warm_store = res.spectrum.eigenvectors;
    EigenOptions ow = o;
    ow.warm = &warm_store;
    ow.sigma_hint = res.spectrum.eigenvalues(0) -
                    std::max(1.0, res.spectrum.eigenvalues(1) -
                                      res.spectrum.eigenvalues(0));

    double s_damp = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 11; ++bt) {
      Vec cand_vals =
          (res.u.values.array().pow(1.0 - s_damp) *
           u_new.values.array().pow(s_damp))
              .matrix();
      ConformalFactor u_cand = normalize_conformal(m, make_conformal(m, cand_vals));
      SpectrumSlice s_cand = generalized_spectrum(m, u_cand, o.count, ow);
      const double f_cand =
          f2eps_from_parts(s_cand.eigenvalues(1), 1.0,
                           integral_u_pow(m, u_cand, -eps), eps, u_cand.N);
      if (f_cand >= f_cur - params.backtrack_tol) {
        res.u = u_cand;
        res.spectrum = s_cand;
        f_cur = f_cand;
        accepted = true;
        break;
      }
      s_damp *= 0.5;
    }
    st.step = accepted ? s_damp : 0.0;
    res.history.push_back(st);

    if (!accepted) {
      // cannot move without losing more than backtrack_tol
      ++stalls;
      if (stalls >= 2) {
        res.stalled = true;
        break;
      }
    } else {
      stalls = 0;
    }
  }

  if (!res.converged) {
    res.certificate = euler_certificate(m, res.u, eps, res.spectrum, params);
    res.converged = res.certificate.residual_l2 <= params.eul_tol;
  }
  res.f2eps = f_cur;
  return res;
}

ClassifyResult classify(const DiscreteManifold& m, const ConformalFactor& u,
                        const SpectrumSlice& s, const Vec& c,
                        const std::vector<int>& modes,
                        const OptimParams& params) {
  ClassifyResult out;
  std::vector<int> live;
  for (size_t j = 0; j < modes.size(); ++j)
    if (c(static_cast<Eigen::Index>(j)) > params.c_drop_tol)
      live.push_back(static_cast<int>(j));
  out.k = static_cast<int>(live.size());
  if (out.k == 0) {
    out.note = "all simplex weights below c_drop_tol";
    return out;
  }

  const double umax = u.values.maxCoeff();
  const double tol10 = 10.0 * params.eul_tol;

  if (out.k == 1) {
    const Vec& phi = s.eigenvectors.col(modes[static_cast<size_t>(live[0])]);
    const double lambda2 = s.eigenvalues(1);

    out.u_vs_absphi_rel_sup =
        (u.values - phi.cwiseAbs()).cwiseAbs().maxCoeff() / umax;

    // strong-form defect of K phi = lambda2 M |phi|^{N-2} phi
    Vec kphi = m.op * phi;
    Vec rhs = lambda2 * m.weights.array().matrix().asDiagonal() *
              (phi.array().abs().pow(u.N - 2.0) * phi.array()).matrix();
    Vec r = (kphi - rhs).cwiseQuotient(m.weights);
    out.nodal_residual = std::sqrt((m.weights.array() * r.array().square()).sum());

    const double stol = params.sign_tol * phi.cwiseAbs().maxCoeff();
    out.sign_change = false;
    for (const Edge& e : m.edges) {
      if (!u.support(e.i) || !u.support(e.j)) continue;
      if ((phi(e.i) > stol && phi(e.j) < -stol) ||
          (phi(e.i) < -stol && phi(e.j) > stol)) {
        out.sign_change = true;
        break;
      }
    }

    const bool pass = out.sign_change && out.u_vs_absphi_rel_sup <= tol10;
    out.kind = pass ? Classification::Nodal : Classification::Unresolved;
    if (!pass)
      out.note = out.sign_change ? "u differs from |phi| beyond tolerance"
                                 : "phi does not change sign";
    return out;
  }

  // harmonic branch: psi_i = sqrt(c_i) phi_i / u on the support of u
  const double support_floor = 1e-12 * umax;
  std::vector<int> nodes;
  for (Eigen::Index i = 0; i < m.node_count; ++i)
    if (u.values(i) > support_floor) nodes.push_back(static_cast<int>(i));
  out.support_restricted = static_cast<Eigen::Index>(nodes.size()) < m.node_count;

  Mat psi(m.node_count, out.k);
  psi.setZero();
  for (int jj = 0; jj < out.k; ++jj) {
    const int mode = modes[static_cast<size_t>(live[jj])];
    const double cj = c(live[jj]);
    for (int i : nodes)
      psi(i, jj) = std::sqrt(cj) * s.eigenvectors(i, mode) / u.values(i);
  }

  double sum_err = 0.0;
  for (int i : nodes)
    sum_err = std::max(sum_err, std::abs(psi.row(i).squaredNorm() - 1.0));
  out.psi_sq_sum_err = sum_err;

  // weak harmonic-map defect in the conformal metric: the u^2-weighted
  // stiffness against the gradient-density right-hand side
  Vec rho = Vec::Zero(m.node_count);
  for (const Edge& e : m.edges) {
    for (int jj = 0; jj < out.k; ++jj) {
      const double diff = psi(e.i, jj) - psi(e.j, jj);
      const double en = 0.5 * e.stiffness * diff * diff;
      rho(e.i) += en / m.weights(e.i);
      rho(e.j) += en / m.weights(e.j);
    }
  }
  double worst = 0.0;
  double scale = 1.0;
  for (int i : nodes)
    scale = std::max(scale, u.values(i) * u.values(i) * rho(i));
  for (int jj = 0; jj < out.k; ++jj) {
    Vec lhs = Vec::Zero(m.node_count);
    for (const Edge& e : m.edges) {
      const double wu2 =
          0.5 * (u.values(e.i) * u.values(e.i) + u.values(e.j) * u.values(e.j));
      const double flux = e.stiffness * wu2 * (psi(e.i, jj) - psi(e.j, jj));
      lhs(e.i) += flux;
      lhs(e.j) -= flux;
    }
    double acc = 0.0;
    for (int i : nodes) {
      const double ri =
          (lhs(i) - m.weights(i) * u.values(i) * u.values(i) * rho(i) * psi(i, jj)) /
          m.weights(i);
      acc += m.weights(i) * ri * ri;
    }
    worst = std::max(worst, std::sqrt(acc) / scale);
  }
  out.harmonic_residual = worst;

  const bool pass = out.psi_sq_sum_err <= tol10;
  out.kind = pass ? Classification::HarmonicMap : Classification::Unresolved;
  if (!pass) out.note = "sum psi_i^2 deviates from 1 beyond tolerance";
  return out;
}

namespace {

struct LimitPolish {
  ConformalFactor u;
  SpectrumSlice spectrum;
  Eigen::VectorXd c;
  std::vector<int> modes;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// eps -> 0 stage: fixed point of u <- sqrt(sum c_i phi_i^2), the discrete
// counterpart of the limit identity u^2 = sum c_i phi_i^2.
LimitPolish limit_polish(const DiscreteManifold& m, const ConformalFactor& u0,
                         int nu, const OptimParams& params) {
  LimitPolish lp;
  lp.u = normalize_conformal(m, u0);
  EigenOptions o = solver_opts(m, params, nu);
  Mat warm_store;

  double f_cur = -std::numeric_limits<double>::infinity();
  for (int iter = 1; iter <= params.limit_max_iters; ++iter) {
    lp.iterations = iter;
    EigenOptions ow = o;
    if (warm_store.cols() > 0) {
      ow.warm = &warm_store;
      ow.sigma_hint = lp.spectrum.eigenvalues(0) - 1.0;
    }
    lp.spectrum = generalized_spectrum(m, lp.u, o.count, ow);
    warm_store = lp.spectrum.eigenvectors;

    const double l1 = lp.spectrum.eigenvalues(0);
    const double l2 = lp.spectrum.eigenvalues(1);
    if (l2 - l1 <= params.eig.cluster_tol_rel * std::abs(l2))
      throw diverged_error("nu or connectivity violated in the limit stage");
    const double window =
        std::max(params.eig.cluster_tol_rel * std::abs(l2),
                 params.cert_window_frac * (l2 - l1));
    std::vector<int> modes =
        certificate_modes(lp.spectrum, window, params.eig.null_tol);

    const Eigen::ArrayXd uv = lp.u.values.array();
    FitData fit = fit_simplex_on_modes(m, lp.spectrum, modes,
                                       uv.square().matrix());
    lp.c = fit.c;
    lp.modes = fit.modes;

    Eigen::ArrayXd phi_sum = Eigen::ArrayXd::Zero(m.node_count);
    for (size_t j = 0; j < fit.modes.size(); ++j)
      phi_sum += fit.c(static_cast<Eigen::Index>(j)) *
                 lp.spectrum.eigenvectors.col(fit.modes[j]).array().square();

    lp.residual =
        (m.weights.array() * (uv.square() - phi_sum).abs()).sum();
    const double l2_resid =
        std::sqrt((m.weights.array() * (uv.square() - phi_sum).square()).sum());
    if (l2_resid <= params.limit_tol) {
      lp.converged = true;
      break;
    }

    ConformalFactor u_new =
        normalize_conformal(m, make_conformal(m, phi_sum.sqrt().matrix()));
    const double f_new = f2_from_parts(l2, 1.0, lp.u.N);
    // F_2 ascent is not enforced strictly here; the limit map is only damped
    // when it would destroy monotonicity by a wide margin
    if (std::isfinite(f_cur) && f_new < f_cur - 1e-6 * std::abs(f_cur)) {
      Vec mid = (lp.u.values.array().pow(0.5) * u_new.values.array().pow(0.5))
                    .matrix();
      u_new = normalize_conformal(m, make_conformal(m, mid));
    }
    f_cur = f_new;
    lp.u = u_new;
  }
  return lp;
}

}  // namespace

ExtremalReport continuation(const DiscreteManifold& m, const ConformalFactor& u0,
                            const std::vector<double>& schedule,
                            const OptimParams& params) {
  if (schedule.empty()) throw config_error("epsilon schedule is empty");
  for (size_t i = 0; i < schedule.size(); ++i) {
    if (!(schedule[i] > 0.0))
      throw config_error("epsilon schedule entries must be positive");
    if (i > 0 && !(schedule[i] < schedule[i - 1]))
      throw config_error("epsilon schedule must be strictly decreasing");
  }

  ExtremalReport rep;
  ConformalFactor u = normalize_conformal(m, u0);
  int nu = -1;

  std::vector<double> eps_seen, limit_residuals;
  EpsStage first_stage;
  bool aborted = false;

  for (size_t si = 0; si < schedule.size(); ++si) {
    const double eps = schedule[si];
    EpsStage stage;
    stage.eps = eps;

    char name[64];
    std::snprintf(name, sizeof name, "checkpoint_%02zu.txt", si);
    const std::string cp_path =
        params.checkpoint_dir.empty() ? "" : params.checkpoint_dir + "/" + name;

    bool resumed = false;
    if (params.resume && !cp_path.empty()) {
      std::ifstream probe(cp_path);
      if (probe.good()) {
        Checkpoint cp = read_checkpoint(cp_path);
        if (std::abs(cp.eps - eps) <= 1e-15 * eps && cp.u.size() == m.node_count &&
            cp.converged) {
          u = normalize_conformal(m, make_conformal(m, cp.u));
          stage.lambda2 = cp.lambda2;
          stage.f2eps = cp.f2eps;
          stage.gamma1 = cp.gamma1;
          stage.residual_l2 = cp.residual_l2;
          stage.limit_residual = cp.limit_residual;
          stage.k_effective = cp.k_effective;
          stage.iterations = cp.iterations;
          stage.converged = true;
          stage.from_checkpoint = true;
          stage.sup_u = u.values.maxCoeff();
          stage.inf_u = u.values.minCoeff();
          stage.lipschitz = lipschitz_proxy(m, u.values);
          stage.int_u_minus_eps = integral_u_pow(m, u, -eps);
          stage.eps_int_u_minus_eps_minus_n =
              eps * integral_u_pow(m, u, -eps - u.N);
          stage.f2 = f2_from_parts(cp.lambda2, 1.0, u.N);
          resumed = true;
        }
      }
    }

    if (!resumed) {
      MaximizeResult mr = maximize_f2eps(m, u, eps, params);
      u = mr.u;
      if (nu < 0) nu = mr.spectrum.nu;
      stage.lambda2 = mr.spectrum.eigenvalues(1);
      stage.f2eps = mr.f2eps;
      stage.f2 = f2_from_parts(stage.lambda2, 1.0, u.N);
      stage.gamma1 = mr.certificate.params.gamma1;
      stage.residual_l2 = mr.certificate.residual_l2;
      stage.limit_residual = mr.certificate.limit_residual;
      stage.k_effective = mr.certificate.k_effective;
      stage.iterations = mr.iterations;
      stage.converged = mr.converged;
      stage.sup_u = u.values.maxCoeff();
      stage.inf_u = u.values.minCoeff();
      stage.lipschitz = lipschitz_proxy(m, u.values);
      stage.int_u_minus_eps = integral_u_pow(m, u, -eps);
      stage.eps_int_u_minus_eps_minus_n = eps * integral_u_pow(m, u, -eps - u.N);
      for (const IterationStat& h : mr.history) rep.history.push_back(h);

      if (!cp_path.empty()) {
        Checkpoint cp;
        cp.eps = eps;
        cp.lambda2 = stage.lambda2;
        cp.f2eps = stage.f2eps;
        cp.gamma1 = stage.gamma1;
        cp.gamma2 = mr.certificate.params.gamma2;
        cp.residual_l2 = stage.residual_l2;
        cp.residual_sup = mr.certificate.residual_sup;
        cp.limit_residual = stage.limit_residual;
        cp.k_effective = stage.k_effective;
        cp.c = mr.certificate.c;
        cp.iterations = stage.iterations;
        cp.converged = stage.converged;
        cp.u = u.values;
        write_checkpoint(cp_path, cp);
      }
    }

    rep.stages.push_back(stage);
    eps_seen.push_back(eps);
    limit_residuals.push_back(stage.limit_residual);

    if (si == 0) {
      first_stage = stage;
    } else {
      auto blows = [&](double now, double first) {
        return std::abs(now) > params.blowup_factor * std::max(1e-12, std::abs(first));
      };
      if (blows(stage.sup_u, first_stage.sup_u) ||
          blows(stage.lipschitz, first_stage.lipschitz) ||
          blows(stage.int_u_minus_eps, first_stage.int_u_minus_eps) ||
          blows(stage.eps_int_u_minus_eps_minus_n,
                first_stage.eps_int_u_minus_eps_minus_n)) {
        rep.unresolved_reason =
            "diagnostic blow-up across the schedule (factor > blowup_factor)";
        aborted = true;
        break;
      }
    }
    if (!stage.converged && rep.unresolved_reason.empty())
      rep.unresolved_reason = "euler residual did not reach eul_tol at eps = " +
                              std::to_string(eps);
  }

  rep.u_final = u;
  rep.residual_slope = fit_loglog_slope(eps_seen, limit_residuals);
  rep.beta_min = 2.0 / (schedule.back() + u.N);

  const bool reached = !aborted && rep.stages.back().converged &&
                       schedule.back() <= params.polish_eps_max;
  if (!reached) {
    if (rep.unresolved_reason.empty())
      rep.unresolved_reason =
          "epsilon schedule did not reach the limit-stage threshold; residual "
          "floor too high";
    rep.classification = Classification::Unresolved;
    rep.lambda2 = rep.stages.back().lambda2;
    rep.f2 = rep.stages.back().f2;
    return rep;
  }

  LimitPolish lp = limit_polish(m, u, nu, params);
  rep.polished = true;
  rep.polish_iterations = lp.iterations;
  rep.polish_residual = lp.residual;
  rep.u_final = lp.u;
  rep.lambda2 = lp.spectrum.eigenvalues(1);
  rep.f2 = f2_from_parts(rep.lambda2, 1.0, lp.u.N);

  if (!lp.converged) {
    rep.classification = Classification::Unresolved;
    rep.unresolved_reason = "limit stage did not converge";
    return rep;
  }

  rep.detail = classify(m, lp.u, lp.spectrum, lp.c, lp.modes, params);
  rep.classification = rep.detail.kind;
  rep.k = rep.detail.k;
  if (rep.classification == Classification::Unresolved &&
      rep.unresolved_reason.empty())
    rep.unresolved_reason = rep.detail.note;
  return rep;
}

void write_checkpoint(const std::string& path, const Checkpoint& cp) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot write checkpoint: " + path);
  char buf[128];
  out << "specmax-checkpoint 1\n";
  auto put = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%s = %.17g\n", key, v);
    out << buf;
  };
  put("eps", cp.eps);
  put("lambda2", cp.lambda2);
  put("f2eps", cp.f2eps);
  put("gamma1", cp.gamma1);
  put("gamma2", cp.gamma2);
  put("residual_l2", cp.residual_l2);
  put("residual_sup", cp.residual_sup);
  put("limit_residual", cp.limit_residual);
  out << "k_effective = " << cp.k_effective << "\n";
  out << "iterations = " << cp.iterations << "\n";
  out << "converged = " << (cp.converged ? 1 : 0) << "\n";
  out << "c =";
  for (Eigen::Index i = 0; i < cp.c.size(); ++i) {
    std::snprintf(buf, sizeof buf, " %.17g", cp.c(i));
    out << buf;
  }
  out << "\n";
  out << "nodes = " << cp.u.size() << "\n";
  out << "u:\n";
  for (Eigen::Index i = 0; i < cp.u.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g\n", cp.u(i));
    out << buf;
  }
  if (!out) throw config_error("failed while writing checkpoint: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("specmax-checkpoint", 0) != 0)
    throw config_error("not a checkpoint file: " + path);

  Checkpoint cp;
  long nodes = -1;
  while (std::getline(in, line)) {
    if (line == "u:") break;
    std::istringstream ls(line);
    std::string key, eq;
    ls >> key >> eq;
    if (eq != "=") throw config_error("malformed checkpoint line: " + line);
    if (key == "eps") ls >> cp.eps;
    else if (key == "lambda2") ls >> cp.lambda2;
    else if (key == "f2eps") ls >> cp.f2eps;
    else if (key == "gamma1") ls >> cp.gamma1;
    else if (key == "gamma2") ls >> cp.gamma2;
    else if (key == "residual_l2") ls >> cp.residual_l2;
    else if (key == "residual_sup") ls >> cp.residual_sup;
    else if (key == "limit_residual") ls >> cp.limit_residual;
    else if (key == "k_effective") ls >> cp.k_effective;
    else if (key == "iterations") ls >> cp.iterations;
    else if (key == "converged") { int v; ls >> v; cp.converged = v != 0; }
    else if (key == "nodes") ls >> nodes;
    else if (key == "c") {
      std::vector<double> cs;
      double v;
      while (ls >> v) cs.push_back(v);
      cp.c = Eigen::Map<Eigen::VectorXd>(cs.data(), static_cast<Eigen::Index>(cs.size()));
    } else {
      throw config_error("unknown checkpoint key: " + key);
    }
  }
  if (nodes < 0) throw config_error("checkpoint missing node count: " + path);
  cp.u.resize(nodes);
  for (long i = 0; i < nodes; ++i)
    if (!(in >> cp.u(i)))
      throw config_error("checkpoint u-vector truncated: " + path);
  return cp;
}

}  // namespace specmax
