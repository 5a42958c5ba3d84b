#include "specmax/variation.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

#include "specmax/error.hpp"

namespace specmax {

namespace {

// weighted integral  sum_i w_i f_i g_i u_i^{N-2}
double weighted_pair(const DiscreteManifold& m, const ConformalFactor& u,
                     const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
  return (m.weights.array() * f.array() * g.array() *
          u.values.array().pow(u.N - 2.0))
      .sum();
}

[[maybe_unused]] double rayleigh(const DiscreteManifold& m, const ConformalFactor& u,
                const Eigen::VectorXd& phi) {
  const double energy = phi.dot(m.op * phi);
  const double mass = weighted_pair(m, u, phi, phi);
  if (!(mass > 0.0))
    throw config_error("test function has zero weighted norm (lives on the dead set)");
  return energy / mass;
}

// log-log least squares slope of dev vs t
double fit_order(const std::vector<double>& t, const std::vector<double>& dev) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (size_t i = 0; i < t.size(); ++i) {
    if (!(dev[i] > 0.0)) continue;
    const double x = std::log(t[i]);
    const double y = std::log(dev[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return 0.0;
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-300) return 0.0;
  return (n * sxy - sx * sy) / denom;
}

}  // namespace

std::vector<double> default_t_list() {
  std::vector<double> t;
  for (int k = 0; k <= 6; ++k) t.push_back(0.1 * std::ldexp(1.0, -k));
  return t;
}

Deformation make_deformation(const DiscreteManifold& m, const ConformalFactor& u,
                             const Eigen::VectorXd& h, double safety) {
  if (h.size() != m.node_count)
    throw config_error("generating function length does not match node count");
  if (!h.allFinite()) throw config_error("generating function must be bounded");
  Deformation d;
  d.base = u;
  d.h = h;
  const double hmax = h.cwiseAbs().maxCoeff();
  d.t_max = hmax > 0.0 ? safety / hmax : 1e9;
  return d;
}

ConformalFactor deform(const DiscreteManifold& m, const Deformation& d, double t) {
  if (std::abs(t) > d.t_max)
    throw config_error("deformation parameter exceeds t_max");
  Eigen::VectorXd v =
      d.base.values.array() * (1.0 + t * d.h.array());
  ConformalFactor out = make_conformal(m, v);
  return out;
}

double l_h_value(const DiscreteManifold& m, const ConformalFactor& u,
                 const Eigen::VectorXd& phi, const Eigen::VectorXd& h) {
  const double mass = weighted_pair(m, u, phi, phi);
  if (!(mass > 0.0))
    throw config_error("test function has zero weighted norm (lives on the dead set)");
  const double r = phi.dot(m.op * phi) / mass;
  const double hmoment = weighted_pair(m, u, phi.cwiseProduct(h), phi) / mass;
  return -(u.N - 2.0) * r * hmoment;
}

DerivativePair one_sided_derivatives(const DiscreteManifold& m,
                                     const ConformalFactor& u,
                                     const Eigen::VectorXd& h,
                                     const EigenOptions& opts) {
  EigenOptions o = opts;
  o.count = std::max(o.count, 4);
  SpectrumSlice s = generalized_spectrum(m, u, o.count, o);
  if (s.cluster2.empty()) throw solver_error("empty second eigenspace cluster");

  const double l2 = s.eigenvalues(1);
  const int d = static_cast<int>(s.cluster2.size());

  // Q(phi) = int h phi^2 u^{N-2} restricted to span(cluster2); eigenvectors
  // are M_u-orthonormal so the sphere constraint becomes |q| = 1.
  Eigen::MatrixXd basis(m.node_count, d);
  for (int j = 0; j < d; ++j) basis.col(j) = s.eigenvectors.col(s.cluster2[j]);
  const Eigen::ArrayXd wh =
      m.weights.array() * h.array() * u.values.array().pow(u.N - 2.0);
  Eigen::MatrixXd q(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) {
      q(a, b) = (wh * basis.col(a).array() * basis.col(b).array()).sum();
      q(b, a) = q(a, b);
    }

  DerivativePair out;
  out.cluster_dim = d;
  const double coeff = -(u.N - 2.0) * l2;  // positive when l2 < 0
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
  const Eigen::VectorXd vals = es.eigenvalues();  // ascending
  const Eigen::VectorXd qmin = es.eigenvectors().col(0);
  const Eigen::VectorXd qmax = es.eigenvectors().col(d - 1);
  const double lo = coeff * vals(0), hi = coeff * vals(d - 1);
  if (lo <= hi) {
    out.right = lo;
    out.left = hi;
    out.attaining_right = basis * qmin;
    out.attaining_left = basis * qmax;
  } else {
    out.right = hi;
    out.left = lo;
    out.attaining_right = basis * qmax;
    out.attaining_left = basis * qmin;
  }
  return out;
}

FdReport fd_derivative_check(const DiscreteManifold& m, const ConformalFactor& u,
                             const Eigen::VectorXd& h,
                             const std::vector<double>& t_list,
                             const EigenOptions& opts) {
  FdReport rep;
  rep.pair = one_sided_derivatives(m, u, h, opts);
  Deformation d = make_deformation(m, u, h);

  EigenOptions o = opts;
  o.count = std::max(o.count, 4);
  SpectrumSlice s0 = generalized_spectrum(m, u, o.count, o);
  const double l2 = s0.eigenvalues(1);
  EigenOptions owarm = o;
  owarm.warm = &s0.eigenvectors;
  owarm.sigma_hint = s0.eigenvalues(0) - 1.0;

  std::vector<double> ts, devr, devl;
  for (double t : t_list) {
    if (!(t > 0.0) || t > d.t_max)
      throw config_error("t_list entries must be positive and within t_max");
    FdSample smp;
    smp.t = t;
    ConformalFactor up = deform(m, d, t);
    ConformalFactor un = deform(m, d, -t);
    smp.fd_right = (generalized_spectrum(m, up, o.count, owarm).eigenvalues(1) - l2) / t;
    smp.fd_left = (generalized_spectrum(m, un, o.count, owarm).eigenvalues(1) - l2) / (-t);
    smp.dev_right = std::abs(smp.fd_right - rep.pair.right);
    smp.dev_left = std::abs(smp.fd_left - rep.pair.left);
    rep.max_deviation = std::max({rep.max_deviation, smp.dev_right, smp.dev_left});
    rep.samples.push_back(smp);
    ts.push_back(t);
    devr.push_back(smp.dev_right);
    devl.push_back(smp.dev_left);
  }

  // Deviations at the solver noise floor make the order fit meaningless.
  const double noise = 1e-9 * (1.0 + std::abs(l2));
  rep.order_estimable = rep.max_deviation > 100.0 * noise;
  rep.fitted_order_right = fit_order(ts, devr);
  rep.fitted_order_left = fit_order(ts, devl);
  return rep;
}

SandwichReport continuity_sandwich_check(const DiscreteManifold& m,
                                         const ConformalFactor& u,
                                         const Eigen::VectorXd& h,
                                         const std::vector<double>& t_list,
                                         const EigenOptions& opts) {
  EigenOptions o = opts;
  o.count = std::max(o.count, 4);
  SpectrumSlice s0 = generalized_spectrum(m, u, o.count, o);
  SandwichReport rep;
  rep.lambda1 = s0.eigenvalues(0);
  rep.lambda2 = s0.eigenvalues(1);
  if (!(rep.lambda1 < 0.0))
    throw config_error("sandwich check requires lambda_1(u) < 0");

  Deformation d = make_deformation(m, u, h);
  const double hmax = h.cwiseAbs().maxCoeff();
  EigenOptions owarm = o;
  owarm.warm = &s0.eigenvectors;
  owarm.sigma_hint = s0.eigenvalues(0) - 1.0;

  for (double t : t_list) {
    for (double sgn : {1.0, -1.0}) {
      const double tt = sgn * t;
      if (std::abs(tt) > d.t_max)
        throw config_error("t_list entries must lie within t_max");
      SpectrumSlice st = generalized_spectrum(m, deform(m, d, tt), o.count, owarm);
      SandwichSample smp;
      smp.t = tt;
      smp.lambda1_t = st.eigenvalues(0);
      smp.lambda2_t = st.eigenvalues(1);
      const double a = std::abs(tt) * hmax;
      smp.lower = std::pow(1.0 - a, -(u.N - 2.0)) * rep.lambda1;
      smp.upper = std::pow(1.0 + a, -(u.N - 2.0)) * rep.lambda1;
      const double slack = 1e-10 * (1.0 + std::abs(rep.lambda1));
      smp.holds = smp.lambda1_t >= smp.lower - slack &&
                  smp.lambda1_t <= smp.upper + slack;
      if (!smp.holds) {
        rep.all_hold = false;
        rep.worst_t = tt;
      }
      rep.lambda2_continuity_constant =
          std::max(rep.lambda2_continuity_constant,
                   std::abs(smp.lambda2_t - rep.lambda2) / std::abs(tt));
      rep.samples.push_back(smp);
    }
  }
  return rep;
}

}  // namespace specmax
