#include "specmax/conformal.hpp"

#include <cmath>

#include "specmax/error.hpp"

namespace specmax {

double exponent_N(int dim) {
  if (dim < 3)
    throw config_error(
        "conformal exponent N = 2m/(m-2) requires declared dimension >= 3 "
        "(got " +
        std::to_string(dim) + "); redeclare with with_dimension()");
  return 2.0 * dim / (dim - 2.0);
}

ConformalFactor make_conformal(const DiscreteManifold& m,
                               const Eigen::VectorXd& values) {
  if (values.size() != m.node_count)
    throw config_error("conformal factor length does not match node count");
  if (!values.allFinite()) throw config_error("conformal factor must be finite");
  if ((values.array() < 0.0).any())
    throw config_error("conformal factor must be nonnegative");

  ConformalFactor u;
  u.values = values;
  u.N = exponent_N(m.dim);

  const Eigen::ArrayXd d =
      m.weights.array() * values.array().pow(u.N - 2.0);
  const double dmax = d.maxCoeff();
  if (!(dmax > 0.0)) throw config_error("zero conformal factor");
  u.support = d >= kDeflationRel * dmax;
  u.support_count = static_cast<int>(u.support.count());
  return u;
}

ConformalFactor constant_factor(const DiscreteManifold& m, double value) {
  return make_conformal(m, Eigen::VectorXd::Constant(m.node_count, value));
}

Eigen::VectorXd mass_diagonal(const DiscreteManifold& m, const ConformalFactor& u) {
  return (m.weights.array() * u.values.array().pow(u.N - 2.0)).matrix();
}

double integral_u_pow(const DiscreteManifold& m, const ConformalFactor& u,
                      double p) {
  if (p < 0.0 && !u.strictly_positive())
    throw config_error("negative power of a factor with zero nodes");
  return (m.weights.array() * u.values.array().pow(p)).sum();
}

double conformal_volume(const DiscreteManifold& m, const ConformalFactor& u) {
  return integral_u_pow(m, u, u.N);
}

ConformalFactor normalize_conformal(const DiscreteManifold& m,
                                    const ConformalFactor& u) {
  const double vol = conformal_volume(m, u);
  if (!(vol > 0.0)) throw config_error("zero conformal volume");
  return make_conformal(m, u.values / std::pow(vol, 1.0 / u.N));
}

ConformalFactor floor_truncate(const DiscreteManifold& m, const ConformalFactor& u,
                               double floor) {
  if (!(floor > 0.0)) throw config_error("truncation floor must be positive");
  return make_conformal(m, u.values.cwiseMax(floor));
}

}  // namespace specmax
