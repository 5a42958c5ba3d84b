#pragma once

#include <Eigen/Dense>

#include "specmax/manifold.hpp"

namespace specmax {

// Mass-diagonal entries below this relative threshold are deflated from the
// weighted eigenproblem (the discrete modified Grassmannian).
inline constexpr double kDeflationRel = 1e-14;

// Critical Sobolev exponent N = 2m/(m-2); finite only for m >= 3.
double exponent_N(int dim);

// Nonnegative nodal conformal factor u together with its exponent
// bookkeeping and the support mask of the weighted mass diagonal.
struct ConformalFactor {
  Eigen::VectorXd values;            // u >= 0
  double N = 0.0;                    // 2m/(m-2)
  Eigen::Array<bool, Eigen::Dynamic, 1> support;
  int support_count = 0;

  bool strictly_positive() const { return support_count == values.size(); }
};

ConformalFactor make_conformal(const DiscreteManifold& m,
                               const Eigen::VectorXd& values);
ConformalFactor constant_factor(const DiscreteManifold& m, double value = 1.0);

// diag entries w_i u_i^(N-2); the Grassmannian weight of the mass term
Eigen::VectorXd mass_diagonal(const DiscreteManifold& m, const ConformalFactor& u);

// sum_i w_i u_i^p
double integral_u_pow(const DiscreteManifold& m, const ConformalFactor& u, double p);

// conformal volume: sum w u^N
double conformal_volume(const DiscreteManifold& m, const ConformalFactor& u);

// rescale so that the conformal volume is 1
ConformalFactor normalize_conformal(const DiscreteManifold& m,
                                    const ConformalFactor& u);

// nodewise max(u, floor); see the truncation used in the maximality argument
ConformalFactor floor_truncate(const DiscreteManifold& m, const ConformalFactor& u,
                               double floor);

}  // namespace specmax
