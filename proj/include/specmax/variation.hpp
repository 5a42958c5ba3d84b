#pragma once

#include <Eigen/Dense>
#include <vector>

#include "specmax/conformal.hpp"
#include "specmax/manifold.hpp"
#include "specmax/spectrum.hpp"

namespace specmax {

// Multiplicative deformation u_t = u (1 + t h) with |t| <= t_max chosen so
// the factor stays positive and the support never changes.
struct Deformation {
  ConformalFactor base;
  Eigen::VectorXd h;
  double t_max = 0.0;
};

Deformation make_deformation(const DiscreteManifold& m, const ConformalFactor& u,
                             const Eigen::VectorXd& h, double safety = 0.5);

ConformalFactor deform(const DiscreteManifold& m, const Deformation& d, double t);

// L_h(phi, u) = -(N-2) R(phi) * (int h phi^2 u^{N-2}) / (int phi^2 u^{N-2});
// the derivative of the Rayleigh quotient along the deformation.
double l_h_value(const DiscreteManifold& m, const ConformalFactor& u,
                 const Eigen::VectorXd& phi, const Eigen::VectorXd& h);

struct DerivativePair {
  double right = 0.0;  // d/dt at 0+ : inf of L_h over the unit sphere of E2
  double left = 0.0;   // d/dt at 0- : sup of L_h over the unit sphere of E2
  Eigen::VectorXd attaining_right;
  Eigen::VectorXd attaining_left;
  int cluster_dim = 0;
};

// One-sided derivatives of lambda_2 along u_t = u(1+th): the inf/sup of L_h
// over the numerical second eigenspace, computed exactly through a small
// symmetric eigenproblem on the cluster.
DerivativePair one_sided_derivatives(const DiscreteManifold& m,
                                     const ConformalFactor& u,
                                     const Eigen::VectorXd& h,
                                     const EigenOptions& opts = {});

struct FdSample {
  double t = 0.0;
  double fd_right = 0.0;
  double fd_left = 0.0;
  double dev_right = 0.0;
  double dev_left = 0.0;
};

struct FdReport {
  DerivativePair pair;
  std::vector<FdSample> samples;
  double max_deviation = 0.0;
  double fitted_order_right = 0.0;  // log-log slope of dev_right vs t
  double fitted_order_left = 0.0;
  bool order_estimable = true;      // false when deviations sit at solver noise
};

std::vector<double> default_t_list();

// One-sided finite differences of lambda_2(u_t) against the derivative
// formulas; central stencils are invalid at a nonsmooth point and are not
// offered.
FdReport fd_derivative_check(const DiscreteManifold& m, const ConformalFactor& u,
                             const Eigen::VectorXd& h,
                             const std::vector<double>& t_list = default_t_list(),
                             const EigenOptions& opts = {});

struct SandwichSample {
  double t = 0.0;
  double lambda1_t = 0.0;
  double lower = 0.0;   // (1-|t|max|h|)^{-(N-2)} lambda_1(u)
  double upper = 0.0;   // (1+|t|max|h|)^{-(N-2)} lambda_1(u)
  double lambda2_t = 0.0;
  bool holds = false;
};

struct SandwichReport {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  std::vector<SandwichSample> samples;
  bool all_hold = true;
  double lambda2_continuity_constant = 0.0;  // fitted C in |l2(u_t)-l2(u)| <= C t
  double worst_t = 0.0;
};

// Two-sided eigenvalue bounds under deformation plus the clustering of
// lambda_2(u_t) toward lambda_2(u); requires lambda_1(u) < 0.
SandwichReport continuity_sandwich_check(
    const DiscreteManifold& m, const ConformalFactor& u, const Eigen::VectorXd& h,
    const std::vector<double>& t_list = default_t_list(),
    const EigenOptions& opts = {});

}  // namespace specmax
