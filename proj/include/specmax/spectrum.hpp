#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <limits>
#include <vector>

#include "specmax/conformal.hpp"
#include "specmax/manifold.hpp"

namespace specmax {

struct EigenOptions {
  int count = 8;                    // lowest eigenpairs to return
  Eigen::Index dense_threshold = 2000;
  double residual_tol = 1e-11;      // iterative convergence target (relative)
  double solver_tol = 1e-8;         // contract bound checked per returned pair
  double cluster_tol_rel = 1e-6;    // cluster2: |l - l2| <= rel * |l2|
  double null_tol = 1e-7;           // |l| below this raises a kernel warning
  int max_basis = 320;
  int block = 2;
  int loose_tail = 2;  // trailing probe pairs held to 1e-8 instead of residual_tol
  double sigma_hint = std::numeric_limits<double>::quiet_NaN();
  const Eigen::MatrixXd* warm = nullptr;  // full-length warm-start vectors
  bool force_iterative = false;
  bool harmonic_extension = false;  // visualization-only extension off support
  bool need_inertia = false;        // certify nu by factorization inertia
};

// Lowest slice of the generalized spectrum K phi = lambda M_u phi restricted
// to the support of u (zero-weight coordinates deflated). Eigenvectors are
// M_u-orthonormal on the support and zero off support unless harmonic
// extension was requested.
struct SpectrumSlice {
  Eigen::VectorXd eigenvalues;  // ascending
  Eigen::MatrixXd eigenvectors; // full node length, one column per eigenvalue
  std::vector<int> cluster2;    // indices (into eigenvalues) clustered at l2
  int nu = -1;                  // negative eigenvalue count (-1: not computed)
  bool nu_certified = false;
  Eigen::VectorXd residuals;    // relative pencil residual per returned pair
  int iterations = 0;
  bool dense_path = true;
  bool kernel_warning = false;      // an eigenvalue sits within null_tol of 0
  bool extension_singular = false;  // harmonic extension blocked, zero-filled
  double sigma = 0.0;               // shift used by the iterative path

  double lambda(int k) const { return eigenvalues(k - 1); }  // 1-based
};

SpectrumSlice generalized_spectrum(const DiscreteManifold& m,
                                   const ConformalFactor& u, int count,
                                   const EigenOptions& opts = {});

struct NegativeCount {
  int nu = 0;
  bool kernel_warning = false;
};

// Number of negative generalized eigenvalues; independent of the (strictly
// positive) conformal factor by Sylvester inertia.
NegativeCount negative_count(const DiscreteManifold& m, const ConformalFactor& u,
                             const EigenOptions& opts = {});

// Second eigenvalue recomputed as the Rayleigh minimum over the
// M_u-orthogonal complement of the first eigenfunction. Refuses when the
// first eigenvalue is numerically multiple.
double lambda2_orthogonal(const DiscreteManifold& m, const ConformalFactor& u,
                          const EigenOptions& opts = {});

struct FirstEigenSign {
  bool constant_sign = false;
  bool simple = false;
  double gap = 0.0;  // l2 - l1
};

FirstEigenSign first_eigen_sign(const DiscreteManifold& m, const ConformalFactor& u,
                                const EigenOptions& opts = {});

}  // namespace specmax
