#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "specmax/conformal.hpp"
#include "specmax/manifold.hpp"
#include "specmax/rng.hpp"
#include "specmax/spectrum.hpp"

namespace specmax {

// Closed-form spectrum of the discrete minus-Laplacian on a uniform
// periodic circle grid: (2 - 2 cos(2 pi k / n)) / h^2, sorted ascending.
std::vector<double> circle_laplace_spectrum(double radius, int nodes);

struct ProductSpec {
  std::vector<double> factor_a;
  std::vector<double> factor_b;
  double shift = 0.0;
  std::vector<double> merged;  // sorted pairwise sums + shift
};

ProductSpec product_spectrum_analytic(const std::vector<double>& spec_a,
                                      const std::vector<double>& spec_b,
                                      double shift);

// Brute-force reference for the weighted pencil on the support, through a
// different reduction than the production solver. Support capped at 1500.
struct DenseReference {
  Eigen::VectorXd eigenvalues;   // all, ascending
  Eigen::MatrixXd eigenvectors;  // full node length, M_u-orthonormal
  int nu = 0;
};

DenseReference dense_reference_solve(const DiscreteManifold& m,
                                     const ConformalFactor& u);

// The worked example: S^1(1) x S^1(1/2) with constant potential, declared
// three-dimensional. The second factor stands in for the negatively curved
// factor: the argument only consumes its spectral gap (> 1), the constant
// potential (< -1), and the exact first-mode pair on the S^1(1) factor.
DiscreteManifold build_product_example(int nodes_s1 = 256, int nodes_h = 128,
                                       double radius_s1 = 1.0,
                                       double radius_h = 0.5,
                                       double potential = -2.0, int dim = 3);

// Circle instance with a two-well potential v = v0 + cos(2 theta), v0 tuned
// by bisection on the dense spectrum until exactly two eigenvalues are
// negative and zero sits well inside a spectral gap.
DiscreteManifold build_nodal_example(int nodes = 512, int dim = 3);

struct TrialRecord {
  int index = 0;
  double f2 = 0.0;
  double gap = 0.0;  // F2(1) - F2(u)  (>= -tol required)
  double cv = 0.0;   // weighted coefficient of variation of u
};

struct MaximalityReport {
  double f2_const = 0.0;
  int trials = 0;
  int violations = 0;
  double worst_gap = 0.0;  // most negative gap seen
  std::vector<TrialRecord> records;        // sorted by trial index
  std::vector<double> nearest_equality_cv; // CVs of the 5 smallest gaps
  std::string failing_dump;                // path of serialized violator, if any
  bool passed = false;
};

// Seeded sampling of smooth positive fields against F2(u) <= F2(1) + tol.
// Trials fan out across threads; the merged report is deterministic.
MaximalityReport maximality_sample_test(const DiscreteManifold& m, int trials,
                                        uint64_t seed, double tol = 1e-8,
                                        const std::string& dump_dir = "",
                                        int threads = 2);

struct KeyInequalityReport {
  double lambda2_tilde = 0.0;  // lambda_2(u)
  double lambda2_g = 0.0;      // lambda_2 of the background (u = 1)
  double psi1_mass = 0.0;      // int psi_1^2 u^{N-2}
  double half_mass = 0.0;      // (1/2) int u^{N-2}
  double rhs = 0.0;            // (1/2) Vol lambda_2(g) / psi1_mass
  double alpha = 0.0;          // int psi_1 phi_2 u^{N-2}
  bool relabeled = false;
  bool holds = false;
  double margin = 0.0;  // rhs - lambda2_tilde
};

KeyInequalityReport key_inequality_check(const DiscreteManifold& m,
                                         const ConformalFactor& u,
                                         const EigenOptions& opts = {});

struct ThetaSweepReport {
  double lambda2_tilde = 0.0;
  double alpha = 0.0;
  double max_f_grid = 0.0;
  double theta_at_max = 0.0;
  double pen_value = 0.0;     // closed form at tan theta_c = -alpha
  double f_at_critical = 0.0;
  bool case1 = false;         // max attained where cos theta = 0
  double case1_projection_defect = 0.0;  // distance of psi_1 from E_2 when case1
  bool bound_holds = false;   // lambda2_tilde <= max f
  double match_error = 0.0;   // |max_f - pen_value| in case 2
};

ThetaSweepReport theta_sweep(const DiscreteManifold& m, const ConformalFactor& u,
                             int grid = 4096, const EigenOptions& opts = {});

}  // namespace specmax
