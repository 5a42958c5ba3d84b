#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <string>
#include <vector>

namespace specmax {

// One tensor factor of a product manifold. Used by the oracle module to
// locate the circle factor that carries the analytic eigenmodes.
struct FactorInfo {
  std::string kind;  // "circle" or "mesh"
  double radius = 0.0;
  int nodes = 0;
  int coord_col = 0;  // first coordinate column owned by this factor
  int dim = 1;        // declared dimension contribution
};

struct Edge {
  int i = 0;
  int j = 0;
  double stiffness = 0.0;  // off-diagonal magnitude s_ij > 0
  double length = 0.0;     // sqrt((w_i + w_j) / (2 s_ij))
};

// Discrete closed manifold: lumped quadrature weights (volume element),
// assembled weak-form stiffness (zero row sums, symmetric PSD) and a nodal
// potential field. The operator of interest is K = stiffness + diag(w .* v).
// Instances are immutable after construction and safe to share across threads.
struct DiscreteManifold {
  int dim = 1;  // declared dimension m; conformal exponents need m >= 3
  Eigen::Index node_count = 0;
  Eigen::VectorXd weights;
  Eigen::SparseMatrix<double> stiffness;
  Eigen::VectorXd potential;
  Eigen::MatrixXd coords;  // node_count x c periodic angle coordinates (c may be 0)
  std::vector<FactorInfo> factors;

  // cached at construction
  Eigen::SparseMatrix<double> op;  // K
  std::vector<std::vector<int>> adjacency;
  std::vector<Edge> edges;

  double total_weight() const { return weights.sum(); }
};

// Uniform periodic grid on a circle of the given radius, centered
// second-order differences, weights normalized to unit total volume.
// The declared dimension can be raised to model a higher-dimensional
// factor with the same spectrum (only spectral data enters downstream).
DiscreteManifold build_circle(double radius, int nodes, int declared_dim = 1);

// Tensor-sum construction: stiffness = K_a (x) M_b + M_a (x) K_b,
// weights = w_a (x) w_b, potentials add, dim = dim_a + dim_b. The spectrum
// of the product operator is the multiset of pairwise sums.
DiscreteManifold product(const DiscreteManifold& a, const DiscreteManifold& b);

DiscreteManifold with_potential(const DiscreteManifold& m, double value);
DiscreteManifold with_potential(const DiscreteManifold& m,
                                const Eigen::VectorXd& values);

// Redeclare the bookkeeping dimension (exponent N = 2m/(m-2) derives from it).
DiscreteManifold with_dimension(const DiscreteManifold& m, int dim);

// Rescale weights to unit total volume; the energy form is rescaled by the
// same factor so all Rayleigh quotients of (K, M) are preserved exactly.
DiscreteManifold normalize_volume(const DiscreteManifold& m);

// Plain-text mesh format. Header "dim n_nodes n_entries", then n_entries
// lines of the form "w i weight", "p i value" or "k i j value" (stiffness,
// upper triangle including diagonal, 0-based indices).
DiscreteManifold load_mesh(const std::string& path);
void save_mesh(const DiscreteManifold& m, const std::string& path);

// Validates invariants and fills the cached operator/adjacency/edge data.
// Builders call this; call it manually after assembling a manifold by hand.
void finalize_manifold(DiscreteManifold& m);

}  // namespace specmax
