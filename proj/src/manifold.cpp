#include "specmax/manifold.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "specmax/error.hpp"

namespace specmax {

namespace {

Eigen::SparseMatrix<double> diag_sparse(const Eigen::VectorXd& d) {
  Eigen::SparseMatrix<double> m(d.size(), d.size());
  m.reserve(Eigen::VectorXi::Constant(static_cast<int>(d.size()), 1));
  for (Eigen::Index i = 0; i < d.size(); ++i) m.insert(i, i) = d(i);
  m.makeCompressed();
  return m;
}

}  // namespace

void finalize_manifold(DiscreteManifold& m) {
  const Eigen::Index n = m.weights.size();
  m.node_count = n;
  if (n == 0) throw config_error("manifold has no nodes");
  if (m.potential.size() == 0) m.potential = Eigen::VectorXd::Zero(n);
  if (m.potential.size() != n)
    throw config_error("potential length does not match node count");
  if (m.stiffness.rows() != n || m.stiffness.cols() != n)
    throw config_error("stiffness dimension does not match node count");
  if ((m.weights.array() <= 0.0).any())
    throw config_error("quadrature weights must be strictly positive");

  Eigen::SparseMatrix<double> asym = Eigen::SparseMatrix<double>(
      m.stiffness - Eigen::SparseMatrix<double>(m.stiffness.transpose()));
  double scale = 0.0;
  for (int k = 0; k < m.stiffness.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(m.stiffness, k); it; ++it)
      scale = std::max(scale, std::abs(it.value()));
  for (int k = 0; k < asym.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(asym, k); it; ++it)
      if (std::abs(it.value()) > 1e-12 * scale)
        throw config_error("stiffness matrix is not symmetric");

  // stiffness annihilates constants (weak-form Laplacian)
  Eigen::VectorXd r = m.stiffness * Eigen::VectorXd::Ones(n);
  if (scale > 0.0 && r.cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw config_error("stiffness row sums are not zero to assembly tolerance");

  m.op = m.stiffness + diag_sparse(m.weights.cwiseProduct(m.potential));
  m.op.makeCompressed();

  m.adjacency.assign(static_cast<size_t>(n), {});
  m.edges.clear();
  for (int k = 0; k < m.stiffness.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(m.stiffness, k); it; ++it) {
      const int i = static_cast<int>(it.row());
      const int j = static_cast<int>(it.col());
      if (i == j || std::abs(it.value()) <= 1e-300) continue;
      m.adjacency[static_cast<size_t>(j)].push_back(i);
      if (i < j) {
        Edge e;
        e.i = i;
        e.j = j;
        e.stiffness = std::abs(it.value());
        e.length = std::sqrt((m.weights(i) + m.weights(j)) / (2.0 * e.stiffness));
        m.edges.push_back(e);
      }
    }
  }
}

DiscreteManifold build_circle(double radius, int nodes, int declared_dim) {
  if (!(radius > 0.0)) throw config_error("circle radius must be positive");
  if (nodes < 8) throw config_error("circle needs at least 8 nodes");
  if (declared_dim < 1) throw config_error("declared dimension must be >= 1");

  DiscreteManifold m;
  m.dim = declared_dim;
  const double h = 2.0 * M_PI * radius / nodes;
  m.weights = Eigen::VectorXd::Constant(nodes, h);
  m.potential = Eigen::VectorXd::Zero(nodes);
  m.coords.resize(nodes, 1);
  for (int i = 0; i < nodes; ++i) m.coords(i, 0) = 2.0 * M_PI * i / nodes;

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(3 * nodes));
  const double s = 1.0 / h;
  for (int i = 0; i < nodes; ++i) {
    const int ip = (i + 1) % nodes;
    trips.emplace_back(i, i, 2.0 * s);
    trips.emplace_back(i, ip, -s);
    trips.emplace_back(ip, i, -s);
  }
  m.stiffness.resize(nodes, nodes);
  m.stiffness.setFromTriplets(trips.begin(), trips.end());

  FactorInfo f;
  f.kind = "circle";
  f.radius = radius;
  f.nodes = nodes;
  f.coord_col = 0;
  f.dim = declared_dim;
  m.factors = {f};

  return normalize_volume(m);
}

DiscreteManifold product(const DiscreteManifold& a, const DiscreteManifold& b) {
  DiscreteManifold m;
  m.dim = a.dim + b.dim;
  const Eigen::Index na = a.node_count, nb = b.node_count;
  if (na == 0 || nb == 0) throw config_error("product factors must be assembled");

  Eigen::SparseMatrix<double> ma = diag_sparse(a.weights);
  Eigen::SparseMatrix<double> mb = diag_sparse(b.weights);
  m.stiffness = Eigen::kroneckerProduct(a.stiffness, mb).eval() +
                Eigen::kroneckerProduct(ma, b.stiffness).eval();
  m.stiffness.makeCompressed();

  m.weights.resize(na * nb);
  m.potential.resize(na * nb);
  const Eigen::Index ca = a.coords.cols(), cb = b.coords.cols();
  m.coords.resize(na * nb, ca + cb);
  for (Eigen::Index i = 0; i < na; ++i) {
    for (Eigen::Index j = 0; j < nb; ++j) {
      const Eigen::Index r = i * nb + j;
      m.weights(r) = a.weights(i) * b.weights(j);
      m.potential(r) = a.potential(i) + b.potential(j);
      if (ca > 0) m.coords.block(r, 0, 1, ca) = a.coords.row(i);
      if (cb > 0) m.coords.block(r, ca, 1, cb) = b.coords.row(j);
    }
  }

  m.factors = a.factors;
  for (FactorInfo f : b.factors) {
    f.coord_col += static_cast<int>(ca);
    m.factors.push_back(f);
  }

  finalize_manifold(m);
  return m;
}

DiscreteManifold with_potential(const DiscreteManifold& m, double value) {
  return with_potential(m, Eigen::VectorXd::Constant(m.node_count, value));
}

DiscreteManifold with_potential(const DiscreteManifold& m,
                                const Eigen::VectorXd& values) {
  if (values.size() != m.node_count)
    throw config_error("potential length does not match node count");
  if (!values.allFinite()) throw config_error("potential must be finite");
  DiscreteManifold out = m;
  out.potential = values;
  finalize_manifold(out);
  return out;
}

DiscreteManifold with_dimension(const DiscreteManifold& m, int dim) {
  if (dim < 1) throw config_error("declared dimension must be >= 1");
  DiscreteManifold out = m;
  out.dim = dim;
  if (!out.factors.empty() && out.factors.size() == 1) out.factors[0].dim = dim;
  return out;
}

DiscreteManifold normalize_volume(const DiscreteManifold& m) {
  const double total = m.weights.sum();
  if (!(total > 0.0)) throw config_error("total volume must be positive");
  DiscreteManifold out = m;
  out.weights = m.weights / total;
  out.stiffness = m.stiffness / total;
  finalize_manifold(out);
  return out;
}

DiscreteManifold load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open mesh file: " + path);
  int dim = 0;
  Eigen::Index n = 0;
  long entries = 0;
  std::string line;
  if (!std::getline(in, line)) throw config_error("mesh file is empty: " + path);
  {
    std::istringstream h(line);
    if (!(h >> dim >> n >> entries))
      throw config_error("mesh header must be 'dim n_nodes n_entries'");
  }
  if (dim < 1 || n <= 0 || entries < 0)
    throw config_error("mesh header values out of range");

  DiscreteManifold m;
  m.dim = dim;
  m.weights = Eigen::VectorXd::Zero(n);
  m.potential = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::Triplet<double>> trips;

  long count = 0;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    char tag = 0;
    ls >> tag;
    auto fail = [&](const std::string& what) {
      return config_error("mesh line " + std::to_string(lineno) + ": " + what);
    };
    if (tag == 'w') {
      Eigen::Index i;
      double v;
      if (!(ls >> i >> v)) throw fail("expected 'w i weight'");
      if (i < 0 || i >= n) throw fail("node index out of range");
      m.weights(i) = v;
    } else if (tag == 'p') {
      Eigen::Index i;
      double v;
      if (!(ls >> i >> v)) throw fail("expected 'p i value'");
      if (i < 0 || i >= n) throw fail("node index out of range");
      m.potential(i) = v;
    } else if (tag == 'k') {
      Eigen::Index i, j;
      double v;
      if (!(ls >> i >> j >> v)) throw fail("expected 'k i j value'");
      if (i < 0 || i >= n || j < 0 || j >= n) throw fail("node index out of range");
      if (i > j) throw fail("stiffness entries must be upper triangle (i <= j)");
      trips.emplace_back(i, j, v);
      if (i != j) trips.emplace_back(j, i, v);
    } else {
      throw fail("unknown entry tag");
    }
    ++count;
  }
  if (count != entries)
    throw config_error("mesh entry count mismatch: header says " +
                       std::to_string(entries) + ", found " + std::to_string(count));

  m.stiffness.resize(n, n);
  m.stiffness.setFromTriplets(trips.begin(), trips.end());
  finalize_manifold(m);
  return m;
}

void save_mesh(const DiscreteManifold& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot write mesh file: " + path);
  long entries = 0;
  for (int k = 0; k < m.stiffness.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(m.stiffness, k); it; ++it)
      if (it.row() <= it.col()) ++entries;
  entries += 2 * m.node_count;  // weights and potential lines

  char buf[96];
  out << m.dim << ' ' << m.node_count << ' ' << entries << '\n';
  for (Eigen::Index i = 0; i < m.node_count; ++i) {
    std::snprintf(buf, sizeof buf, "w %ld %.17g\n", static_cast<long>(i), m.weights(i));
    out << buf;
  }
  for (Eigen::Index i = 0; i < m.node_count; ++i) {
    std::snprintf(buf, sizeof buf, "p %ld %.17g\n", static_cast<long>(i), m.potential(i));
    out << buf;
  }
  for (int k = 0; k < m.stiffness.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(m.stiffness, k); it; ++it) {
      if (it.row() > it.col()) continue;
      std::snprintf(buf, sizeof buf, "k %ld %ld %.17g\n", static_cast<long>(it.row()),
                    static_cast<long>(it.col()), it.value());
      out << buf;
    }
  }
  if (!out) throw config_error("failed while writing mesh file: " + path);
}

}  // namespace specmax
