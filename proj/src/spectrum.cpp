#include "specmax/spectrum.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>

#include "specmax/error.hpp"
#include "specmax/rng.hpp"

namespace specmax {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Ldlt = Eigen::SimplicialLDLT<SpMat, Eigen::Lower>;

struct SupportSystem {
  std::vector<int> index;  // support node ids, ascending
  SpMat K;                 // operator restricted to support
  Vec d;                   // mass diagonal restricted to support
  Eigen::Index n() const { return d.size(); }
};

SupportSystem restrict_support(const DiscreteManifold& m, const ConformalFactor& u) {
  SupportSystem s;
  const Eigen::Index n = m.node_count;
  std::vector<int> map(static_cast<size_t>(n), -1);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (u.support(i)) {
      map[static_cast<size_t>(i)] = static_cast<int>(s.index.size());
      s.index.push_back(static_cast<int>(i));
    }
  }
  const Eigen::Index ns = static_cast<Eigen::Index>(s.index.size());
  if (ns == 0) throw config_error("zero conformal factor: empty support");

  const Vec mass = mass_diagonal(m, u);
  s.d.resize(ns);
  for (Eigen::Index k = 0; k < ns; ++k) s.d(k) = mass(s.index[static_cast<size_t>(k)]);

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(m.op.nonZeros()));
  for (int c = 0; c < m.op.outerSize(); ++c) {
    const int jc = map[static_cast<size_t>(c)];
    if (jc < 0) continue;
    for (SpMat::InnerIterator it(m.op, c); it; ++it) {
      const int ir = map[static_cast<size_t>(it.row())];
      if (ir < 0) continue;
      trips.emplace_back(ir, jc, it.value());
    }
  }
  s.K.resize(ns, ns);
  s.K.setFromTriplets(trips.begin(), trips.end());
  s.K.makeCompressed();
  return s;
}

struct InertiaResult {
  int negatives = 0;
  bool reliable = false;
};

// Inertia of K - sigma*M via an unpivoted sparse LDLT. Reliable only when the
// pivots stay well away from zero; callers fall back to bracketing shifts.
InertiaResult ldlt_inertia(const SupportSystem& s, double sigma) {
  SpMat a = s.K;
  Vec shift = -sigma * s.d;
  SpMat adjust(a.rows(), a.cols());
  adjust.reserve(Eigen::VectorXi::Constant(static_cast<int>(a.rows()), 1));
  for (Eigen::Index i = 0; i < a.rows(); ++i) adjust.insert(i, i) = shift(i);
  a = SpMat(a + adjust);
  a.makeCompressed();

  Ldlt fact(a);
  InertiaResult r;
  if (fact.info() != Eigen::Success) return r;
  const Vec dvec = fact.vectorD();
  if (!dvec.allFinite()) return r;
  const double dmax = dvec.cwiseAbs().maxCoeff();
  const double dmin = dvec.cwiseAbs().minCoeff();
  r.negatives = static_cast<int>((dvec.array() < 0.0).count());
  r.reliable = dmax > 0.0 && dmin > 1e-13 * dmax;
  return r;
}

struct RankOneTerm {
  Vec q;            // K is replaced by K + tau * q q^T
  double tau = 0.0;
  bool active = false;
};

// Pair j gets the tight residual tolerance when it lies before the hard
// boundary and its near-degenerate group does not spill past it.
std::vector<bool> hard_pair_flags(const Vec& evals, int hard0) {
  const int n = static_cast<int>(evals.size());
  hard0 = std::max(1, std::min(hard0, n));
  std::vector<int> group(static_cast<size_t>(n), 0);
  for (int j = 1; j < n; ++j) {
    const bool same =
        std::abs(evals(j) - evals(j - 1)) <= 1e-7 * (1.0 + std::abs(evals(j)));
    group[static_cast<size_t>(j)] = same ? group[static_cast<size_t>(j - 1)]
                                         : group[static_cast<size_t>(j - 1)] + 1;
  }
  std::vector<bool> hard(static_cast<size_t>(n), false);
  for (int j = 0; j < n; ++j) {
    if (j >= hard0) break;
    bool straddles = false;
    for (int k = hard0; k < n; ++k)
      if (group[static_cast<size_t>(k)] == group[static_cast<size_t>(j)])
        straddles = true;
    hard[static_cast<size_t>(j)] = !straddles;
  }
  return hard;
}

struct EngineResult {
  Vec evals;   // ascending
  Mat evecs;   // support-length columns, M-orthonormal
  Vec resid;   // relative pencil residuals
  int iterations = 0;
  bool converged = false;
  double sigma = 0.0;
};

double gershgorin_floor(const SupportSystem& s) {
  // lower bound for the pencil spectrum via the symmetrized matrix
  // B = D^{-1/2} K D^{-1/2}
  const Eigen::Index n = s.n();
  Vec isq = s.d.cwiseSqrt().cwiseInverse();
  Vec lo = Vec::Constant(n, 0.0);
  for (int c = 0; c < s.K.outerSize(); ++c) {
    for (SpMat::InnerIterator it(s.K, c); it; ++it) {
      const double v = it.value() * isq(it.row()) * isq(it.col());
      if (it.row() == it.col())
        lo(it.row()) += v;
      else
        lo(it.row()) -= std::abs(v);
    }
  }
  return lo.minCoeff();
}

// Shift-invert Rayleigh-Ritz over a block Krylov space in the M inner
// product. Operator: (K - sigma M)^{-1} M, all Ritz values positive once
// sigma sits below the first eigenvalue (checked through the pivots).
EngineResult shift_invert_lowest(const SupportSystem& s, int count,
                                 const EigenOptions& opts, const Mat* warm,
                                 const RankOneTerm& r1) {
  const Eigen::Index n = s.n();
  EngineResult out;

  double sigma = opts.sigma_hint;
  if (!std::isfinite(sigma)) {
    // Keep a unit of distance below the lowest eigenvalue: a shift that
    // crowds l1 makes the factorization ill-conditioned and the attainable
    // residual floor rises above tolerance on large instances.
    const double g = gershgorin_floor(s);
    sigma = g - std::max(1.0, 0.05 * std::abs(g));
  }

  Ldlt fact;
  Vec aq;         // (K - sigma M)^{-1} q for the rank-one update
  double denom = 1.0;
  const double floor_sigma = gershgorin_floor(s) - 1e-3;
  for (int attempt = 0;; ++attempt) {
    SpMat a = s.K;
    SpMat adjust(n, n);
    adjust.reserve(Eigen::VectorXi::Constant(static_cast<int>(n), 1));
    for (Eigen::Index i = 0; i < n; ++i) adjust.insert(i, i) = -sigma * s.d(i);
    a = SpMat(a + adjust);
    a.makeCompressed();
    fact.compute(a);
    const bool pd = fact.info() == Eigen::Success &&
                    (fact.vectorD().array() > 0.0).all();
    if (pd) break;
    if (attempt >= 6)
      throw solver_error("shift selection failed: operator not positive definite");
    const double step = std::ldexp(1.0 + std::abs(sigma), attempt);
    sigma = std::max(floor_sigma, sigma - step);
    if (sigma == floor_sigma && attempt >= 1) sigma = floor_sigma - step;
  }
  out.sigma = sigma;

  if (r1.active) {
    aq = fact.solve(r1.q);
    denom = 1.0 + r1.tau * r1.q.dot(aq);
  }

  auto op_apply = [&](const Vec& x) -> Vec {
    Vec y = fact.solve(s.d.cwiseProduct(x));
    if (r1.active) y -= aq * (r1.tau * r1.q.dot(y) / denom);
    return y;
  };
  auto k_apply = [&](const Vec& x) -> Vec {
    Vec y = s.K * x;
    if (r1.active) y += r1.q * (r1.tau * r1.q.dot(x));
    return y;
  };

  const int max_basis = std::min<int>(opts.max_basis, static_cast<int>(n));
  const int block = std::max(2, std::min(opts.block, 6));
  Mat V(n, max_basis);
  Mat C(n, max_basis);
  Mat H = Mat::Zero(max_basis, max_basis);
  int p = 0;

  auto append_col = [&](Vec x) -> bool {
    if (p >= max_basis) return false;
    const double orig = std::sqrt(x.dot(s.d.cwiseProduct(x)));
    if (!(orig > 0.0)) return false;
    for (int pass = 0; pass < 2; ++pass) {
      if (p > 0) {
        Vec proj = V.leftCols(p).transpose() * s.d.cwiseProduct(x);
        x -= V.leftCols(p) * proj;
      }
    }
    const double nrm = std::sqrt(x.dot(s.d.cwiseProduct(x)));
    if (!(nrm > 1e-10 * orig) || !(nrm > 0.0)) return false;
    x /= nrm;
    V.col(p) = x;
    C.col(p) = op_apply(x);
    // extend H = V^T M C symmetrically
    Vec mc = s.d.cwiseProduct(C.col(p));
    Vec mx = s.d.cwiseProduct(x);
    for (int i = 0; i <= p; ++i) {
      const double hic = V.col(i).dot(mc);
      const double hci = C.col(i).dot(mx);
      const double h = 0.5 * (hic + hci);
      H(i, p) = h;
      H(p, i) = h;
    }
    ++p;
    return true;
  };

  Rng rng(0x5eed0001ULL + static_cast<uint64_t>(n));
  auto random_col = [&]() {
    Vec x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = rng.normal();
    return x;
  };

  std::vector<int> frontier;
  if (warm != nullptr && warm->cols() > 0) {
    const int take = std::min<int>(static_cast<int>(warm->cols()), count + 4);
    for (int j = 0; j < take; ++j)
      if (append_col(warm->col(j))) frontier.push_back(p - 1);
  }
  while (p < std::min<int>(block, max_basis) || frontier.empty()) {
    if (!append_col(random_col())) continue;
    frontier.push_back(p - 1);
  }

  const int need = std::min<int>(count, static_cast<int>(n));
  Mat Z;
  Vec theta_sel;
  Vec snapshot;
  std::vector<bool> snapshot_hard;
  bool stabilizing = false;
  int stab_expansions = 0;
  int stab_rounds = 0;
  for (int iter = 1;; ++iter) {
    out.iterations = iter;
    // Ritz step on the current basis
    Eigen::SelfAdjointEigenSolver<Mat> es(H.topLeftCorner(p, p));
    const int sel = std::min(p, need + 2);
    // largest theta <-> lowest lambda
    Mat Q(p, sel);
    theta_sel.resize(sel);
    for (int j = 0; j < sel; ++j) {
      Q.col(j) = es.eigenvectors().col(p - 1 - j);
      theta_sel(j) = es.eigenvalues()(p - 1 - j);
    }
    Z = V.leftCols(p) * Q;

    const int cand = std::min(need, sel);
    const double tail_tol = std::max(opts.residual_tol, 1e-6);
    bool ok = cand == need;
    out.resid.resize(cand);
    out.evals.resize(cand);
    for (int j = 0; j < cand; ++j) {
      const double lam = sigma + 1.0 / theta_sel(j);
      out.evals(j) = lam;
      Vec kz = k_apply(Z.col(j));
      Vec mz = s.d.cwiseProduct(Z.col(j));
      const double scale = kz.norm() + std::abs(lam) * mz.norm();
      const double res = (kz - lam * mz).norm() / std::max(scale, 1e-300);
      out.resid(j) = res;
    }
    // Tight residuals are demanded for the leading pairs; pairs in a
    // near-degenerate group straddling the hard/probe boundary only need
    // their values (the vector residuals floor while copies shuffle).
    const std::vector<bool> hard_flags =
        hard_pair_flags(out.evals, need - std::max(0, opts.loose_tail));
    for (int j = 0; j < cand; ++j)
      if (out.resid(j) >
          (hard_flags[static_cast<size_t>(j)] ? opts.residual_tol : tail_tol))
        ok = false;
#ifdef SPECMAX_ENGINE_DEBUG
    std::printf("[eng] iter=%d p=%d lam/res:", iter, p);
    for (int j = 0; j < cand; ++j)
      std::printf(" %.8g/%.1e", out.evals(j), out.resid(j));
    std::printf("\n");
#endif
    if (stabilizing) {
      // A random direction was injected; after two expansions compare the
      // tightly converged pairs against the snapshot. A missed copy of a
      // leading eigenvalue shows up here as value drift; churn among the
      // probe pairs is expected and ignored.
      ++stab_expansions;
      if (stab_expansions >= 2 || p >= max_basis) {
        bool stable = cand == need && snapshot.size() == need;
        if (stable) {
          for (int j = 0; j < need; ++j) {
            if (!snapshot_hard[static_cast<size_t>(j)]) continue;
            if (std::abs(out.evals(j) - snapshot(j)) >
                    1e-9 * (1.0 + std::abs(out.evals(j))) ||
                out.resid(j) > opts.residual_tol)
              stable = false;
          }
        }
        if (stable) {
          out.converged = true;
          break;
        }
        stabilizing = false;
        ++stab_rounds;
      }
    } else if (ok && p >= need) {
      if (stab_rounds >= 3 || p + 1 >= max_basis) {
        out.converged = true;
        break;
      }
      snapshot = out.evals;
      snapshot_hard = hard_flags;
      if (append_col(random_col())) {
        frontier.push_back(p - 1);
        stabilizing = true;
        stab_expansions = 0;
        continue;
      }
      out.converged = true;
      break;
    }
    if (p >= max_basis) break;

    std::vector<int> next;
    for (auto it = frontier.rbegin(); it != frontier.rend(); ++it) {
      if (p >= max_basis) break;
      if (append_col(C.col(*it))) next.push_back(p - 1);
    }
    while (next.empty() && p < max_basis) {
      if (append_col(random_col())) next.push_back(p - 1);
    }
    if (next.empty()) break;
    frontier = next;
  }

  if (!out.converged)
    throw solver_error("eigensolver did not converge: basis " + std::to_string(p) +
                       ", expansions " + std::to_string(out.iterations) +
                       ", worst residual " + std::to_string(out.resid.maxCoeff()));

  out.evecs = Z.leftCols(need);
  // ascending order is implied by descending theta; enforce anyway
  std::vector<int> order(static_cast<size_t>(need));
  for (int i = 0; i < need; ++i) order[static_cast<size_t>(i)] = i;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return out.evals(a) < out.evals(b); });
  Vec ev(need), rs(need);
  Mat vv(n, need);
  for (int i = 0; i < need; ++i) {
    ev(i) = out.evals(order[static_cast<size_t>(i)]);
    rs(i) = out.resid(order[static_cast<size_t>(i)]);
    vv.col(i) = out.evecs.col(order[static_cast<size_t>(i)]);
  }
  out.evals = ev;
  out.resid = rs;
  out.evecs = vv;
  return out;
}

struct DenseResult {
  Vec all_evals;
  Mat evecs;  // first `count` columns, M-orthonormal
  Vec resid;
};

DenseResult dense_lowest(const SupportSystem& s, int count) {
  const Eigen::Index n = s.n();
  Vec isq = s.d.cwiseSqrt().cwiseInverse();
  Mat b = Mat(s.K);
  b = isq.asDiagonal() * b * isq.asDiagonal();
  b = 0.5 * (b + b.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat> es(b);
  if (es.info() != Eigen::Success) throw solver_error("dense eigensolver failed");

  DenseResult r;
  r.all_evals = es.eigenvalues();
  const int c = std::min<int>(count, static_cast<int>(n));
  r.evecs = isq.asDiagonal() * es.eigenvectors().leftCols(c);
  r.resid.resize(c);
  for (int j = 0; j < c; ++j) {
    const double lam = r.all_evals(j);
    Vec kz = s.K * r.evecs.col(j);
    Vec mz = s.d.cwiseProduct(r.evecs.col(j));
    const double scale = kz.norm() + std::abs(lam) * mz.norm();
    r.resid(j) = (kz - lam * mz).norm() / std::max(scale, 1e-300);
  }
  return r;
}

void fix_sign(Mat& cols) {
  for (Eigen::Index j = 0; j < cols.cols(); ++j) {
    Eigen::Index k;
    cols.col(j).cwiseAbs().maxCoeff(&k);
    if (cols(k, j) < 0.0) cols.col(j) = -cols.col(j);
  }
}

// K-harmonic extension of support values onto the dead set.
bool harmonic_extend(const DiscreteManifold& m, const ConformalFactor& u,
                     Mat& full) {
  std::vector<int> dead, map(static_cast<size_t>(m.node_count), -1);
  for (Eigen::Index i = 0; i < m.node_count; ++i)
    if (!u.support(i)) {
      map[static_cast<size_t>(i)] = static_cast<int>(dead.size());
      dead.push_back(static_cast<int>(i));
    }
  if (dead.empty()) return true;
  const Eigen::Index nd = static_cast<Eigen::Index>(dead.size());
  std::vector<Eigen::Triplet<double>> trips;
  Mat rhs = Mat::Zero(nd, full.cols());
  for (int c = 0; c < m.op.outerSize(); ++c) {
    for (SpMat::InnerIterator it(m.op, c); it; ++it) {
      const int dr = map[static_cast<size_t>(it.row())];
      if (dr < 0) continue;
      const int dc = map[static_cast<size_t>(it.col())];
      if (dc >= 0)
        trips.emplace_back(dr, dc, it.value());
      else
        rhs.row(dr) -= it.value() * full.row(it.col());
    }
  }
  SpMat kdd(nd, nd);
  kdd.setFromTriplets(trips.begin(), trips.end());
  Ldlt fact(kdd);
  if (fact.info() != Eigen::Success) return false;
  const Vec dv = fact.vectorD();
  if (!dv.allFinite() || dv.cwiseAbs().minCoeff() <= 1e-13 * dv.cwiseAbs().maxCoeff())
    return false;
  Mat ext = fact.solve(rhs);
  for (Eigen::Index k = 0; k < nd; ++k) full.row(dead[static_cast<size_t>(k)]) = ext.row(k);
  return true;
}

}  // namespace

SpectrumSlice generalized_spectrum(const DiscreteManifold& m,
                                   const ConformalFactor& u, int count,
                                   const EigenOptions& opts) {
  if (count < 1) throw config_error("eigenpair count must be >= 1");
  SupportSystem s = restrict_support(m, u);
  const Eigen::Index ns = s.n();
  const int c = std::min<int>(count, static_cast<int>(ns));

  SpectrumSlice slice;
  const bool dense = !opts.force_iterative && ns <= opts.dense_threshold;
  slice.dense_path = dense;

  Mat support_vecs;
  if (dense) {
    DenseResult dr = dense_lowest(s, c);
    slice.eigenvalues = dr.all_evals.head(c);
    slice.residuals = dr.resid;
    support_vecs = dr.evecs;
    slice.nu = static_cast<int>((dr.all_evals.array() < 0.0).count());
    slice.nu_certified = true;
    slice.kernel_warning = (dr.all_evals.cwiseAbs().array() <= opts.null_tol).any();
    slice.iterations = 1;
  } else {
    Mat warm_support;
    const Mat* warm_ptr = nullptr;
    if (opts.warm != nullptr && opts.warm->rows() == m.node_count &&
        opts.warm->cols() > 0) {
      warm_support.resize(ns, opts.warm->cols());
      for (Eigen::Index k = 0; k < ns; ++k)
        warm_support.row(k) = opts.warm->row(s.index[static_cast<size_t>(k)]);
      warm_ptr = &warm_support;
    }
    EngineResult er = shift_invert_lowest(s, c, opts, warm_ptr, RankOneTerm{});
    slice.eigenvalues = er.evals;
    slice.residuals = er.resid;
    support_vecs = er.evecs;
    slice.iterations = er.iterations;
    slice.sigma = er.sigma;
    slice.kernel_warning =
        (slice.eigenvalues.cwiseAbs().array() <= opts.null_tol).any();
    if (opts.need_inertia) {
      InertiaResult ir = ldlt_inertia(s, 0.0);
      if (ir.reliable) {
        slice.nu = ir.negatives;
        slice.nu_certified = true;
      }
    }
    if (slice.nu < 0 && slice.eigenvalues(c - 1) > opts.null_tol) {
      slice.nu = static_cast<int>((slice.eigenvalues.array() < 0.0).count());
    }
  }

  // Leading pairs obey solver_tol; trailing probe pairs (loose_tail) sit in
  // possibly degenerate clusters where the values converge but the vector
  // residuals can floor, so they carry an explicit looser bound.
  const double probe_tol = std::max(opts.solver_tol, 1e-6);
  const std::vector<bool> hard_flags = hard_pair_flags(
      slice.eigenvalues, slice.dense_path ? c : c - std::max(0, opts.loose_tail));
  for (int j = 0; j < c; ++j) {
    const bool hard = slice.dense_path || hard_flags[static_cast<size_t>(j)];
    if (slice.residuals(j) > (hard ? opts.solver_tol : probe_tol))
      throw solver_error("eigenpair residual exceeds solver_tol: " +
                         std::to_string(slice.residuals(j)));
  }

  fix_sign(support_vecs);
  slice.eigenvectors = Mat::Zero(m.node_count, c);
  for (Eigen::Index k = 0; k < ns; ++k)
    slice.eigenvectors.row(s.index[static_cast<size_t>(k)]) = support_vecs.row(k);

  if (opts.harmonic_extension && u.support_count < m.node_count) {
    Mat ext = slice.eigenvectors;
    if (harmonic_extend(m, u, ext))
      slice.eigenvectors = ext;
    else
      slice.extension_singular = true;
  }

  if (c >= 2) {
    const double l2 = slice.eigenvalues(1);
    const double tol = opts.cluster_tol_rel * std::max(std::abs(l2), opts.null_tol);
    for (int j = 1; j < c; ++j)
      if (std::abs(slice.eigenvalues(j) - l2) <= tol) slice.cluster2.push_back(j);
  }
  return slice;
}

NegativeCount negative_count(const DiscreteManifold& m, const ConformalFactor& u,
                             const EigenOptions& opts) {
  if (!u.strictly_positive())
    throw config_error("negative_count requires a strictly positive factor");
  SupportSystem s = restrict_support(m, u);
  NegativeCount out;

  if (!opts.force_iterative && s.n() <= opts.dense_threshold) {
    Vec isq = s.d.cwiseSqrt().cwiseInverse();
    Mat b = Mat(s.K);
    b = isq.asDiagonal() * b * isq.asDiagonal();
    b = 0.5 * (b + b.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es(b, Eigen::EigenvaluesOnly);
    out.nu = static_cast<int>((es.eigenvalues().array() < 0.0).count());
    out.kernel_warning = (es.eigenvalues().cwiseAbs().array() <= opts.null_tol).any();
    return out;
  }

  // Bracketing inertia: no eigenvalue in [-t, t) means the count at both
  // shifts agrees and the kernel assumption holds.
  const double t = opts.null_tol;
  InertiaResult below = ldlt_inertia(s, -t);
  InertiaResult above = ldlt_inertia(s, t);
  if (below.reliable && above.reliable && below.negatives == above.negatives) {
    out.nu = below.negatives;
    out.kernel_warning = false;
    return out;
  }
  InertiaResult at0 = ldlt_inertia(s, 0.0);
  out.kernel_warning = true;
  if (at0.reliable)
    out.nu = at0.negatives;
  else if (below.reliable)
    out.nu = below.negatives;
  else if (above.reliable)
    out.nu = above.negatives;
  else
    throw solver_error("inertia factorization failed near zero shift");
  return out;
}

double lambda2_orthogonal(const DiscreteManifold& m, const ConformalFactor& u,
                          const EigenOptions& opts) {
  EigenOptions o2 = opts;
  o2.count = 2;
  SpectrumSlice base = generalized_spectrum(m, u, 2, o2);
  const double l1 = base.eigenvalues(0);
  const double l2 = base.eigenvalues(1);
  const double gap_tol =
      opts.cluster_tol_rel * std::max(std::abs(l2), opts.null_tol);
  if (l2 - l1 <= gap_tol)
    throw solver_error(
        "first eigenvalue is numerically multiple (disconnected support?)");

  SupportSystem s = restrict_support(m, u);
  const Eigen::Index ns = s.n();
  Vec phi1(ns);
  for (Eigen::Index k = 0; k < ns; ++k)
    phi1(k) = base.eigenvectors(s.index[static_cast<size_t>(k)], 0);

  if (!opts.force_iterative && ns <= opts.dense_threshold) {
    // Householder deflation in the symmetrized coordinates
    Vec sq = s.d.cwiseSqrt();
    Vec psi1 = sq.cwiseProduct(phi1);
    psi1.normalize();
    Mat b = Mat(s.K);
    Vec isq = sq.cwiseInverse();
    b = isq.asDiagonal() * b * isq.asDiagonal();
    b = 0.5 * (b + b.transpose()).eval();

    Vec v = psi1;
    v(0) += (psi1(0) >= 0.0 ? 1.0 : -1.0) * psi1.norm();
    v.normalize();
    Mat h = Mat::Identity(ns, ns) - 2.0 * v * v.transpose();
    Mat bp = h * b * h;
    Eigen::SelfAdjointEigenSolver<Mat> es(
        bp.bottomRightCorner(ns - 1, ns - 1), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
  }

  RankOneTerm r1;
  r1.q = s.d.cwiseProduct(phi1);
  r1.tau = (l2 - l1) + std::abs(l2) + 1.0;
  r1.active = true;
  EigenOptions o1 = opts;
  o1.sigma_hint = base.sigma;
  EngineResult er = shift_invert_lowest(s, 1, o1, nullptr, r1);
  return er.evals(0);
}

FirstEigenSign first_eigen_sign(const DiscreteManifold& m, const ConformalFactor& u,
                                const EigenOptions& opts) {
  EigenOptions o2 = opts;
  o2.count = 2;
  SpectrumSlice sl = generalized_spectrum(m, u, 2, o2);
  FirstEigenSign out;
  out.gap = sl.eigenvalues(1) - sl.eigenvalues(0);
  out.simple = out.gap > opts.cluster_tol_rel *
                             std::max(std::abs(sl.eigenvalues(1)), opts.null_tol);

  const Vec& phi1 = sl.eigenvectors.col(0);
  const double tol = 1e-10 * phi1.cwiseAbs().maxCoeff();
  bool has_pos = false, has_neg = false;
  for (Eigen::Index i = 0; i < m.node_count; ++i) {
    if (!u.support(i)) continue;
    if (phi1(i) > tol) has_pos = true;
    if (phi1(i) < -tol) has_neg = true;
  }
  out.constant_sign = !(has_pos && has_neg);
  return out;
}

}  // namespace specmax
