#include "specmax/simplex_lsq.hpp"

#include <cmath>
#include <limits>

#include "specmax/error.hpp"

namespace specmax {

SimplexFit simplex_lsq(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                       const Eigen::VectorXd& w) {
  const int d = static_cast<int>(a.cols());
  if (d < 1) throw config_error("simplex fit needs at least one column");
  if (d > 20) throw config_error("simplex fit dimension too large");
  if (a.rows() != b.size() || a.rows() != w.size())
    throw config_error("simplex fit dimension mismatch");

  const Eigen::MatrixXd aw = w.asDiagonal() * a;
  const Eigen::MatrixXd g = a.transpose() * aw;          // A^T W A
  const Eigen::VectorXd rhs = aw.transpose() * b;        // A^T W b
  const double gscale = std::max(g.cwiseAbs().maxCoeff(), 1e-300);
  const double feas_tol = 1e-11;
  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(d, 1.0 / d);

  auto objective = [&](const Eigen::VectorXd& c) {
    Eigen::VectorXd r = a * c - b;
    return std::sqrt((w.array() * r.array().square()).sum());
  };

  SimplexFit best;
  double best_obj = std::numeric_limits<double>::infinity();
  double best_dist = std::numeric_limits<double>::infinity();

  for (unsigned mask = 1; mask < (1u << d); ++mask) {
    std::vector<int> free_idx;
    for (int i = 0; i < d; ++i)
      if (mask & (1u << i)) free_idx.push_back(i);
    const int k = static_cast<int>(free_idx.size());

    // KKT system on the face: [G_SS 1; 1^T 0] [c_S; mu] = [g_S; 1]
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
    Eigen::VectorXd kr = Eigen::VectorXd::Zero(k + 1);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) kkt(i, j) = g(free_idx[i], free_idx[j]);
      kkt(i, k) = 1.0;
      kkt(k, i) = 1.0;
      kr(i) = rhs(free_idx[i]);
    }
    kr(k) = 1.0;
    // tiny ridge toward the uniform point keeps singular faces (dependent
    // columns) deterministic
    for (int i = 0; i < k; ++i) {
      kkt(i, i) += 1e-12 * gscale;
      kr(i) += 1e-12 * gscale / d;
    }
    Eigen::VectorXd sol = kkt.fullPivLu().solve(kr);
    if (!sol.allFinite()) continue;

    Eigen::VectorXd c = Eigen::VectorXd::Zero(d);
    bool feasible = true;
    for (int i = 0; i < k; ++i) {
      c(free_idx[i]) = sol(i);
      if (sol(i) < -feas_tol) feasible = false;
    }
    if (!feasible) continue;
    const double mu = sol(k);

    // multipliers of the zeroed coordinates must be nonnegative
    Eigen::VectorXd grad = g * c - rhs;
    bool kkt_ok = true;
    for (int i = 0; i < d; ++i) {
      if (mask & (1u << i)) continue;
      if (grad(i) + mu < -1e-8 * gscale) kkt_ok = false;
    }
    if (!kkt_ok) continue;

    c = c.cwiseMax(0.0);
    c /= c.sum();
    const double obj = objective(c);
    const double dist = (c - uniform).squaredNorm();
    const double tie_tol = 1e-12 * (1.0 + obj);
    if (obj < best_obj - tie_tol ||
        (obj <= best_obj + tie_tol && dist < best_dist)) {
      best_obj = obj;
      best_dist = dist;
      best.c = c;
      best.objective = obj;
    }
  }

  if (!std::isfinite(best_obj)) {
    // every face failed numerically; fall back to the uniform point
    best.c = uniform;
    best.objective = objective(best.c);
  }
  return best;
}

}  // namespace specmax
