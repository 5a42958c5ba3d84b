#include "specmax/random_field.hpp"

#include <cmath>

#include "specmax/error.hpp"

namespace specmax {

Eigen::VectorXd smooth_bounded_field(const DiscreteManifold& m, Rng& rng,
                                     double amplitude, int max_frequency) {
  const Eigen::Index n = m.node_count;
  const Eigen::Index nc = m.coords.cols();
  if (nc == 0)
    throw config_error("manifold carries no coordinates for field synthesis");

  Eigen::VectorXd t = Eigen::VectorXd::Zero(n);
  for (Eigen::Index c = 0; c < nc; ++c) {
    for (int k = 1; k <= max_frequency; ++k) {
      const double a = rng.normal() / k;
      const double b = rng.normal() / k;
      t += a * (k * m.coords.col(c)).array().cos().matrix() +
           b * (k * m.coords.col(c)).array().sin().matrix();
    }
  }
  // low-order cross terms couple the factors
  for (Eigen::Index c = 0; c + 1 < nc; ++c) {
    const Eigen::ArrayXd sum = m.coords.col(c).array() + m.coords.col(c + 1).array();
    const Eigen::ArrayXd dif = m.coords.col(c).array() - m.coords.col(c + 1).array();
    t += (rng.normal() * sum.cos() + rng.normal() * sum.sin() +
          rng.normal() * dif.cos() + rng.normal() * dif.sin())
             .matrix();
  }

  const double w_total = m.weights.sum();
  const double mean = m.weights.dot(t) / w_total;
  t.array() -= mean;
  const double var = m.weights.dot(t.cwiseProduct(t)) / w_total;
  const double sd = std::sqrt(std::max(var, 1e-300));
  return (amplitude / sd) * t;
}

Eigen::VectorXd smooth_positive_field(const DiscreteManifold& m, Rng& rng,
                                      double amplitude, int max_frequency) {
  return smooth_bounded_field(m, rng, amplitude, max_frequency)
      .array()
      .exp()
      .matrix();
}

}  // namespace specmax
