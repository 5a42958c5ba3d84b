#pragma once

#include <Eigen/Dense>

#include "specmax/manifold.hpp"
#include "specmax/rng.hpp"

namespace specmax {

// Zero-weighted-mean trigonometric polynomial of low frequency over the
// manifold's periodic coordinates, scaled to unit weighted standard
// deviation and then by `amplitude`. Used as deformation generators h.
Eigen::VectorXd smooth_bounded_field(const DiscreteManifold& m, Rng& rng,
                                     double amplitude, int max_frequency = 3);

// exp of a smooth bounded field: strictly positive, smooth, reproducible.
Eigen::VectorXd smooth_positive_field(const DiscreteManifold& m, Rng& rng,
                                      double amplitude, int max_frequency = 3);

}  // namespace specmax
