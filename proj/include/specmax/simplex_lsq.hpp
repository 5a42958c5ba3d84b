#pragma once

#include <Eigen/Dense>

namespace specmax {

struct SimplexFit {
  Eigen::VectorXd c;        // c >= 0, sum c = 1
  double objective = 0.0;   // sqrt( (Ac-b)^T W (Ac-b) )
};

// min ||A c - b||_W over the probability simplex. Dimensions are tiny (the
// cluster size), so every active set is enumerated and checked against the
// KKT conditions exactly; ties go to the candidate nearest the uniform
// weights.
SimplexFit simplex_lsq(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                       const Eigen::VectorXd& w);

}  // namespace specmax
