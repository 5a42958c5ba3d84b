#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specmax/manifold.hpp"
#include "specmax/optimizer.hpp"
#include "specmax/spectrum.hpp"

namespace specmax {

// Flat key = value configuration, one [section] per concern. Unknown keys
// are rejected with their line number.
struct RunConfig {
  // [manifold]
  std::string generator = "product_example";
  double radius = 1.0;
  double radius2 = 0.5;
  int nodes = 256;
  int nodes2 = 128;
  int dim = 3;
  bool has_potential = false;
  double potential = 0.0;
  std::string mesh_path;

  // [solver]
  double solver_tol = 1e-8;
  double cluster_tol = 1e-6;
  double null_tol = 1e-7;
  long dense_threshold = 2000;
  int count = 8;
  double residual_tol = 1e-11;
  int max_basis = 320;

  // [optimizer]
  std::vector<double> schedule = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
  double eul_tol = -1.0;  // < 0: auto (1e-6 dense, 1e-4 iterative)
  double c_drop_tol = 1e-4;
  int max_iters = 200;
  double backtrack_tol = 1e-9;
  double blowup_factor = 10.0;
  double cert_window_frac = 0.75;
  double limit_tol = 1e-10;
  int limit_max_iters = 300;
  double polish_eps_max = 1e-2 + 1e-12;
  std::string start = "perturbed";  // or "constant"
  double start_amplitude = 0.3;

  // [run]
  uint64_t seed = 0;
  std::string out_dir = ".";
  int trials = 200;
  int threads = 2;
  bool resume = false;
  double maximality_tol = 1e-8;
};

RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin);

// builds the configured manifold (generators or mesh file)
DiscreteManifold instantiate_manifold(const RunConfig& cfg);

EigenOptions eigen_options(const RunConfig& cfg);
OptimParams optimizer_params(const RunConfig& cfg, const DiscreteManifold& m);

}  // namespace specmax
