#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "specmax/conformal.hpp"
#include "specmax/manifold.hpp"
#include "specmax/spectrum.hpp"

namespace specmax {

// Regularization scalars of the penalized functional at a given iterate.
struct RegParams {
  double epsilon = 0.0;
  double gamma1 = 1.0;  // 1 - (N-2)^{-1} (eps/lambda2) int u^{-eps}  (> 1)
  double gamma2 = 0.0;  // (N-2)^{-1} eps / |lambda2|                 (> 0)
  double beta = 0.0;    // 2 / (eps + N)
};

struct OptimParams {
  double eul_tol = 1e-6;          // certificate L2 residual target (dense default)
  double c_drop_tol = 1e-4;
  int max_iters = 200;
  double backtrack_tol = 1e-9;    // accepted steps may not lose more than this
  double blowup_factor = 10.0;
  double cert_window_frac = 0.75; // candidate window as a fraction of (l2-l1)
  std::vector<double> schedule = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
  double polish_eps_max = 1e-2 + 1e-12;  // limit stage runs once eps got this low
  double limit_tol = 1e-10;
  int limit_max_iters = 300;
  double sign_tol = 1e-8;
  EigenOptions eig;
  std::string checkpoint_dir;     // empty: no checkpoints
  bool resume = false;            // reuse matching checkpoints when present
};

struct EulerCertificate {
  Eigen::VectorXd c;          // simplex weights over `modes`
  std::vector<int> modes;     // eigenvalue indices (0-based) carrying weight
  double residual_l2 = 0.0;   // || gamma1 u^N - u^{N-2} sum c phi^2 - gamma2 u^{-eps} ||_{L2(dv)}
  double residual_sup = 0.0;
  double limit_residual = 0.0;  // int | gamma1 u^2 - sum c phi^2 | dv
  int k_effective = 0;
  RegParams params;
};

RegParams compute_reg_params(const DiscreteManifold& m, const ConformalFactor& u,
                             double eps, double lambda2);

// F_2(u) = lambda_2(u) (int u^N)^{(N-2)/N}
double evaluate_f2(const DiscreteManifold& m, const ConformalFactor& u,
                   const EigenOptions& opts = {});

// F_{2,eps}(u) = F_2(u) - (int u^{-eps}) (int u^N)^{eps/N}; u must be in
// D_eps, i.e. strictly positive on every node.
double evaluate_f2eps(const DiscreteManifold& m, const ConformalFactor& u,
                      double eps, const EigenOptions& opts = {});

// Fit the simplex weights of the Euler identity on the divided form
// gamma1 u^2 - gamma2 u^{2-N-eps} = sum c_i phi_i^2 over the candidate modes
// near lambda_2 and report the residual of the undivided identity.
EulerCertificate euler_certificate(const DiscreteManifold& m,
                                   const ConformalFactor& u, double eps,
                                   const SpectrumSlice& spectrum,
                                   const OptimParams& params = {});

struct IterationStat {
  int iter = 0;
  double eps = 0.0;
  double f2eps = 0.0;
  double lambda2 = 0.0;
  double residual_l2 = 0.0;
  double sup_u = 0.0;
  double inf_u = 0.0;
  double lipschitz = 0.0;
  double int_u_minus_eps = 0.0;
  double eps_int_u_minus_eps_minus_n = 0.0;
  double gamma1 = 0.0;
  double step = 1.0;  // accepted damping factor
};

struct MaximizeResult {
  ConformalFactor u;
  SpectrumSlice spectrum;
  EulerCertificate certificate;
  std::vector<IterationStat> history;
  bool converged = false;
  int iterations = 0;
  double f2eps = 0.0;
  bool stalled = false;
};

// Fixed-point ascent for F_{2,eps}: solve the spectrum, fit the certificate,
// update u = f^{-1}(sum c_i phi_i^2) through the monotone nodewise equation
// f(t) = gamma1 t^2 - gamma2 t^{-eps-N+2}, renormalize, damp geometrically
// when the functional would drop.
MaximizeResult maximize_f2eps(const DiscreteManifold& m, const ConformalFactor& u0,
                              double eps, const OptimParams& params = {});

enum class Classification { Nodal, HarmonicMap, Unresolved };

const char* to_string(Classification c);

struct ClassifyResult {
  Classification kind = Classification::Unresolved;
  int k = 0;
  // nodal branch
  double u_vs_absphi_rel_sup = 0.0;
  double nodal_residual = 0.0;
  bool sign_change = false;
  // harmonic branch
  double psi_sq_sum_err = 0.0;     // || sum psi_i^2 - 1 ||_inf on the support
  double harmonic_residual = 0.0;  // weak-form harmonic map defect
  bool support_restricted = false; // u vanished somewhere, checks on support only
  std::string note;
};

// Decide between the sign-changing solution (k = 1, u = |phi|) and the
// sphere-valued harmonic map (k >= 2, sum psi_i^2 = 1) at a limit candidate.
ClassifyResult classify(const DiscreteManifold& m, const ConformalFactor& u,
                        const SpectrumSlice& spectrum, const Eigen::VectorXd& c,
                        const std::vector<int>& modes,
                        const OptimParams& params = {});

struct EpsStage {
  double eps = 0.0;
  double lambda2 = 0.0;
  double f2eps = 0.0;
  double f2 = 0.0;
  double gamma1 = 0.0;
  double residual_l2 = 0.0;
  double limit_residual = 0.0;
  double sup_u = 0.0;
  double inf_u = 0.0;
  double lipschitz = 0.0;
  double int_u_minus_eps = 0.0;
  double eps_int_u_minus_eps_minus_n = 0.0;
  int iterations = 0;
  int k_effective = 0;
  bool converged = false;
  bool from_checkpoint = false;
};

struct ExtremalReport {
  ConformalFactor u_final;
  double lambda2 = 0.0;
  double f2 = 0.0;
  Classification classification = Classification::Unresolved;
  int k = 0;
  ClassifyResult detail;
  std::vector<EpsStage> stages;
  std::vector<IterationStat> history;
  double residual_slope = 0.0;  // log-log slope of limit_residual vs eps
  double beta_min = 0.0;        // 2/(eps_min + N)
  bool polished = false;
  int polish_iterations = 0;
  double polish_residual = 0.0;
  std::string unresolved_reason;
};

// Warm-started maximization along a strictly decreasing eps schedule with
// the diagnostics monitored for blow-up, followed by the eps -> 0 limit
// stage (u <- sqrt(sum c phi^2) fixed point) and classification.
ExtremalReport continuation(const DiscreteManifold& m, const ConformalFactor& u0,
                            const std::vector<double>& schedule,
                            const OptimParams& params = {});

// max over edges of |u_i - u_j| / length_ij
double lipschitz_proxy(const DiscreteManifold& m, const Eigen::VectorXd& values);

// checkpoint files: one per eps stage, plain text, resumable
struct Checkpoint {
  double eps = 0.0;
  double lambda2 = 0.0;
  double f2eps = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double residual_l2 = 0.0;
  double residual_sup = 0.0;
  double limit_residual = 0.0;
  int k_effective = 0;
  Eigen::VectorXd c;
  int iterations = 0;
  bool converged = false;
  Eigen::VectorXd u;
};

void write_checkpoint(const std::string& path, const Checkpoint& cp);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace specmax
