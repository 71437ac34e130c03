#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dtdml/metric.hpp"
#include "dtdml/pairs.hpp"

namespace dtdml {

/**
 * Transfer metric learning configuration.
 *
 * The target metric A = sum_r theta_r u_r u_r^T is fit by alternating two
 * blocks: an accelerated first-order solve for the combination weights theta
 * (hinge and L1 terms smoothed with parameters sigma / sigma_prime) and an
 * exact simplex-constrained coordinate-descent solve for the source weights
 * alpha that define the integrated source metric A_S = sum_p alpha_p A_p.
 *
 * gamma_a weighs the pull toward A_S and is always fixed by the caller.
 * gamma_b (alpha ridge) and gamma_c (theta L1) may each be fixed or left
 * empty for automatic tuning, which re-derives them once per outer iteration
 * from the current loss/regularizer balance scaled by rho_b / rho_c;
 * gamma_b_init / gamma_c_init seed the first iteration in that mode.
 */
struct DtdmlConfig {
  double gamma_a = 1.0;
  std::optional<double> gamma_b;  // empty = automatic
  std::optional<double> gamma_c;  // empty = automatic
  double gamma_b_init = 1.0;
  double gamma_c_init = 1.0;
  double rho_b = 1.0;
  double rho_c = 1.0;
  double sigma = 5.0;        // hinge smoothing width
  double sigma_prime = 0.1;  // L1 smoothing width
  double inner_tol = 1e-7;   // scaled by 1 + |F(0)| inside solve_theta
  int inner_max_iters = 1000;
  double outer_tol = 1e-4;   // relative progress threshold of the outer loop
  int outer_max_iters = 100;

  bool auto_gamma_b() const { return !gamma_b.has_value(); }
  bool auto_gamma_c() const { return !gamma_c.has_value(); }
  void validate() const;  // throws ConfigError naming the offending field
};

// Precomputed pieces of the alpha subproblem
//   min over the simplex of  1/2 alpha^T H alpha - alpha^T h
//                            + (gamma_b/2) ||alpha||^2,
// where H(p,q) = gamma_a tr(A_p A_q) and h(p) = gamma_a tr(A(theta) A_p).
// basis_quad(r, p) = u_r^T A_p u_r lets h follow theta cheaply.
struct AlphaWorkspace {
  Eigen::MatrixXd source_gram;  // m x m
  Eigen::VectorXd target_dot;   // m, tracks current theta
  Eigen::MatrixXd basis_quad;   // n x m

  int source_count() const { return static_cast<int>(source_gram.rows()); }
};

// Precomputed pieces of the theta subproblem. h_omega_matrix(s, t) =
// gamma_a (u_s . u_t)^2 and h_omega_vector(r) = gamma_a u_r^T A_S u_r give
// the quadratic pull toward the integrated source metric without ever
// materializing the rank-one outer products; omega_const completes
// (gamma_a/2) ||A - A_S||_F^2 so objective values are exact, not merely
// exact up to a constant.
struct ThetaWorkspace {
  Eigen::MatrixXd pair_features;   // n x N'
  Eigen::VectorXd signs;           // N'
  Eigen::VectorXd col_inf_norms;   // N'
  Eigen::MatrixXd h_omega_matrix;  // n x n
  Eigen::VectorXd h_omega_vector;  // n
  double omega_const = 0.0;
  double hinge_curvature = 0.0;  // max_k ||h_k||_2^2 / ||h_k||_inf
  double h_omega_norm = 0.0;     // spectral norm of h_omega_matrix
  double gamma_a = 1.0;
  int n_pairs = 0;
  int n_bases = 0;
  int degenerate_columns = 0;  // pairs with an all-zero feature column
};

AlphaWorkspace build_alpha_workspace(const std::vector<Metric>& sources,
                                     const BasisSet& bases, double gamma_a);

ThetaWorkspace build_theta_workspace(const PairFeatures& features,
                                     const Eigen::VectorXd& signs,
                                     const BasisSet& bases, double gamma_a);

// Refreshes target_dot after a theta change: h = gamma_a basis_quad^T theta.
void set_theta(AlphaWorkspace& ws, const Eigen::VectorXd& theta,
               double gamma_a);

// Refreshes h_omega_vector and omega_const after an alpha change.
void set_source_mix(ThetaWorkspace& ws, const AlphaWorkspace& alpha_ws,
                    const Eigen::VectorXd& alpha);

/**
 * Smoothed hinge. With s = sigma * h_inf and hinge argument z the value is
 *
 *          0                    z > 0
 *          z^2 / (2 s)          -s <= z <= 0
 *          -z - s / 2           z < -s,
 *
 * a C^1 lower approximation of max(0, -z) that is tight outside a band of
 * width s and never further than s/2 below. h_inf = 0 (a pair no base
 * metric can see) degrades to the unsmoothed hinge.
 */
double smoothed_hinge(double z, double sigma, double h_inf);

// Optimal dual weight of the smoothed hinge: median of {-z/(sigma h_inf),
// 0, 1}. The derivative of smoothed_hinge in z is -v; on branch boundaries
// the closed branch wins (v = 0 at z = 0, v = 1 at z = -sigma h_inf). For
// h_inf = 0 it falls back to the hinge subgradient convention, 1 for z < 0
// and 0 otherwise.
double hinge_dual_v(double z, double sigma, double h_inf);

// Smoothed absolute value: t^2 / (2 sigma_prime) inside [-sigma_prime,
// sigma_prime], |t| - sigma_prime/2 outside. Derivative is the clamp of
// t / sigma_prime to [-1, 1].
double smoothed_abs(double t, double sigma_prime);

// Smoothed and exact values of the theta objective
//   (1/N') sum_k hinge + gamma_c * L1(theta) + (gamma_a/2)||A - A_S||_F^2
// sharing one pass over the pair scores. first = smoothed, second = exact.
std::pair<double, double> theta_objectives(const Eigen::VectorXd& theta,
                                           const ThetaWorkspace& ws,
                                           const DtdmlConfig& config,
                                           double gamma_c);

double theta_objective_smoothed(const Eigen::VectorXd& theta,
                                const ThetaWorkspace& ws,
                                const DtdmlConfig& config, double gamma_c);

// Mean unsmoothed hinge loss over the pairs at the given theta.
double theta_hinge_loss(const Eigen::VectorXd& theta, const ThetaWorkspace& ws);

// Gradient of the smoothed theta objective:
//   (1/N') H_phi (y . v) + gamma_c v' + h_omega_matrix theta - h_omega_vector.
Eigen::VectorXd theta_gradient(const Eigen::VectorXd& theta,
                               const ThetaWorkspace& ws,
                               const DtdmlConfig& config, double gamma_c);

// Lipschitz bound for theta_gradient:
//   hinge_curvature / sigma + gamma_c / sigma_prime + ||h_omega_matrix||_2.
// Pairs with an all-zero feature column are excluded from the curvature
// term (they contribute a constant to the loss).
double theta_lipschitz(const ThetaWorkspace& ws, const DtdmlConfig& config,
                       double gamma_c);

struct ThetaSolveResult {
  Eigen::VectorXd theta;
  int iterations = 0;
  bool converged = false;
  // Smoothed objective at every iterate, starting with the zero vector.
  std::vector<double> objective_trace;
};

/**
 * Accelerated first-order solve of the smoothed theta objective. Iterates
 * start from the zero vector; each round takes a 1/L gradient step and mixes
 * it with a weighted running gradient history, stopping once consecutive
 * smoothed objective values differ by less than inner_tol * (1 + |F(0)|).
 *
 * The returned point is the trajectory iterate with the lowest smoothed
 * objective, demoted to `incoming` (the current outer-loop theta) whenever
 * that candidate would worsen the exact objective; block descent therefore
 * never moves uphill even though the surrogate is smoothed.
 */
ThetaSolveResult solve_theta(const Eigen::VectorXd& incoming,
                             const ThetaWorkspace& ws,
                             const DtdmlConfig& config, double gamma_c);

/**
 * Exact minimization of the alpha subproblem over the probability simplex
 * by pairwise coordinate descent: every sweep visits all index pairs
 * (i, j), i < j, in lexicographic order and moves mass between the two
 * coordinates optimally, keeping their sum fixed and both nonnegative.
 * Sweeps stop once the objective improves by less than 1e-10 or after
 * 1000 sweeps. A single source returns alpha = (1) immediately.
 */
Eigen::VectorXd solve_alpha(const Eigen::VectorXd& alpha_start,
                            const AlphaWorkspace& ws, double gamma_b);

// One optimal mass transfer between coordinates i and j; exposed so the
// per-update descent property is directly testable.
void alpha_pair_update(Eigen::VectorXd& alpha, int i, int j,
                       const AlphaWorkspace& ws, double gamma_b);

// Objective of the alpha subproblem (without the theta-only terms).
double alpha_objective(const Eigen::VectorXd& alpha, const AlphaWorkspace& ws,
                       double gamma_b);

/**
 * Automatic regularization update, one ratio per parameter:
 *
 *   gamma_c <- |rho_c| (loss + (gamma_a/2) div_before) / ||theta||_1
 *   gamma_b <- |rho_b| (gamma_a  div_after)            / ||alpha||_2^2
 *
 * where div_before is ||A - A_S||_F^2 against the source mix the theta
 * solve ran under and div_after uses the freshly updated mix. A denominator
 * below 1e-12 keeps the previous value (logged).
 */
std::pair<double, double> update_gammas(double loss, double div_before,
                                        double div_after,
                                        const Eigen::VectorXd& theta,
                                        const Eigen::VectorXd& alpha,
                                        const DtdmlConfig& config,
                                        double prev_gamma_b,
                                        double prev_gamma_c);

// ||A(theta) - A_S(alpha)||_F^2 evaluated from the Gram pieces; ws must
// carry the same alpha mix.
double source_divergence(const Eigen::VectorXd& theta, const ThetaWorkspace& ws);

// Same quantity assembled from dense matrices; the slow cross-check path.
double source_divergence_explicit(const Eigen::VectorXd& theta,
                                  const BasisSet& bases,
                                  const std::vector<Metric>& sources,
                                  const Eigen::VectorXd& alpha);

// Model objective with the unsmoothed hinge:
//   (1/N') sum hinge + (gamma_a/2)||A - A_S||^2 + (gamma_b/2)||alpha||^2
//   + gamma_c ||theta||_1.
double full_objective(const Eigen::VectorXd& theta,
                      const Eigen::VectorXd& alpha, const ThetaWorkspace& ws,
                      const DtdmlConfig& config, double gamma_b,
                      double gamma_c);

struct TraceRow {
  int iter = 0;
  double objective = 0.0;
  double gamma_b = 0.0;
  double gamma_c = 0.0;
  int nnz_theta = 0;  // entries with |theta_r| > 1e-6
  Eigen::VectorXd alpha;
};

struct SolverState {
  Eigen::VectorXd theta;
  Eigen::VectorXd alpha;
  double gamma_b_current = 0.0;
  double gamma_c_current = 0.0;
  std::vector<double> objective_trace;  // O_0, O_1, ... per outer iteration
  std::vector<double> half_step_trace;  // objective after every half step
  std::vector<TraceRow> rows;
  int iterations = 0;
  bool converged = false;
};

struct FitResult {
  Metric metric;
  SolverState state;
};

/**
 * Full alternating fit. Starts from theta = 0 and uniform alpha, repeats
 * theta solve / alpha solve (optionally followed by the automatic gamma
 * update) and stops once the relative objective progress
 * |O_k - O_{k-1}| / |O_k - O_0| falls below outer_tol, measuring O with the
 * unsmoothed hinge under the gammas the iteration was solved with. A flat
 * start (O_1 = O_0) counts as converged. If the iteration cap is hit the
 * best recorded iterate is returned with converged = false.
 */
FitResult fit(const PairSet& pairs, const std::vector<Metric>& sources,
              const BasisSet& bases, const DtdmlConfig& config);

// One CSV line per outer iteration:
//   iter,O_k,gamma_B,gamma_C,nnz_theta,alpha_1..alpha_m
void write_solver_trace(const std::string& path, const SolverState& state);

}  // namespace dtdml
