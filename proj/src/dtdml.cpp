#include "dtdml/dtdml.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>

#include "dtdml/errors.hpp"
#include "dtdml/log.hpp"

namespace dtdml {

namespace {

double positive_or_throw(double value, const char* key) {
  if (!(value > 0) || !std::isfinite(value)) {
    throw ConfigError(key, "must be a positive finite number");
  }
  return value;
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

}  // namespace

void DtdmlConfig::validate() const {
  positive_or_throw(gamma_a, "dtdml.gamma_a");
  if (gamma_b) positive_or_throw(*gamma_b, "dtdml.gamma_b");
  if (gamma_c) positive_or_throw(*gamma_c, "dtdml.gamma_c");
  positive_or_throw(gamma_b_init, "dtdml.gamma_b_init");
  positive_or_throw(gamma_c_init, "dtdml.gamma_c_init");
  if (!std::isfinite(rho_b)) throw ConfigError("dtdml.rho_b", "must be finite");
  if (!std::isfinite(rho_c)) throw ConfigError("dtdml.rho_c", "must be finite");
  positive_or_throw(sigma, "dtdml.sigma");
  positive_or_throw(sigma_prime, "dtdml.sigma_prime");
  positive_or_throw(inner_tol, "dtdml.inner_tol");
  if (inner_max_iters < 1) throw ConfigError("dtdml.inner_max_iters", "must be >= 1");
  positive_or_throw(outer_tol, "dtdml.outer_tol");
  if (outer_max_iters < 1) throw ConfigError("dtdml.outer_max_iters", "must be >= 1");
}

AlphaWorkspace build_alpha_workspace(const std::vector<Metric>& sources,
                                     const BasisSet& bases, double gamma_a) {
  if (sources.empty()) {
    throw std::invalid_argument("build_alpha_workspace: no source metrics");
  }
  const int m = static_cast<int>(sources.size());
  const int d = sources.front().dim();
  for (const Metric& s : sources) {
    if (s.dim() != d) {
      throw std::invalid_argument("build_alpha_workspace: sources disagree on dimension");
    }
  }
  if (bases.dim != d) {
    throw std::invalid_argument("build_alpha_workspace: basis dimension does not match sources");
  }

  AlphaWorkspace ws;
  ws.source_gram.resize(m, m);
  for (int p = 0; p < m; ++p) {
    for (int q = p; q < m; ++q) {
      const double dot =
          gamma_a * (sources[p].entries().array() * sources[q].entries().array()).sum();
      ws.source_gram(p, q) = dot;
      ws.source_gram(q, p) = dot;
    }
  }
  ws.basis_quad.resize(bases.count, m);
  for (int p = 0; p < m; ++p) {
    const Eigen::MatrixXd mapped = sources[p].entries() * bases.columns;
    ws.basis_quad.col(p) =
        (bases.columns.array() * mapped.array()).colwise().sum().transpose();
  }
  ws.target_dot = Eigen::VectorXd::Zero(m);
  return ws;
}

ThetaWorkspace build_theta_workspace(const PairFeatures& features,
                                     const Eigen::VectorXd& signs,
                                     const BasisSet& bases, double gamma_a) {
  if (features.matrix.cols() != signs.size()) {
    throw std::invalid_argument("build_theta_workspace: feature/sign count mismatch");
  }
  if (features.matrix.rows() != bases.count) {
    throw std::invalid_argument("build_theta_workspace: feature rows do not match basis count");
  }
  ThetaWorkspace ws;
  ws.pair_features = features.matrix;
  ws.signs = signs;
  ws.col_inf_norms = features.inf_norms;
  ws.gamma_a = gamma_a;
  ws.n_pairs = static_cast<int>(signs.size());
  ws.n_bases = bases.count;

  ws.h_omega_matrix =
      gamma_a * (bases.columns.transpose() * bases.columns).array().square().matrix();
  ws.h_omega_vector = Eigen::VectorXd::Zero(bases.count);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(ws.h_omega_matrix,
                                                        Eigen::EigenvaluesOnly);
  ws.h_omega_norm = solver.eigenvalues().cwiseAbs().maxCoeff();

  ws.hinge_curvature = 0.0;
  for (int k = 0; k < ws.n_pairs; ++k) {
    if (ws.col_inf_norms[k] == 0.0) {
      ++ws.degenerate_columns;
      continue;
    }
    ws.hinge_curvature = std::max(
        ws.hinge_curvature,
        ws.pair_features.col(k).squaredNorm() / ws.col_inf_norms[k]);
  }
  if (ws.degenerate_columns > 0) {
    log_warn(std::to_string(ws.degenerate_columns) +
             " pair(s) invisible to every basis vector; they keep the unsmoothed "
             "hinge and contribute a constant loss");
  }
  return ws;
}

void set_theta(AlphaWorkspace& ws, const Eigen::VectorXd& theta, double gamma_a) {
  ws.target_dot = gamma_a * (ws.basis_quad.transpose() * theta);
}

void set_source_mix(ThetaWorkspace& ws, const AlphaWorkspace& alpha_ws,
                    const Eigen::VectorXd& alpha) {
  // basis_quad carries no gamma_a factor, source_gram already does.
  ws.h_omega_vector = ws.gamma_a * (alpha_ws.basis_quad * alpha);
  ws.omega_const = 0.5 * alpha.dot(alpha_ws.source_gram * alpha);
}

double smoothed_hinge(double z, double sigma, double h_inf) {
  if (h_inf <= 0.0) return std::max(0.0, -z);
  const double s = sigma * h_inf;
  if (z > 0.0) return 0.0;
  if (z < -s) return -z - 0.5 * s;
  return z * z / (2.0 * s);
}

double hinge_dual_v(double z, double sigma, double h_inf) {
  if (h_inf <= 0.0) return z < 0.0 ? 1.0 : 0.0;
  const double s = sigma * h_inf;
  if (z >= 0.0) return 0.0;
  if (z <= -s) return 1.0;
  return -z / s;
}

double smoothed_abs(double t, double sigma_prime) {
  const double a = std::abs(t);
  if (a > sigma_prime) return a - 0.5 * sigma_prime;
  return t * t / (2.0 * sigma_prime);
}

namespace {

// Shared evaluation pass: pair scores appear in both objectives and the
// gradient, so everything funnels through this helper.
struct ObjectivePair {
  double smoothed = 0.0;
  double exact = 0.0;
};

ObjectivePair hinge_terms(const Eigen::VectorXd& theta, const ThetaWorkspace& ws,
                          double sigma) {
  ObjectivePair out;
  if (ws.n_pairs == 0) return out;
  const Eigen::VectorXd scores = ws.pair_features.transpose() * theta;
  for (int k = 0; k < ws.n_pairs; ++k) {
    const double z = ws.signs[k] * (1.0 - scores[k]);
    out.smoothed += smoothed_hinge(z, sigma, ws.col_inf_norms[k]);
    out.exact += std::max(0.0, -z);
  }
  out.smoothed /= ws.n_pairs;
  out.exact /= ws.n_pairs;
  return out;
}

double omega_term(const Eigen::VectorXd& theta, const ThetaWorkspace& ws) {
  return 0.5 * theta.dot(ws.h_omega_matrix * theta) - theta.dot(ws.h_omega_vector) +
         ws.omega_const;
}

}  // namespace

std::pair<double, double> theta_objectives(const Eigen::VectorXd& theta,
                                           const ThetaWorkspace& ws,
                                           const DtdmlConfig& config,
                                           double gamma_c) {
  const ObjectivePair hinge = hinge_terms(theta, ws, config.sigma);
  const double omega = omega_term(theta, ws);
  double l1_smoothed = 0.0;
  for (int r = 0; r < theta.size(); ++r) {
    l1_smoothed += smoothed_abs(theta[r], config.sigma_prime);
  }
  const double smoothed = hinge.smoothed + gamma_c * l1_smoothed + omega;
  const double exact = hinge.exact + gamma_c * theta.lpNorm<1>() + omega;
  return {smoothed, exact};
}

double theta_objective_smoothed(const Eigen::VectorXd& theta,
                                const ThetaWorkspace& ws,
                                const DtdmlConfig& config, double gamma_c) {
  return theta_objectives(theta, ws, config, gamma_c).first;
}

double theta_hinge_loss(const Eigen::VectorXd& theta, const ThetaWorkspace& ws) {
  return hinge_terms(theta, ws, 1.0).exact;
}

Eigen::VectorXd theta_gradient(const Eigen::VectorXd& theta,
                               const ThetaWorkspace& ws,
                               const DtdmlConfig& config, double gamma_c) {
  Eigen::VectorXd grad = ws.h_omega_matrix * theta - ws.h_omega_vector;
  for (int r = 0; r < theta.size(); ++r) {
    grad[r] += gamma_c * std::clamp(theta[r] / config.sigma_prime, -1.0, 1.0);
  }
  if (ws.n_pairs > 0) {
    const Eigen::VectorXd scores = ws.pair_features.transpose() * theta;
    Eigen::VectorXd weights(ws.n_pairs);
    for (int k = 0; k < ws.n_pairs; ++k) {
      const double z = ws.signs[k] * (1.0 - scores[k]);
      weights[k] = ws.signs[k] * hinge_dual_v(z, config.sigma, ws.col_inf_norms[k]);
    }
    grad.noalias() += (1.0 / ws.n_pairs) * (ws.pair_features * weights);
  }
  return grad;
}

double theta_lipschitz(const ThetaWorkspace& ws, const DtdmlConfig& config,
                       double gamma_c) {
  return ws.hinge_curvature / config.sigma + gamma_c / config.sigma_prime +
         ws.h_omega_norm;
}

ThetaSolveResult solve_theta(const Eigen::VectorXd& incoming,
                             const ThetaWorkspace& ws,
                             const DtdmlConfig& config, double gamma_c) {
  const int n = ws.n_bases;
  const double lipschitz = std::max(theta_lipschitz(ws, config, gamma_c),
                                    std::numeric_limits<double>::min());

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad_history = Eigen::VectorXd::Zero(n);

  auto objectives = [&](const Eigen::VectorXd& point) {
    return theta_objectives(point, ws, config, gamma_c);
  };

  ThetaSolveResult result;
  auto [f_smoothed, f_exact] = objectives(theta);
  const double eps = config.inner_tol * (1.0 + std::abs(f_smoothed));
  result.objective_trace.push_back(f_smoothed);

  Eigen::VectorXd best_smoothed_point = theta;
  double best_smoothed_value = f_smoothed;
  Eigen::VectorXd best_exact_point = theta;
  double best_exact_value = f_exact;

  double f_prev = f_smoothed;
  for (int t = 0; t < config.inner_max_iters; ++t) {
    const Eigen::VectorXd grad = theta_gradient(theta, ws, config, gamma_c);
    const Eigen::VectorXd y = theta - grad / lipschitz;
    grad_history += (0.5 * (t + 1)) * grad;
    const Eigen::VectorXd z = -grad_history / lipschitz;  // anchored at zero
    theta = (2.0 / (t + 3)) * z + (static_cast<double>(t + 1) / (t + 3)) * y;

    auto [f_new, f_new_exact] = objectives(theta);
    if (!std::isfinite(f_new)) {
      throw DivergenceError(t + 1, "solve_theta: objective became non-finite at iteration " +
                                       std::to_string(t + 1));
    }
    result.objective_trace.push_back(f_new);
    result.iterations = t + 1;
    if (f_new < best_smoothed_value) {
      best_smoothed_value = f_new;
      best_smoothed_point = theta;
    }
    if (f_new_exact < best_exact_value) {
      best_exact_value = f_new_exact;
      best_exact_point = theta;
    }
    if (std::abs(f_new - f_prev) < eps) {
      result.converged = true;
      break;
    }
    f_prev = f_new;
  }

  // The accelerated iteration optimizes the smoothed surrogate; take its best
  // point unless doing so would raise the exact objective above the incoming
  // iterate, in which case fall back to the best exact point seen (or the
  // incoming point itself). Keeps the outer alternation monotone.
  const double incoming_exact = objectives(incoming).second;
  const double candidate_exact = objectives(best_smoothed_point).second;
  if (candidate_exact <= incoming_exact) {
    result.theta = best_smoothed_point;
  } else if (best_exact_value <= incoming_exact) {
    result.theta = best_exact_point;
  } else {
    result.theta = incoming;
  }
  return result;
}

double alpha_objective(const Eigen::VectorXd& alpha, const AlphaWorkspace& ws,
                       double gamma_b) {
  return 0.5 * alpha.dot(ws.source_gram * alpha) - alpha.dot(ws.target_dot) +
         0.5 * gamma_b * alpha.squaredNorm();
}

void alpha_pair_update(Eigen::VectorXd& alpha, int i, int j,
                       const AlphaWorkspace& ws, double gamma_b) {
  const double c = alpha[i] + alpha[j];
  const Eigen::MatrixXd& h = ws.source_gram;
  const double h_alpha_i = h.row(i).dot(alpha);
  const double h_alpha_j = h.row(j).dot(alpha);
  const double curvature = h(i, i) - h(i, j) - h(j, i) + h(j, j);

  const double num_i =
      gamma_b * c + (ws.target_dot[i] - ws.target_dot[j]) +
      curvature * alpha[i] - (h_alpha_i - h_alpha_j);
  const double num_j =
      gamma_b * c + (ws.target_dot[j] - ws.target_dot[i]) +
      curvature * alpha[j] - (h_alpha_j - h_alpha_i);

  double a_i;
  if (num_i <= 0.0) {
    a_i = 0.0;
  } else if (num_j <= 0.0) {
    a_i = c;
  } else {
    // num_i + num_j = c * (curvature + 2 gamma_b) > 0 here, so the
    // denominator is safe.
    a_i = std::min(num_i / (curvature + 2.0 * gamma_b), c);
  }
  alpha[i] = a_i;
  alpha[j] = c - a_i;
}

Eigen::VectorXd solve_alpha(const Eigen::VectorXd& alpha_start,
                            const AlphaWorkspace& ws, double gamma_b) {
  const int m = ws.source_count();
  if (alpha_start.size() != m) {
    throw std::invalid_argument("solve_alpha: alpha size does not match source count");
  }
  if (m == 1) return Eigen::VectorXd::Ones(1);

  Eigen::VectorXd alpha = alpha_start;
  double objective = alpha_objective(alpha, ws, gamma_b);
  for (int sweep = 0; sweep < 1000; ++sweep) {
    for (int i = 0; i < m - 1; ++i) {
      for (int j = i + 1; j < m; ++j) {
        alpha_pair_update(alpha, i, j, ws, gamma_b);
      }
    }
    // Re-pin the simplex sum exactly; per-pair updates preserve it only up
    // to roundoff.
    int largest = 0;
    alpha.maxCoeff(&largest);
    double rest = 0.0;
    for (int p = 0; p < m; ++p) {
      if (p != largest) rest += alpha[p];
    }
    alpha[largest] = 1.0 - rest;
    if (alpha[largest] < 0.0) alpha[largest] = 0.0;

    const double updated = alpha_objective(alpha, ws, gamma_b);
    const double decrease = objective - updated;
    objective = updated;
    if (decrease < 1e-10) break;
  }
  return alpha;
}

std::pair<double, double> update_gammas(double loss, double div_before,
                                        double div_after,
                                        const Eigen::VectorXd& theta,
                                        const Eigen::VectorXd& alpha,
                                        const DtdmlConfig& config,
                                        double prev_gamma_b,
                                        double prev_gamma_c) {
  double gamma_b = prev_gamma_b;
  double gamma_c = prev_gamma_c;

  const double theta_l1 = theta.lpNorm<1>();
  if (theta_l1 < 1e-12) {
    log_info("gamma_c update skipped: ||theta||_1 below 1e-12, keeping previous value");
  } else {
    gamma_c = std::abs(config.rho_c) *
              (loss + 0.5 * config.gamma_a * div_before) / theta_l1;
  }

  const double alpha_sq = alpha.squaredNorm();
  if (alpha_sq < 1e-12) {
    log_info("gamma_b update skipped: ||alpha||_2^2 below 1e-12, keeping previous value");
  } else {
    gamma_b = std::abs(config.rho_b) * (config.gamma_a * div_after) / alpha_sq;
  }
  return {gamma_b, gamma_c};
}

double source_divergence(const Eigen::VectorXd& theta, const ThetaWorkspace& ws) {
  return 2.0 * omega_term(theta, ws) / ws.gamma_a;
}

double source_divergence_explicit(const Eigen::VectorXd& theta,
                                  const BasisSet& bases,
                                  const std::vector<Metric>& sources,
                                  const Eigen::VectorXd& alpha) {
  const Metric a = assemble_metric(theta, bases);
  Eigen::MatrixXd a_s = Eigen::MatrixXd::Zero(bases.dim, bases.dim);
  for (std::size_t p = 0; p < sources.size(); ++p) {
    a_s += alpha[static_cast<int>(p)] * sources[p].entries();
  }
  return (a.entries() - a_s).squaredNorm();
}

double full_objective(const Eigen::VectorXd& theta, const Eigen::VectorXd& alpha,
                      const ThetaWorkspace& ws, const DtdmlConfig& config,
                      double gamma_b, double gamma_c) {
  const ObjectivePair hinge = hinge_terms(theta, ws, config.sigma);
  return hinge.exact + omega_term(theta, ws) + 0.5 * gamma_b * alpha.squaredNorm() +
         gamma_c * theta.lpNorm<1>();
}

namespace {

int count_nonzero(const Eigen::VectorXd& theta) {
  int nnz = 0;
  for (int r = 0; r < theta.size(); ++r) {
    if (std::abs(theta[r]) > 1e-6) ++nnz;
  }
  return nnz;
}

}  // namespace

FitResult fit(const PairSet& pairs, const std::vector<Metric>& sources,
              const BasisSet& bases, const DtdmlConfig& config) {
  config.validate();
  if (sources.empty()) {
    throw std::invalid_argument("fit: needs at least one source metric");
  }
  if (pairs.count() > 0 && pairs.dim() != bases.dim) {
    throw std::invalid_argument("fit: pair dimension does not match basis dimension");
  }

  const int m = static_cast<int>(sources.size());
  const PairFeatures features = compute_pair_features(pairs, bases);
  AlphaWorkspace alpha_ws = build_alpha_workspace(sources, bases, config.gamma_a);
  ThetaWorkspace theta_ws =
      build_theta_workspace(features, pairs.signs, bases, config.gamma_a);

  SolverState state;
  state.theta = Eigen::VectorXd::Zero(bases.count);
  state.alpha = Eigen::VectorXd::Constant(m, 1.0 / m);
  state.gamma_b_current = config.gamma_b.value_or(config.gamma_b_init);
  state.gamma_c_current = config.gamma_c.value_or(config.gamma_c_init);

  set_source_mix(theta_ws, alpha_ws, state.alpha);
  set_theta(alpha_ws, state.theta, config.gamma_a);

  const double o_0 = full_objective(state.theta, state.alpha, theta_ws, config,
                                    state.gamma_b_current, state.gamma_c_current);
  state.objective_trace.push_back(o_0);

  SolverState best = state;
  double best_objective = o_0;
  double o_prev = o_0;

  for (int k = 1; k <= config.outer_max_iters; ++k) {
    const double gamma_b_k = state.gamma_b_current;
    const double gamma_c_k = state.gamma_c_current;

    ThetaSolveResult theta_solve =
        solve_theta(state.theta, theta_ws, config, gamma_c_k);
    state.theta = theta_solve.theta;
    state.half_step_trace.push_back(full_objective(
        state.theta, state.alpha, theta_ws, config, gamma_b_k, gamma_c_k));

    const double loss = theta_hinge_loss(state.theta, theta_ws);
    const double div_before = source_divergence(state.theta, theta_ws);

    set_theta(alpha_ws, state.theta, config.gamma_a);
    state.alpha = solve_alpha(state.alpha, alpha_ws, gamma_b_k);
    set_source_mix(theta_ws, alpha_ws, state.alpha);
    const double div_after = source_divergence(state.theta, theta_ws);

    const double o_k = full_objective(state.theta, state.alpha, theta_ws, config,
                                      gamma_b_k, gamma_c_k);
    state.half_step_trace.push_back(o_k);
    state.objective_trace.push_back(o_k);
    state.iterations = k;
    state.rows.push_back(TraceRow{k, o_k, gamma_b_k, gamma_c_k,
                                  count_nonzero(state.theta), state.alpha});

    if (config.auto_gamma_b() || config.auto_gamma_c()) {
      const auto [gamma_b_next, gamma_c_next] =
          update_gammas(loss, div_before, div_after, state.theta, state.alpha,
                        config, gamma_b_k, gamma_c_k);
      if (config.auto_gamma_b()) state.gamma_b_current = gamma_b_next;
      if (config.auto_gamma_c()) state.gamma_c_current = gamma_c_next;
    }

    if (o_k < best_objective) {
      best_objective = o_k;
      best = state;
    }

    const double denom = std::abs(o_k - o_0);
    if (denom < 1e-300) {
      // Flat start: nothing to improve relative to, treat as converged.
      state.converged = true;
      break;
    }
    if (k >= 2 && std::abs(o_k - o_prev) / denom < config.outer_tol) {
      state.converged = true;
      break;
    }
    o_prev = o_k;
  }

  if (!state.converged) {
    const bool best_flag = false;
    best.converged = best_flag;
    best.iterations = state.iterations;
    // Keep the full trace alongside the best iterate.
    best.objective_trace = state.objective_trace;
    best.half_step_trace = state.half_step_trace;
    best.rows = state.rows;
    state = best;
  }

  return FitResult{assemble_metric(state.theta, bases), std::move(state)};
}

void write_solver_trace(const std::string& path, const SolverState& state) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_solver_trace: cannot open " + path);
  out << "iter,O_k,gamma_B,gamma_C,nnz_theta";
  const int m = state.alpha.size() ? static_cast<int>(state.alpha.size()) : 0;
  for (int p = 1; p <= m; ++p) out << ",alpha_" << p;
  out << "\n";
  for (const TraceRow& row : state.rows) {
    out << row.iter << ',' << format_double(row.objective) << ','
        << format_double(row.gamma_b) << ',' << format_double(row.gamma_c) << ','
        << row.nnz_theta;
    for (int p = 0; p < row.alpha.size(); ++p) {
      out << ',' << format_double(row.alpha[p]);
    }
    out << "\n";
  }
  if (!out.good()) throw std::runtime_error("write_solver_trace: write failed for " + path);
}

}  // namespace dtdml
