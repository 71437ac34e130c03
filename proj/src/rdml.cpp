#include "dtdml/rdml.hpp"

#include <cmath>
#include <string>

#include "dtdml/errors.hpp"

namespace dtdml {

void RdmlConfig::validate() const {
  if (!(eta > 0) || !std::isfinite(eta)) {
    throw ConfigError("rdml.eta", "must be a positive finite number");
  }
  if (!(step_size > 0) || !std::isfinite(step_size)) {
    throw ConfigError("rdml.step_size", "must be a positive finite number");
  }
  if (epochs < 1) throw ConfigError("rdml.epochs", "must be >= 1");
  if (project_every < 1) throw ConfigError("rdml.project_every", "must be >= 1");
}

double rdml_objective(const Metric& metric, const PairSet& pairs, double eta) {
  if (pairs.count() == 0) {
    throw std::invalid_argument("rdml_objective: empty pair set");
  }
  const Eigen::VectorXd dists =
      (pairs.deltas.array() * (metric.entries() * pairs.deltas).array())
          .colwise()
          .sum();
  double loss = 0.0;
  for (int k = 0; k < pairs.count(); ++k) {
    loss += std::max(0.0, pairs.signs[k] * (dists[k] - 1.0));
  }
  loss /= pairs.count();
  return loss + 0.5 * eta * metric.entries().squaredNorm();
}

Eigen::MatrixXd rdml_subgradient(const Metric& metric, const PairSet& pairs,
                                 double eta) {
  if (pairs.count() == 0) {
    throw std::invalid_argument("rdml_subgradient: empty pair set");
  }
  const int d = pairs.dim();
  const Eigen::VectorXd dists =
      (pairs.deltas.array() * (metric.entries() * pairs.deltas).array())
          .colwise()
          .sum();
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(d, d);
  for (int k = 0; k < pairs.count(); ++k) {
    // Strict inequality: a pair sitting exactly on the kink contributes zero.
    if (pairs.signs[k] * (dists[k] - 1.0) > 0.0) {
      grad += (pairs.signs[k] / pairs.count()) * pairs.deltas.col(k) *
              pairs.deltas.col(k).transpose();
    }
  }
  grad += eta * metric.entries();
  return grad;
}

Metric train_rdml(const PairSet& pairs, const RdmlConfig& config) {
  config.validate();
  if (pairs.count() == 0) {
    throw std::invalid_argument("train_rdml: empty pair set");
  }
  const int d = pairs.dim();

  Metric best = Metric(Eigen::MatrixXd::Zero(d, d));
  double best_objective = rdml_objective(best, pairs, config.eta);

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
  for (int t = 1; t <= config.epochs; ++t) {
    const Metric current(a);
    const Eigen::MatrixXd grad = rdml_subgradient(current, pairs, config.eta);
    a -= (config.step_size / std::sqrt(static_cast<double>(t))) * grad;
    a = ((a + a.transpose()) * 0.5).eval();
    if (!a.allFinite()) {
      throw DivergenceError(t, "train_rdml: iterate became non-finite at epoch " +
                                   std::to_string(t));
    }
    if (t % config.project_every == 0 || t == config.epochs) {
      const Metric projected = psd_project(Metric(a));
      const double objective = rdml_objective(projected, pairs, config.eta);
      if (!std::isfinite(objective)) {
        throw DivergenceError(t, "train_rdml: objective became non-finite at epoch " +
                                     std::to_string(t));
      }
      if (objective < best_objective) {
        best_objective = objective;
        best = projected;
      }
    }
  }
  return best;
}

}  // namespace dtdml
