#pragma once

#include <Eigen/Dense>

#include <cstdint>

#include "dtdml/metric.hpp"
#include "dtdml/pairs.hpp"

namespace dtdml {

struct RdmlConfig {
  double eta = 0.01;      // Frobenius regularization weight
  double step_size = 1.0; // base step, decayed as step_size / sqrt(t)
  int epochs = 200;
  int project_every = 10; // PSD projection cadence, also applied at the end
  std::uint64_t seed = 0; // reserved; the batch solver itself is deterministic

  void validate() const;  // throws ConfigError naming the offending field
};

/**
 * Mean hinge loss over the pair constraints plus (eta/2) ||A||_F^2. Each
 * pair contributes max(0, y_k (d_A(pair) - 1)): similar pairs are charged
 * once their distance exceeds the unit margin, dissimilar pairs once they
 * fall inside it.
 */
double rdml_objective(const Metric& metric, const PairSet& pairs, double eta);

// Batch subgradient of rdml_objective at `metric`. Pairs sitting exactly on
// the hinge kink contribute zero.
Eigen::MatrixXd rdml_subgradient(const Metric& metric, const PairSet& pairs,
                                 double eta);

/**
 * Margin-based metric learning over pair constraints: projected subgradient
 * descent on rdml_objective starting from the zero matrix, step decayed by
 * 1/sqrt(t), PSD projection every project_every epochs and on termination.
 * Returns the best PSD iterate observed, so the result never scores worse
 * than the starting point. Throws DivergenceError if an iterate goes
 * non-finite.
 */
Metric train_rdml(const PairSet& pairs, const RdmlConfig& config);

}  // namespace dtdml
