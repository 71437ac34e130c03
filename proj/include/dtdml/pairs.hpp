#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dtdml/metric.hpp"

namespace dtdml {

// Feature rows plus one class label per row. Labels are opaque strings.
struct LabeledDataset {
  Eigen::MatrixXd features;  // N x d
  std::vector<std::string> labels;

  int size() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
};

// Difference vectors delta_k = x_i - x_j (one column per pair) with the
// side-information sign y_k = +1 for same-class pairs, -1 otherwise.
// data_radius is the largest sample norm of the generating dataset, kept
// around because loss-stability bounds scale with it.
struct PairSet {
  Eigen::MatrixXd deltas;  // d x N'
  Eigen::VectorXd signs;   // N', entries +1 / -1
  double data_radius = 0.0;

  int count() const { return static_cast<int>(deltas.cols()); }
  int dim() const { return static_cast<int>(deltas.rows()); }
};

// Per-pair responses of every base metric: matrix(r, k) = (u_r . delta_k)^2,
// so theta^T column_k equals the squared Mahalanobis distance of pair k
// under the assembled metric. inf_norms caches the per-column maximum.
struct PairFeatures {
  Eigen::MatrixXd matrix;     // n x N'
  Eigen::VectorXd inf_norms;  // N'
};

/**
 * Builds pair constraints from a labeled dataset. All unordered pairs (i, j)
 * with i < j are emitted in lexicographic order; when max_pairs is given and
 * smaller than the total, a uniform subsample of that size is drawn with the
 * provided seed (selection kept in lexicographic order). Needs at least two
 * samples.
 */
PairSet generate_pairs(const LabeledDataset& data, std::optional<int> max_pairs,
                       std::uint64_t seed);

PairFeatures compute_pair_features(const PairSet& pairs, const BasisSet& bases);

// Concatenates pair sets of equal dimension; data_radius is the maximum.
PairSet merge_pair_sets(const std::vector<PairSet>& sets);

}  // namespace dtdml
