#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace dtdml {

/**
 * Symmetric matrix parameterizing a squared Mahalanobis distance
 *
 *   d_A(x1, x2) = (x1 - x2)^T A (x1 - x2).
 *
 * Construction validates squareness and symmetry (max |A_ij - A_ji| must not
 * exceed 1e-12 times the largest absolute entry). Positive semi-definiteness
 * is not a type invariant: solvers work with indefinite iterates and only
 * psd_project / train_rdml guarantee a PSD result.
 */
class Metric {
 public:
  explicit Metric(Eigen::MatrixXd entries);

  int dim() const { return static_cast<int>(entries_.rows()); }
  const Eigen::MatrixXd& entries() const { return entries_; }

 private:
  Eigen::MatrixXd entries_;
};

// Result of a symmetric eigendecomposition, eigenvalues sorted descending,
// eigenvector column i paired with eigenvalues[i].
struct EigenDecomposition {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
};

enum class BasisOrigin { SourceEigenvectors, Random };

// Collection of unit-norm direction vectors u_r, stored as columns. Each
// induces the rank-one base metric u_r u_r^T; a target metric is assembled
// as a weighted sum of those.
struct BasisSet {
  int dim = 0;
  int count = 0;
  Eigen::MatrixXd columns;  // dim x count
  BasisOrigin origin = BasisOrigin::Random;
};

EigenDecomposition eigendecompose(const Metric& metric);

/**
 * Concatenates the eigenvector columns of every source metric, in source
 * order, eigenvalues descending within each source. With m sources of
 * dimension d the result holds m*d columns. All sources must share one
 * dimension.
 */
BasisSet source_eigenbases(const std::vector<Metric>& sources);

/**
 * Draws `count` random unit vectors by repeatedly QR-orthonormalizing
 * standard-normal d x d matrices and concatenating the resulting columns
 * until enough are collected. Columns within one block are mutually
 * orthonormal; the draw is deterministic for a fixed seed.
 */
BasisSet random_bases(int dim, int count, std::uint64_t seed);

// A(theta) = sum_r theta_r u_r u_r^T, symmetrized against roundoff.
Metric assemble_metric(const Eigen::VectorXd& theta, const BasisSet& bases);

double mahalanobis_sq(const Metric& metric, const Eigen::VectorXd& x1,
                      const Eigen::VectorXd& x2);

// Frobenius-nearest PSD matrix: eigendecompose, clamp negative eigenvalues
// to zero, reassemble.
Metric psd_project(const Metric& metric);

}  // namespace dtdml
