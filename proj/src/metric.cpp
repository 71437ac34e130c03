#include "dtdml/metric.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <stdexcept>
#include <string>

#include "dtdml/rng.hpp"

namespace dtdml {

Metric::Metric(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
  if (entries_.rows() < 1 || entries_.rows() != entries_.cols()) {
    throw std::invalid_argument("metric must be a square matrix of dimension >= 1, got " +
                                std::to_string(entries_.rows()) + "x" +
                                std::to_string(entries_.cols()));
  }
  const double scale = entries_.cwiseAbs().maxCoeff();
  const double asym = (entries_ - entries_.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale) {
    throw std::invalid_argument("metric is not symmetric: max |A_ij - A_ji| = " +
                                std::to_string(asym));
  }
}

EigenDecomposition eigendecompose(const Metric& metric) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(metric.entries());
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("eigendecomposition failed to converge");
  }
  // The solver reports eigenvalues ascending; flip to descending.
  const int d = metric.dim();
  EigenDecomposition result;
  result.eigenvalues = solver.eigenvalues().reverse();
  result.eigenvectors.resize(d, d);
  for (int i = 0; i < d; ++i) {
    result.eigenvectors.col(i) = solver.eigenvectors().col(d - 1 - i);
  }
  return result;
}

BasisSet source_eigenbases(const std::vector<Metric>& sources) {
  if (sources.empty()) {
    throw std::invalid_argument("source_eigenbases needs at least one source metric");
  }
  const int d = sources.front().dim();
  for (const Metric& source : sources) {
    if (source.dim() != d) {
      throw std::invalid_argument("source metrics disagree on dimension: " +
                                  std::to_string(source.dim()) + " vs " +
                                  std::to_string(d));
    }
  }
  BasisSet bases;
  bases.dim = d;
  bases.count = d * static_cast<int>(sources.size());
  bases.columns.resize(d, bases.count);
  bases.origin = BasisOrigin::SourceEigenvectors;
  int next = 0;
  for (const Metric& source : sources) {
    const EigenDecomposition decomp = eigendecompose(source);
    bases.columns.middleCols(next, d) = decomp.eigenvectors;
    next += d;
  }
  return bases;
}

BasisSet random_bases(int dim, int count, std::uint64_t seed) {
  if (dim < 1) throw std::invalid_argument("random_bases: dimension must be >= 1");
  if (count < 1) throw std::invalid_argument("random_bases: count must be >= 1");
  BasisSet bases;
  bases.dim = dim;
  bases.count = count;
  bases.columns.resize(dim, count);
  bases.origin = BasisOrigin::Random;

  std::mt19937_64 rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  int collected = 0;
  while (collected < count) {
    Eigen::MatrixXd g(dim, dim);
    for (int j = 0; j < dim; ++j) {
      for (int i = 0; i < dim; ++i) g(i, j) = normal(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, dim);
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    // Fixing column signs by the R diagonal makes the block Haar-distributed.
    for (int j = 0; j < dim; ++j) {
      if (r(j, j) < 0) q.col(j) = -q.col(j);
    }
    const int take = std::min(dim, count - collected);
    bases.columns.middleCols(collected, take) = q.leftCols(take);
    collected += take;
  }
  return bases;
}

Metric assemble_metric(const Eigen::VectorXd& theta, const BasisSet& bases) {
  if (theta.size() != bases.count) {
    throw std::invalid_argument("assemble_metric: theta has " +
                                std::to_string(theta.size()) + " entries for " +
                                std::to_string(bases.count) + " bases");
  }
  Eigen::MatrixXd a = bases.columns * theta.asDiagonal() * bases.columns.transpose();
  a = ((a + a.transpose()) * 0.5).eval();
  return Metric(std::move(a));
}

double mahalanobis_sq(const Metric& metric, const Eigen::VectorXd& x1,
                      const Eigen::VectorXd& x2) {
  if (x1.size() != metric.dim() || x2.size() != metric.dim()) {
    throw std::invalid_argument("mahalanobis_sq: vector size does not match metric dimension");
  }
  const Eigen::VectorXd delta = x1 - x2;
  return delta.dot(metric.entries() * delta);
}

Metric psd_project(const Metric& metric) {
  const EigenDecomposition decomp = eigendecompose(metric);
  const Eigen::VectorXd clamped = decomp.eigenvalues.cwiseMax(0.0);
  Eigen::MatrixXd a =
      decomp.eigenvectors * clamped.asDiagonal() * decomp.eigenvectors.transpose();
  a = ((a + a.transpose()) * 0.5).eval();
  return Metric(std::move(a));
}

}  // namespace dtdml
