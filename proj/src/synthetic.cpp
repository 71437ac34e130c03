#include "dtdml/synthetic.hpp"

#include <Eigen/Dense>
#include <random>
#include <stdexcept>

#include "dtdml/rng.hpp"

namespace dtdml {

namespace {

Eigen::MatrixXd perturbation_rotation(int dim, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd skew(dim, dim);
  for (int i = 0; i < dim; ++i) {
    skew(i, i) = 0.0;
    for (int j = i + 1; j < dim; ++j) {
      const double g = scale * normal(rng);
      skew(i, j) = g;
      skew(j, i) = -g;
    }
  }
  Eigen::MatrixXd shifted = Eigen::MatrixXd::Identity(dim, dim) + skew;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(shifted);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < dim; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

}  // namespace

LabeledDataset make_synthetic_task(const SyntheticConfig& config,
                                   std::uint64_t seed, int rotation_index) {
  if (config.dim < 2) throw std::invalid_argument("make_synthetic_task: dim must be >= 2");
  if (config.samples_per_class < 1) {
    throw std::invalid_argument("make_synthetic_task: samples_per_class must be >= 1");
  }
  auto rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const int d = config.dim;
  Eigen::MatrixXd frame = Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd offset = Eigen::VectorXd::Zero(d);
  if (rotation_index != 0) {
    frame = perturbation_rotation(d, config.rotation, rng);
    for (int i = 0; i < d; ++i) offset(i) = config.mean_jitter * normal(rng);
  }

  Eigen::VectorXd scale(d);
  scale(0) = config.signal_sigma;
  for (int i = 1; i < d; ++i) scale(i) = config.nuisance_sigma;

  const int n = 2 * config.samples_per_class;
  LabeledDataset data;
  data.features.resize(n, d);
  data.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const bool positive = i < config.samples_per_class;
    Eigen::VectorXd raw(d);
    for (int j = 0; j < d; ++j) raw(j) = scale(j) * normal(rng);
    raw(0) += (positive ? 0.5 : -0.5) * config.separation;
    data.features.row(i) = (frame * raw + offset).transpose();
    data.labels[i] = positive ? "pos" : "neg";
  }
  return data;
}

TransferSuite make_transfer_suite(const SyntheticConfig& config, int n_sources,
                                  std::uint64_t seed) {
  if (n_sources < 1) {
    throw std::invalid_argument("make_transfer_suite: n_sources must be >= 1");
  }
  TransferSuite suite;
  suite.target = make_synthetic_task(config, mix_seed(seed, 0), 0);
  for (int p = 1; p <= n_sources; ++p) {
    suite.sources.push_back(make_synthetic_task(config, mix_seed(seed, p), p));
  }
  return suite;
}

}  // namespace dtdml
