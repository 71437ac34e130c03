#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include "dtdml/errors.hpp"
#include "dtdml/eval.hpp"
#include "dtdml/pairs.hpp"
#include "dtdml/rdml.hpp"
#include "dtdml/synthetic.hpp"
#include "test_util.hpp"

using namespace dtdml;

namespace {

PairSet single_pair(const Eigen::VectorXd& delta, double sign) {
  PairSet pairs;
  pairs.deltas = delta;
  pairs.signs = Eigen::VectorXd::Constant(1, sign);
  pairs.data_radius = delta.norm();
  return pairs;
}

}  // namespace

TEST_CASE("rdml config validation names the offending field") {
  RdmlConfig config;
  config.eta = 0.0;
  CHECK_THROWS_WITH_AS(config.validate(), doctest::Contains("rdml.eta"), ConfigError);
  config = RdmlConfig{};
  config.step_size = -1.0;
  CHECK_THROWS_WITH_AS(config.validate(), doctest::Contains("rdml.step_size"),
                       ConfigError);
  config = RdmlConfig{};
  config.epochs = 0;
  CHECK_THROWS_WITH_AS(config.validate(), doctest::Contains("rdml.epochs"), ConfigError);
  config = RdmlConfig{};
  config.project_every = 0;
  CHECK_THROWS_WITH_AS(config.validate(), doctest::Contains("rdml.project_every"),
                       ConfigError);
}

TEST_CASE("rdml objective at the zero metric counts dissimilar pairs") {
  auto gen = testutil::rng(7);
  LabeledDataset data = testutil::random_dataset(6, 3, 3, gen);
  const PairSet pairs = generate_pairs(data, std::nullopt, 0);
  int dissimilar = 0;
  for (int k = 0; k < pairs.count(); ++k) {
    if (pairs.signs(k) < 0) ++dissimilar;
  }
  const Metric zero(Eigen::MatrixXd::Zero(3, 3));
  const double expected = static_cast<double>(dissimilar) / pairs.count();
  CHECK(rdml_objective(zero, pairs, 0.5) == doctest::Approx(expected));
}

TEST_CASE("rdml objective sits at zero loss on the unit margin") {
  Eigen::VectorXd delta(2);
  delta << 1.0, 0.0;
  const PairSet pairs = single_pair(delta, 1.0);
  const Metric identity(Eigen::MatrixXd::Identity(2, 2));
  // Similar pair at squared distance exactly 1: hinge term is zero.
  const double eta = 0.4;
  CHECK(rdml_objective(identity, pairs, eta) ==
        doctest::Approx(eta / 2.0 * identity.entries().squaredNorm()));
}

TEST_CASE("rdml objective matches a termwise reference") {
  auto gen = testutil::rng(17);
  const LabeledDataset data = testutil::random_dataset(7, 3, 2, gen);
  const PairSet pairs = generate_pairs(data, std::nullopt, 0);
  const Eigen::MatrixXd a = testutil::random_symmetric(3, gen);
  const Metric metric(a);
  const double eta = 0.123;

  double loss = 0.0;
  for (int k = 0; k < pairs.count(); ++k) {
    const double dist = testutil::quadratic_form_naive(a, pairs.deltas.col(k));
    loss += std::max(0.0, pairs.signs(k) * (dist - 1.0));
  }
  loss /= pairs.count();
  const double expected = loss + eta / 2.0 * a.squaredNorm();
  CHECK(rdml_objective(metric, pairs, eta) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("rdml subgradient direction for an active similar pair") {
  Eigen::VectorXd delta(2);
  delta << 1.0, 0.0;
  const PairSet pairs = single_pair(delta, 1.0);
  const double eta = 0.01;

  // At A = 2I the similar pair sits outside the margin (distance 2 > 1), so
  // the hinge pushes A_11 down: subgradient entry (0,0) is positive.
  const Metric wide(2.0 * Eigen::MatrixXd::Identity(2, 2));
  const Eigen::MatrixXd active = rdml_subgradient(wide, pairs, eta);
  CHECK(active(0, 0) == doctest::Approx(1.0 + eta * 2.0));
  CHECK(active(1, 1) == doctest::Approx(eta * 2.0));

  // Exactly on the kink the hinge contributes nothing.
  const Metric margin(Eigen::MatrixXd::Identity(2, 2));
  const Eigen::MatrixXd at_kink = rdml_subgradient(margin, pairs, eta);
  CHECK((at_kink - eta * margin.entries()).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("huge regularization shrinks the trained metric to nearly zero") {
  auto gen = testutil::rng(27);
  const LabeledDataset data = testutil::random_dataset(8, 3, 2, gen);
  const PairSet pairs = generate_pairs(data, std::nullopt, 0);
  RdmlConfig config;
  config.eta = 1e6;
  // The fixed 1/sqrt(t) decay needs a base step below ~1/eta once the
  // quadratic term is this stiff; the default step diverges by design.
  config.step_size = 1e-6;
  const Metric metric = train_rdml(pairs, config);
  CHECK(metric.entries().norm() <= 1e-3);
}

TEST_CASE("train_rdml rejects empty input and diverging steps") {
  PairSet empty;
  empty.deltas = Eigen::MatrixXd::Zero(3, 0);
  empty.signs = Eigen::VectorXd::Zero(0);
  CHECK_THROWS_AS((train_rdml(empty, RdmlConfig{})), std::invalid_argument);

  auto gen = testutil::rng(37);
  const LabeledDataset data = testutil::random_dataset(8, 3, 2, gen);
  const PairSet pairs = generate_pairs(data, std::nullopt, 0);
  RdmlConfig config;
  config.step_size = 1e200;
  config.epochs = 50;
  CHECK_THROWS_AS((train_rdml(pairs, config)), DivergenceError);
}

TEST_CASE("train_rdml never scores worse than the zero metric and stays PSD") {
  auto gen = testutil::rng(47);
  for (int trial = 0; trial < 5; ++trial) {
    const LabeledDataset data = testutil::random_dataset(10, 4, 2, gen);
    const PairSet pairs = generate_pairs(data, std::nullopt, 0);
    RdmlConfig config;
    const Metric metric = train_rdml(pairs, config);

    const Metric zero(Eigen::MatrixXd::Zero(4, 4));
    CHECK(rdml_objective(metric, pairs, config.eta) <=
          rdml_objective(zero, pairs, config.eta) + 1e-9);

    const Eigen::VectorXd eigenvalues =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(metric.entries()).eigenvalues();
    const double top = std::max(eigenvalues.cwiseAbs().maxCoeff(), 1e-300);
    CHECK(eigenvalues.minCoeff() >= -1e-10 * top);
  }
}

TEST_CASE("doubling the regularizer never grows the solution norm") {
  auto gen = testutil::rng(57);
  const LabeledDataset data = testutil::random_dataset(12, 3, 2, gen);
  const PairSet pairs = generate_pairs(data, std::nullopt, 0);
  double previous = std::numeric_limits<double>::infinity();
  for (double eta : {0.01, 0.02, 0.04, 0.08, 0.16, 0.32}) {
    RdmlConfig config;
    config.eta = eta;
    const double norm = train_rdml(pairs, config).entries().norm();
    CHECK(norm <= previous + 1e-6);
    previous = norm;
  }
}

TEST_CASE("learned metric at least matches Euclidean 1-NN on gaussian tasks") {
  double learned_total = 0.0;
  double euclidean_total = 0.0;
  for (int seed = 0; seed < 10; ++seed) {
    SyntheticConfig config;
    config.dim = 2;
    config.samples_per_class = 20;
    const LabeledDataset data = make_synthetic_task(config, seed, 0);
    const auto [train_idx, test_idx] = split_half(data.size(), seed);
    const LabeledDataset train = select_rows(data, train_idx);
    const LabeledDataset test = select_rows(data, test_idx);

    const PairSet pairs = generate_pairs(train, 200, seed);
    const Metric learned = train_rdml(pairs, RdmlConfig{});
    learned_total += knn_classify(learned, train, test, 1);
    euclidean_total += testutil::euclidean_1nn_accuracy(train, test);
  }
  CHECK(learned_total / 10.0 >= euclidean_total / 10.0 - 0.02);
}
