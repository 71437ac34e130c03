#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dtdml/dtdml.hpp"
#include "dtdml/metric.hpp"
#include "dtdml/pairs.hpp"
#include "dtdml/rdml.hpp"

namespace dtdml {

enum class Method { Rdml, RdmlAgg, DtdmlSe, DtdmlRb };

Method method_from_name(const std::string& name);  // rdml, rdml_agg, ...
std::string method_name(Method method);

struct ExperimentConfig {
  Method method = Method::Rdml;
  std::vector<int> labeled_counts;
  int repeats = 10;
  int knn_k = 1;
  std::uint64_t seed = 0;
  int n_random_bases = 100;     // basis budget of the random-basis variant
  int max_source_pairs = 2000;  // per-source pair cap for training

  void validate() const;
};

// Solver settings shared by every trial of an experiment.
struct SolverBundle {
  RdmlConfig rdml;
  DtdmlConfig dtdml;
};

struct TrialResult {
  int labeled_count = 0;
  std::vector<double> accuracies;  // one entry per repeat
  double mean = 0.0;
  double std_dev = 0.0;  // population (divide by the repeat count)
};

/**
 * k-nearest-neighbor accuracy of `test` against the labeled reference set
 * `train` under the given metric. Distance ties prefer the lower train
 * index; vote ties resolve to the label of the nearest tied-class neighbor.
 */
double knn_classify(const Metric& metric, const LabeledDataset& train,
                    const LabeledDataset& test, int k);

// Deterministic 50/50 split: returns (train_indices, test_indices). The odd
// element of an odd-sized set goes to the training half.
std::pair<std::vector<int>, std::vector<int>> split_half(int n,
                                                         std::uint64_t seed);

// Class-balanced draw of `count` indices from `pool` (remainder classes by
// seeded draw, indices within a class by seeded sampling). Errors when the
// pool holds fewer than `count` samples.
std::vector<int> labeled_subset(const LabeledDataset& data,
                                const std::vector<int>& pool, int count,
                                std::uint64_t seed);

LabeledDataset select_rows(const LabeledDataset& data,
                           const std::vector<int>& indices);

/**
 * Runs one method through the full protocol: per labeled count a seeded
 * 50/50 target split, then per repeat a seeded labeled subset that trains
 * the metric and serves as the 1-NN reference for the test half. Splits and
 * subsets depend only on (seed, labeled_count, repeat), never on the
 * method, so methods sharing a seed see identical data. Source metrics are
 * trained once and reused across counts and repeats.
 */
std::vector<TrialResult> run_experiment(const LabeledDataset& target,
                                        const std::vector<LabeledDataset>& sources,
                                        const ExperimentConfig& config,
                                        const SolverBundle& solvers);

// Aligned per-count table of mean/std per method plus pairwise mean
// differences at each labeled count.
std::string render_comparison_text(
    const std::map<std::string, std::vector<TrialResult>>& results);

// CSV rendering: header method,labeled_count,mean,std,repeats after a
// comment line documenting the population-std convention.
std::string render_comparison_csv(
    const std::map<std::string, std::vector<TrialResult>>& results);

// Line chart of mean accuracy vs labeled count with a +-std band per method.
std::string render_accuracy_svg(
    const std::map<std::string, std::vector<TrialResult>>& results);

}  // namespace dtdml
