#include "dtdml/pairs.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "dtdml/rng.hpp"

namespace dtdml {

PairSet generate_pairs(const LabeledDataset& data, std::optional<int> max_pairs,
                       std::uint64_t seed) {
  const int n = data.size();
  if (n < 2) {
    throw std::invalid_argument("generate_pairs needs at least two samples, got " +
                                std::to_string(n));
  }
  if (static_cast<int>(data.labels.size()) != n) {
    throw std::invalid_argument("generate_pairs: label count does not match sample count");
  }
  if (max_pairs && *max_pairs < 1) {
    throw std::invalid_argument("generate_pairs: max_pairs must be >= 1");
  }

  const long total = static_cast<long>(n) * (n - 1) / 2;
  std::vector<long> selected;
  if (max_pairs && static_cast<long>(*max_pairs) < total) {
    // Partial Fisher-Yates over the flat pair index, then back to
    // lexicographic order so subsampling never reorders surviving pairs.
    std::vector<long> all(total);
    for (long i = 0; i < total; ++i) all[i] = i;
    std::mt19937_64 rng = make_rng(seed);
    const long want = *max_pairs;
    for (long i = 0; i < want; ++i) {
      std::uniform_int_distribution<long> pick(i, total - 1);
      std::swap(all[i], all[pick(rng)]);
    }
    selected.assign(all.begin(), all.begin() + want);
    std::sort(selected.begin(), selected.end());
  } else {
    selected.resize(total);
    for (long i = 0; i < total; ++i) selected[i] = i;
  }

  PairSet pairs;
  pairs.deltas.resize(data.dim(), static_cast<int>(selected.size()));
  pairs.signs.resize(static_cast<int>(selected.size()));
  long flat = 0;
  std::size_t cursor = 0;
  for (int i = 0; i < n - 1 && cursor < selected.size(); ++i) {
    for (int j = i + 1; j < n && cursor < selected.size(); ++j, ++flat) {
      if (selected[cursor] != flat) continue;
      pairs.deltas.col(static_cast<int>(cursor)) =
          data.features.row(i).transpose() - data.features.row(j).transpose();
      pairs.signs[static_cast<int>(cursor)] =
          data.labels[i] == data.labels[j] ? 1.0 : -1.0;
      ++cursor;
    }
  }
  pairs.data_radius = data.features.rowwise().norm().maxCoeff();
  return pairs;
}

PairFeatures compute_pair_features(const PairSet& pairs, const BasisSet& bases) {
  if (pairs.dim() != bases.dim) {
    throw std::invalid_argument("compute_pair_features: pair dimension " +
                                std::to_string(pairs.dim()) +
                                " does not match basis dimension " +
                                std::to_string(bases.dim));
  }
  PairFeatures features;
  features.matrix = (bases.columns.transpose() * pairs.deltas).array().square();
  if (pairs.count() > 0) {
    features.inf_norms = features.matrix.colwise().maxCoeff();
  } else {
    features.inf_norms.resize(0);
  }
  return features;
}

PairSet merge_pair_sets(const std::vector<PairSet>& sets) {
  if (sets.empty()) throw std::invalid_argument("merge_pair_sets: no pair sets given");
  const int d = sets.front().dim();
  int total = 0;
  for (const PairSet& s : sets) {
    if (s.dim() != d) {
      throw std::invalid_argument("merge_pair_sets: pair sets disagree on dimension");
    }
    total += s.count();
  }
  PairSet merged;
  merged.deltas.resize(d, total);
  merged.signs.resize(total);
  int next = 0;
  for (const PairSet& s : sets) {
    merged.deltas.middleCols(next, s.count()) = s.deltas;
    merged.signs.segment(next, s.count()) = s.signs;
    merged.data_radius = std::max(merged.data_radius, s.data_radius);
    next += s.count();
  }
  return merged;
}

}  // namespace dtdml
