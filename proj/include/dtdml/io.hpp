#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dtdml/dtdml.hpp"
#include "dtdml/eval.hpp"
#include "dtdml/metric.hpp"
#include "dtdml/pairs.hpp"
#include "dtdml/rdml.hpp"

namespace dtdml {

/**
 * Dataset files are comma-separated, one sample per line: the class label
 * first, then the feature values. A single leading line starting with '#'
 * is skipped. Malformed rows, inconsistent column counts and non-finite
 * values are rejected with the offending line number.
 */
LabeledDataset load_dataset(const std::string& path);

void save_dataset(const std::string& path, const LabeledDataset& data);

// Metric files: a "dim=<d>" header line followed by d comma-separated rows.
// Entries are written with enough digits to round-trip exactly.
void save_metric(const std::string& path, const Metric& metric);
Metric load_metric(const std::string& path);

// One "key = value" assignment per line, '#' comments, blank lines ignored.
// Insertion order is preserved so written files are deterministic.
class KeyValueFile {
 public:
  static KeyValueFile parse_file(const std::string& path);
  static KeyValueFile parse_text(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;  // throws ConfigError
  std::string get_or(const std::string& key, const std::string& fallback) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

  std::string render() const;
  void write_file(const std::string& path) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, std::size_t> index_;
};

/**
 * Fully resolved benchmark run: datasets, method list, protocol settings and
 * solver parameters. Parsing rejects unknown keys, missing required keys
 * (target, sources, seed) and dataset paths that do not exist, always naming
 * the key. `manifest` renders the resolved configuration, defaults included,
 * as a parseable key-value file; a run is reproducible from its manifest
 * alone.
 */
struct RunConfig {
  std::string target_path;
  std::vector<std::string> source_paths;
  std::vector<std::string> methods;  // subset of rdml, rdml_agg, dtdml_se, dtdml_rb
  std::vector<int> labeled_counts;
  int repeats = 10;
  int knn_k = 1;
  std::uint64_t seed = 0;
  int n_random_bases = 100;
  int max_source_pairs = 2000;
  std::string output_dir = "out";
  bool emit_plot = false;
  RdmlConfig rdml;
  DtdmlConfig dtdml;

  static RunConfig from_file(const std::string& path);
  static RunConfig from_key_values(const KeyValueFile& kv);
  KeyValueFile manifest() const;

  ExperimentConfig experiment_for(Method method) const;
  SolverBundle solver_bundle() const;
};

}  // namespace dtdml
