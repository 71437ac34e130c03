#include "dtdml/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

#include "dtdml/errors.hpp"
#include "dtdml/log.hpp"
#include "dtdml/rng.hpp"

namespace dtdml {

Method method_from_name(const std::string& name) {
  if (name == "rdml") return Method::Rdml;
  if (name == "rdml_agg") return Method::RdmlAgg;
  if (name == "dtdml_se") return Method::DtdmlSe;
  if (name == "dtdml_rb") return Method::DtdmlRb;
  throw ConfigError("methods", "unknown method '" + name +
                                   "' (expected rdml, rdml_agg, dtdml_se or dtdml_rb)");
}

std::string method_name(Method method) {
  switch (method) {
    case Method::Rdml: return "rdml";
    case Method::RdmlAgg: return "rdml_agg";
    case Method::DtdmlSe: return "dtdml_se";
    case Method::DtdmlRb: return "dtdml_rb";
  }
  return "unknown";
}

void ExperimentConfig::validate() const {
  if (labeled_counts.empty()) {
    throw ConfigError("labeled_counts", "must list at least one count");
  }
  for (int count : labeled_counts) {
    if (count < 2) {
      throw ConfigError("labeled_counts",
                        "counts must be >= 2 (got " + std::to_string(count) + ")");
    }
  }
  if (repeats < 1) throw ConfigError("repeats", "must be >= 1");
  if (knn_k < 1) throw ConfigError("knn.k", "must be >= 1");
  if (n_random_bases < 1) throw ConfigError("n_random_bases", "must be >= 1");
  if (max_source_pairs < 1) throw ConfigError("max_pairs.source", "must be >= 1");
}

double knn_classify(const Metric& metric, const LabeledDataset& train,
                    const LabeledDataset& test, int k) {
  if (train.size() == 0 || test.size() == 0) {
    throw std::invalid_argument("knn_classify: empty train or test set");
  }
  if (train.dim() != metric.dim() || test.dim() != metric.dim()) {
    throw std::invalid_argument("knn_classify: dimension mismatch with metric");
  }
  if (k < 1) throw std::invalid_argument("knn_classify: k must be >= 1");
  const int effective_k = std::min(k, train.size());

  int correct = 0;
  std::vector<std::pair<double, int>> order(train.size());
  for (int t = 0; t < test.size(); ++t) {
    const Eigen::VectorXd x = test.features.row(t).transpose();
    for (int i = 0; i < train.size(); ++i) {
      order[i] = {mahalanobis_sq(metric, x, train.features.row(i).transpose()), i};
    }
    // Lexicographic comparison gives the lower-index rule on distance ties.
    std::sort(order.begin(), order.end());

    std::map<std::string, int> votes;
    for (int i = 0; i < effective_k; ++i) {
      ++votes[train.labels[order[i].second]];
    }
    int top = 0;
    for (const auto& [label, count] : votes) top = std::max(top, count);
    // Vote tie: the nearest neighbor whose class is among the tied ones wins.
    std::string chosen;
    for (int i = 0; i < effective_k; ++i) {
      const std::string& label = train.labels[order[i].second];
      if (votes[label] == top) {
        chosen = label;
        break;
      }
    }
    if (chosen == test.labels[t]) ++correct;
  }
  return static_cast<double>(correct) / test.size();
}

std::pair<std::vector<int>, std::vector<int>> split_half(int n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("split_half: need at least two samples");
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng = make_rng(seed);
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(perm[i], perm[pick(rng)]);
  }
  const int train_size = (n + 1) / 2;
  std::vector<int> train(perm.begin(), perm.begin() + train_size);
  std::vector<int> test(perm.begin() + train_size, perm.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

std::vector<int> labeled_subset(const LabeledDataset& data,
                                const std::vector<int>& pool, int count,
                                std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("labeled_subset: count must be >= 1");
  if (count > static_cast<int>(pool.size())) {
    throw std::invalid_argument("labeled_subset: requested " + std::to_string(count) +
                                " samples from a pool of " +
                                std::to_string(pool.size()));
  }
  // Group the pool by label, labels in sorted order for determinism.
  std::map<std::string, std::vector<int>> by_class;
  for (int idx : pool) by_class[data.labels[idx]].push_back(idx);

  const int n_classes = static_cast<int>(by_class.size());
  std::vector<std::string> classes;
  for (const auto& [label, members] : by_class) classes.push_back(label);

  std::mt19937_64 rng = make_rng(seed);
  std::vector<int> quota(n_classes, count / n_classes);
  int remainder = count % n_classes;
  // Remainder classes drawn without replacement.
  std::vector<int> class_order(n_classes);
  std::iota(class_order.begin(), class_order.end(), 0);
  for (int i = n_classes - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(class_order[i], class_order[pick(rng)]);
  }
  for (int i = 0; i < remainder; ++i) ++quota[class_order[i]];

  // Spill quota a class cannot fill over to the others, in label order.
  for (int c = 0; c < n_classes; ++c) {
    const int capacity = static_cast<int>(by_class[classes[c]].size());
    if (quota[c] > capacity) {
      int spill = quota[c] - capacity;
      quota[c] = capacity;
      for (int other = 0; other < n_classes && spill > 0; ++other) {
        if (other == c) continue;
        const int spare =
            static_cast<int>(by_class[classes[other]].size()) - quota[other];
        const int take = std::min(spare, spill);
        if (take > 0) {
          quota[other] += take;
          spill -= take;
        }
      }
    }
  }

  std::vector<int> chosen;
  chosen.reserve(count);
  for (int c = 0; c < n_classes; ++c) {
    std::vector<int>& members = by_class[classes[c]];
    for (int i = 0; i < quota[c]; ++i) {
      std::uniform_int_distribution<int> pick(i, static_cast<int>(members.size()) - 1);
      std::swap(members[i], members[pick(rng)]);
      chosen.push_back(members[i]);
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

LabeledDataset select_rows(const LabeledDataset& data, const std::vector<int>& indices) {
  LabeledDataset out;
  out.features.resize(static_cast<int>(indices.size()), data.dim());
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.features.row(static_cast<int>(i)) = data.features.row(indices[i]);
    out.labels.push_back(data.labels[indices[i]]);
  }
  return out;
}

namespace {

struct Stats {
  double mean = 0.0;
  double std_dev = 0.0;
};

Stats population_stats(const std::vector<double>& values) {
  Stats s;
  for (double v : values) s.mean += v;
  s.mean /= values.size();
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.std_dev = std::sqrt(var / values.size());
  return s;
}

}  // namespace

std::vector<TrialResult> run_experiment(const LabeledDataset& target,
                                        const std::vector<LabeledDataset>& sources,
                                        const ExperimentConfig& config,
                                        const SolverBundle& solvers) {
  config.validate();
  const bool needs_sources = config.method != Method::Rdml;
  if (needs_sources && sources.empty()) {
    throw ConfigError("sources", "method " + method_name(config.method) +
                                     " needs at least one source dataset");
  }
  for (const LabeledDataset& s : sources) {
    if (s.dim() != target.dim()) {
      throw ConfigError("sources", "source dimension " + std::to_string(s.dim()) +
                                       " does not match target dimension " +
                                       std::to_string(target.dim()));
    }
  }

  // Source metrics (and their training pairs, for the pooled baseline) are
  // produced once and shared by every count and repeat.
  std::vector<PairSet> source_pairs;
  std::vector<Metric> source_metrics;
  if (!sources.empty() && config.method != Method::Rdml) {
    for (std::size_t p = 0; p < sources.size(); ++p) {
      source_pairs.push_back(generate_pairs(sources[p], config.max_source_pairs,
                                            mix_seed(config.seed, 1000 + p)));
    }
    if (config.method != Method::RdmlAgg) {
      for (std::size_t p = 0; p < sources.size(); ++p) {
        source_metrics.push_back(train_rdml(source_pairs[p], solvers.rdml));
      }
    }
  }

  BasisSet bases;
  if (config.method == Method::DtdmlSe) {
    bases = source_eigenbases(source_metrics);
  } else if (config.method == Method::DtdmlRb) {
    bases = random_bases(target.dim(), config.n_random_bases, mix_seed(config.seed, 2));
  }

  std::vector<TrialResult> results;
  for (int count : config.labeled_counts) {
    const auto [train_pool, test_idx] =
        split_half(target.size(), mix_seed(config.seed, 3000 + count));
    if (count > static_cast<int>(train_pool.size())) {
      throw ConfigError("labeled_counts",
                        "count " + std::to_string(count) +
                            " exceeds the training half (" +
                            std::to_string(train_pool.size()) + " samples)");
    }
    const LabeledDataset test_set = select_rows(target, test_idx);

    TrialResult trial;
    trial.labeled_count = count;
    for (int r = 0; r < config.repeats; ++r) {
      const std::uint64_t repeat_seed =
          mix_seed(mix_seed(config.seed, 4000 + count), r);
      const std::vector<int> subset_idx =
          labeled_subset(target, train_pool, count, repeat_seed);
      const LabeledDataset subset = select_rows(target, subset_idx);
      const PairSet pairs =
          generate_pairs(subset, std::nullopt, mix_seed(repeat_seed, 1));

      Metric metric = Metric(Eigen::MatrixXd::Identity(target.dim(), target.dim()));
      switch (config.method) {
        case Method::Rdml:
          metric = train_rdml(pairs, solvers.rdml);
          break;
        case Method::RdmlAgg: {
          std::vector<PairSet> all = source_pairs;
          all.push_back(pairs);
          metric = train_rdml(merge_pair_sets(all), solvers.rdml);
          break;
        }
        case Method::DtdmlSe:
        case Method::DtdmlRb:
          metric = fit(pairs, source_metrics, bases, solvers.dtdml).metric;
          break;
      }
      trial.accuracies.push_back(knn_classify(metric, subset, test_set, config.knn_k));
    }
    const Stats stats = population_stats(trial.accuracies);
    trial.mean = stats.mean;
    trial.std_dev = stats.std_dev;
    results.push_back(std::move(trial));
    log_info("method " + method_name(config.method) + ", " + std::to_string(count) +
             " labeled: mean accuracy " + std::to_string(results.back().mean));
  }
  return results;
}

namespace {

std::string format_fixed(double value, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, value);
  return buf;
}

std::vector<int> common_counts(
    const std::map<std::string, std::vector<TrialResult>>& results) {
  if (results.empty()) {
    throw std::invalid_argument("comparison rendering: no results given");
  }
  std::vector<int> counts;
  for (const TrialResult& t : results.begin()->second) counts.push_back(t.labeled_count);
  for (const auto& [name, trials] : results) {
    std::vector<int> other;
    for (const TrialResult& t : trials) other.push_back(t.labeled_count);
    if (other != counts) {
      throw std::invalid_argument("comparison rendering: methods disagree on labeled counts");
    }
  }
  return counts;
}

const TrialResult& trial_at(const std::vector<TrialResult>& trials, int count) {
  for (const TrialResult& t : trials) {
    if (t.labeled_count == count) return t;
  }
  throw std::invalid_argument("comparison rendering: missing labeled count");
}

}  // namespace

std::string render_comparison_text(
    const std::map<std::string, std::vector<TrialResult>>& results) {
  const std::vector<int> counts = common_counts(results);
  std::string out = "1-NN accuracy, mean +- std (population) over repeats\n\n";

  std::size_t width = 7;
  for (const auto& [name, trials] : results) width = std::max(width, name.size());

  out += "labeled";
  for (const auto& [name, trials] : results) {
    out += "  " + std::string(width + 10 - name.size(), ' ') + name;
  }
  out += "\n";
  for (int count : counts) {
    char head[16];
    std::snprintf(head, sizeof(head), "%7d", count);
    out += head;
    for (const auto& [name, trials] : results) {
      const TrialResult& t = trial_at(trials, count);
      out += "  " + format_fixed(t.mean, 4) + " +- " + format_fixed(t.std_dev, 4);
    }
    out += "\n";
  }

  if (results.size() > 1) {
    out += "\npairwise mean differences (row minus column)\n";
    for (auto it = results.begin(); it != results.end(); ++it) {
      auto jt = it;
      for (++jt; jt != results.end(); ++jt) {
        out += "\n" + it->first + " - " + jt->first + ":";
        for (int count : counts) {
          const double diff =
              trial_at(it->second, count).mean - trial_at(jt->second, count).mean;
          out += " " + std::to_string(count) + ":" +
                 (diff >= 0 ? "+" : "") + format_fixed(diff, 4);
        }
      }
    }
    out += "\n";
  }
  return out;
}

std::string render_comparison_csv(
    const std::map<std::string, std::vector<TrialResult>>& results) {
  const std::vector<int> counts = common_counts(results);
  std::string out =
      "# std is population (variance divided by the repeat count)\n"
      "method,labeled_count,mean,std,repeats\n";
  for (const auto& [name, trials] : results) {
    for (int count : counts) {
      const TrialResult& t = trial_at(trials, count);
      out += name + "," + std::to_string(count) + "," + format_fixed(t.mean, 6) +
             "," + format_fixed(t.std_dev, 6) + "," +
             std::to_string(t.accuracies.size()) + "\n";
    }
  }
  return out;
}

std::string render_accuracy_svg(
    const std::map<std::string, std::vector<TrialResult>>& results) {
  const std::vector<int> counts = common_counts(results);
  const double width = 640, height = 400;
  const double left = 60, right = 600, top = 30, bottom = 360;
  const int min_count = counts.front();
  const int max_count = counts.back();

  auto x_of = [&](double count) {
    if (max_count == min_count) return (left + right) / 2;
    return left + (right - left) * (count - min_count) / (max_count - min_count);
  };
  auto y_of = [&](double accuracy) {
    return bottom - (bottom - top) * std::clamp(accuracy, 0.0, 1.0);
  };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b"};

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    format_fixed(width, 0) + "\" height=\"" + format_fixed(height, 0) +
                    "\" viewBox=\"0 0 640 400\">\n";
  svg += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  // Axes and gridlines at every 0.2 accuracy step.
  for (int i = 0; i <= 5; ++i) {
    const double acc = i / 5.0;
    const double y = y_of(acc);
    svg += "<line x1=\"" + format_fixed(left, 1) + "\" y1=\"" + format_fixed(y, 1) +
           "\" x2=\"" + format_fixed(right, 1) + "\" y2=\"" + format_fixed(y, 1) +
           "\" stroke=\"#dddddd\"/>\n";
    svg += "<text x=\"" + format_fixed(left - 8, 1) + "\" y=\"" +
           format_fixed(y + 4, 1) +
           "\" text-anchor=\"end\" font-size=\"12\" fill=\"#333333\">" +
           format_fixed(acc, 1) + "</text>\n";
  }
  for (int count : counts) {
    const double x = x_of(count);
    svg += "<text x=\"" + format_fixed(x, 1) + "\" y=\"" + format_fixed(bottom + 18, 1) +
           "\" text-anchor=\"middle\" font-size=\"12\" fill=\"#333333\">" +
           std::to_string(count) + "</text>\n";
  }
  svg += "<text x=\"330\" y=\"392\" text-anchor=\"middle\" font-size=\"12\" "
         "fill=\"#333333\">labeled samples</text>\n";

  int color = 0;
  double legend_y = top + 8;
  for (const auto& [name, trials] : results) {
    const char* stroke = palette[color % 6];
    ++color;
    // std band first so lines stay visible on top of it.
    std::string band = "<polygon fill=\"" + std::string(stroke) +
                       "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
    for (int count : counts) {
      const TrialResult& t = trial_at(trials, count);
      band += format_fixed(x_of(count), 1) + "," +
              format_fixed(y_of(t.mean + t.std_dev), 1) + " ";
    }
    for (auto it = counts.rbegin(); it != counts.rend(); ++it) {
      const TrialResult& t = trial_at(trials, *it);
      band += format_fixed(x_of(*it), 1) + "," +
              format_fixed(y_of(t.mean - t.std_dev), 1) + " ";
    }
    band += "\"/>\n";
    svg += band;

    std::string line = "<polyline fill=\"none\" stroke=\"" + std::string(stroke) +
                       "\" stroke-width=\"2\" points=\"";
    for (int count : counts) {
      const TrialResult& t = trial_at(trials, count);
      line += format_fixed(x_of(count), 1) + "," + format_fixed(y_of(t.mean), 1) + " ";
    }
    line += "\"/>\n";
    svg += line;

    svg += "<rect x=\"" + format_fixed(left + 10, 1) + "\" y=\"" +
           format_fixed(legend_y - 9, 1) + "\" width=\"12\" height=\"12\" fill=\"" +
           stroke + "\"/>\n";
    svg += "<text x=\"" + format_fixed(left + 28, 1) + "\" y=\"" +
           format_fixed(legend_y + 2, 1) + "\" font-size=\"12\" fill=\"#333333\">" +
           name + "</text>\n";
    legend_y += 18;
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace dtdml
