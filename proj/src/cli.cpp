#include "dtdml/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dtdml/dtdml.hpp"
#include "dtdml/errors.hpp"
#include "dtdml/eval.hpp"
#include "dtdml/io.hpp"
#include "dtdml/log.hpp"
#include "dtdml/metric.hpp"
#include "dtdml/pairs.hpp"
#include "dtdml/rdml.hpp"
#include "dtdml/rng.hpp"
#include "dtdml/synthetic.hpp"

namespace dtdml {

namespace {

void require_file(const std::string& key, const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError(key, "file does not exist: " + path);
  }
}

std::optional<double> parse_gamma_flag(const std::string& key,
                                       const std::string& text) {
  if (text == "auto") return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(key, "expected a number or 'auto', got '" + text + "'");
  }
  return value;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  for (const char c : text) {
    if (c == ',') {
      if (!current.empty()) out.push_back(current);
      current.clear();
    } else if (c != ' ') {
      current += c;
    }
  }
  if (!current.empty()) out.push_back(current);
  return out;
}

struct TrainSourceArgs {
  std::string data_path;
  std::string out_path;
  int max_pairs = 0;  // 0 = keep all pairs
  std::uint64_t seed = 0;
  RdmlConfig rdml;
};

int run_train_source(const TrainSourceArgs& args) {
  require_file("data", args.data_path);
  RdmlConfig config = args.rdml;
  config.seed = args.seed;
  config.validate();
  const LabeledDataset data = load_dataset(args.data_path);
  log_info("loaded " + args.data_path + ": " + std::to_string(data.size()) +
           " samples, dim " + std::to_string(data.dim()));
  const std::optional<int> cap =
      args.max_pairs > 0 ? std::optional<int>(args.max_pairs) : std::nullopt;
  const PairSet pairs = generate_pairs(data, cap, args.seed);
  const Metric metric = train_rdml(pairs, config);
  save_metric(args.out_path, metric);
  std::cout << "wrote " << args.out_path << " (" << pairs.count() << " pairs)\n";
  return 0;
}

struct FitArgs {
  std::string target_path;
  std::string sources_csv;
  std::string out_path;
  std::string trace_path;
  std::string basis_kind = "se";
  int n_bases = 100;
  int max_pairs = 0;
  std::uint64_t seed = 0;
  std::string gamma_b_text = "auto";
  std::string gamma_c_text = "auto";
  DtdmlConfig dtdml;
};

int run_fit(const FitArgs& args) {
  const std::vector<std::string> source_paths = split_list(args.sources_csv);
  if (source_paths.empty()) {
    throw ConfigError("sources", "at least one source metric file is required");
  }
  require_file("target", args.target_path);
  for (const std::string& path : source_paths) require_file("sources", path);
  if (args.basis_kind != "se" && args.basis_kind != "rb") {
    throw ConfigError("bases", "expected se or rb, got '" + args.basis_kind + "'");
  }

  DtdmlConfig config = args.dtdml;
  config.gamma_b = parse_gamma_flag("gamma_b", args.gamma_b_text);
  config.gamma_c = parse_gamma_flag("gamma_c", args.gamma_c_text);
  config.validate();

  const LabeledDataset target = load_dataset(args.target_path);
  std::vector<Metric> sources;
  sources.reserve(source_paths.size());
  for (const std::string& path : source_paths) sources.push_back(load_metric(path));
  for (const Metric& metric : sources) {
    if (metric.dim() != target.dim()) {
      throw ConfigError("sources", "metric dimension " + std::to_string(metric.dim()) +
                                       " does not match dataset dimension " +
                                       std::to_string(target.dim()));
    }
  }

  BasisSet bases;
  if (args.basis_kind == "se") {
    bases = source_eigenbases(sources);
  } else {
    if (args.n_bases < 1) throw ConfigError("n_bases", "must be >= 1");
    bases = random_bases(target.dim(), args.n_bases, mix_seed(args.seed, 2));
  }

  const std::optional<int> cap =
      args.max_pairs > 0 ? std::optional<int>(args.max_pairs) : std::nullopt;
  const PairSet pairs = generate_pairs(target, cap, mix_seed(args.seed, 1));
  const FitResult result = fit(pairs, sources, bases, config);
  save_metric(args.out_path, result.metric);
  if (!args.trace_path.empty()) write_solver_trace(args.trace_path, result.state);

  char summary[128];
  std::snprintf(summary, sizeof(summary), " (iterations=%d, converged=%s)",
                result.state.iterations, result.state.converged ? "yes" : "no");
  std::cout << "wrote " << args.out_path << summary << '\n';
  return 0;
}

struct EvaluateArgs {
  std::string metric_path;
  std::string train_path;
  std::string test_path;
  std::string out_path;
  int k = 1;
};

int run_evaluate(const EvaluateArgs& args) {
  require_file("metric", args.metric_path);
  require_file("train", args.train_path);
  require_file("test", args.test_path);
  if (args.k < 1) throw ConfigError("k", "must be >= 1");
  const Metric metric = load_metric(args.metric_path);
  const LabeledDataset train = load_dataset(args.train_path);
  const LabeledDataset test = load_dataset(args.test_path);
  const double accuracy = knn_classify(metric, train, test, args.k);
  char line[64];
  std::snprintf(line, sizeof(line), "%.6f\n", accuracy);
  std::cout << line;
  if (!args.out_path.empty()) {
    std::ofstream out(args.out_path);
    if (!out) throw std::runtime_error("evaluate: cannot open " + args.out_path);
    out << line;
  }
  return 0;
}

int run_benchmark(const std::string& config_path, const std::string& sweep_csv) {
  require_file("config", config_path);
  const RunConfig run = RunConfig::from_file(config_path);
  std::filesystem::create_directories(run.output_dir);
  run.manifest().write_file(run.output_dir + "/manifest.cfg");

  const LabeledDataset target = load_dataset(run.target_path);
  std::vector<LabeledDataset> sources;
  sources.reserve(run.source_paths.size());
  for (const std::string& path : run.source_paths) sources.push_back(load_dataset(path));

  std::map<std::string, std::vector<TrialResult>> results;
  for (const std::string& name : run.methods) {
    const Method method = method_from_name(name);
    log_info("running method " + name);
    results[name] =
        run_experiment(target, sources, run.experiment_for(method), run.solver_bundle());
  }

  const std::string text = render_comparison_text(results);
  {
    std::ofstream out(run.output_dir + "/report.txt");
    if (!out) throw std::runtime_error("benchmark: cannot write report.txt");
    out << text;
  }
  {
    std::ofstream out(run.output_dir + "/report.csv");
    if (!out) throw std::runtime_error("benchmark: cannot write report.csv");
    out << render_comparison_csv(results);
  }
  if (run.emit_plot) {
    std::ofstream out(run.output_dir + "/plot.svg");
    if (!out) throw std::runtime_error("benchmark: cannot write plot.svg");
    out << render_accuracy_svg(results);
  }

  // Optional logarithmic sweep over the source pull weight; only the
  // transfer methods depend on it, so baselines are left out.
  if (!sweep_csv.empty()) {
    std::string rows =
        "# std is population (variance divided by the repeat count)\n"
        "gamma_a,method,labeled_count,mean,std,repeats\n";
    for (const std::string& item : split_list(sweep_csv)) {
      double value = 0.0;
      const auto [ptr, ec] =
          std::from_chars(item.data(), item.data() + item.size(), value);
      if (ec != std::errc() || ptr != item.data() + item.size() || value <= 0.0) {
        throw ConfigError("sweep-gamma-a", "expected positive numbers, got '" + item + "'");
      }
      RunConfig variant = run;
      variant.dtdml.gamma_a = value;
      for (const std::string& name : run.methods) {
        const Method method = method_from_name(name);
        if (method != Method::DtdmlSe && method != Method::DtdmlRb) continue;
        log_info("sweep gamma_a=" + item + ", method " + name);
        const std::vector<TrialResult> trials = run_experiment(
            target, sources, variant.experiment_for(method), variant.solver_bundle());
        for (const TrialResult& t : trials) {
          char line[128];
          std::snprintf(line, sizeof(line), "%s,%s,%d,%.6f,%.6f,%d\n", item.c_str(),
                        name.c_str(), t.labeled_count, t.mean, t.std_dev,
                        static_cast<int>(t.accuracies.size()));
          rows += line;
        }
      }
    }
    std::ofstream out(run.output_dir + "/sweep.csv");
    if (!out) throw std::runtime_error("benchmark: cannot write sweep.csv");
    out << rows;
  }
  std::cout << text;
  return 0;
}

struct SyntheticArgs {
  std::string out_dir;
  int n_sources = 3;
  std::uint64_t seed = 0;
  std::string counts_csv = "2,4,6";
  int repeats = 10;
  // The suite targets tiny labeled budgets, where a strong pull toward the
  // integrated source metric is what carries the transfer.
  double gamma_a = 10.0;
  SyntheticConfig config;
};

int run_synthetic(const SyntheticArgs& args) {
  if (args.n_sources < 1) throw ConfigError("sources", "must be >= 1");
  std::filesystem::create_directories(args.out_dir);
  const TransferSuite suite = make_transfer_suite(args.config, args.n_sources, args.seed);

  const std::string target_path = args.out_dir + "/target.csv";
  save_dataset(target_path, suite.target);
  std::vector<std::string> source_paths;
  for (std::size_t p = 0; p < suite.sources.size(); ++p) {
    const std::string path = args.out_dir + "/source" + std::to_string(p + 1) + ".csv";
    save_dataset(path, suite.sources[p]);
    source_paths.push_back(path);
  }

  RunConfig run;
  run.target_path = target_path;
  run.source_paths = source_paths;
  run.methods = {"rdml", "rdml_agg", "dtdml_se", "dtdml_rb"};
  run.labeled_counts.clear();
  for (const std::string& item : split_list(args.counts_csv)) {
    int value = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (ec != std::errc() || ptr != item.data() + item.size()) {
      throw ConfigError("counts", "cannot parse count '" + item + "'");
    }
    run.labeled_counts.push_back(value);
  }
  run.repeats = args.repeats;
  run.seed = args.seed;
  run.output_dir = args.out_dir + "/report";
  run.emit_plot = true;
  run.dtdml.gamma_a = args.gamma_a;
  run.manifest().write_file(args.out_dir + "/benchmark.cfg");

  std::cout << "wrote " << args.out_dir << " (" << args.n_sources
            << " sources, benchmark.cfg ready)\n";
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"decomposition-based transfer metric learning"};
  app.require_subcommand(1);

  TrainSourceArgs train_args;
  CLI::App* train = app.add_subcommand(
      "train-source", "train a source metric from a labeled dataset");
  train->add_option("--data", train_args.data_path, "labeled dataset (csv)")->required();
  train->add_option("--out", train_args.out_path, "output metric file")->required();
  train->add_option("--max-pairs", train_args.max_pairs,
                    "cap on generated pairs (0 keeps all)");
  train->add_option("--seed", train_args.seed, "pair subsampling seed");
  train->add_option("--eta", train_args.rdml.eta, "Frobenius regularization weight");
  train->add_option("--step-size", train_args.rdml.step_size, "base step size");
  train->add_option("--epochs", train_args.rdml.epochs, "subgradient epochs");
  train->add_option("--project-every", train_args.rdml.project_every,
                    "PSD projection cadence");

  FitArgs fit_args;
  CLI::App* fit_cmd = app.add_subcommand(
      "fit", "fit a target metric from a dataset and source metrics");
  fit_cmd->add_option("--target", fit_args.target_path, "target dataset (csv)")
      ->required();
  fit_cmd->add_option("--sources", fit_args.sources_csv,
                      "comma-separated source metric files");
  fit_cmd->add_option("--out", fit_args.out_path, "output metric file")->required();
  fit_cmd->add_option("--trace", fit_args.trace_path, "optional solver trace csv");
  fit_cmd->add_option("--bases", fit_args.basis_kind,
                      "basis construction: se (source eigenvectors) or rb (random)");
  fit_cmd->add_option("--n-bases", fit_args.n_bases, "random basis count (rb only)");
  fit_cmd->add_option("--max-pairs", fit_args.max_pairs,
                      "cap on target pairs (0 keeps all)");
  fit_cmd->add_option("--seed", fit_args.seed, "seed for pair and basis draws");
  fit_cmd->add_option("--gamma-a", fit_args.dtdml.gamma_a, "source pull weight");
  fit_cmd->add_option("--gamma-b", fit_args.gamma_b_text, "alpha ridge weight or auto");
  fit_cmd->add_option("--gamma-c", fit_args.gamma_c_text, "theta L1 weight or auto");
  fit_cmd->add_option("--gamma-b-init", fit_args.dtdml.gamma_b_init,
                      "first-iteration value in auto mode");
  fit_cmd->add_option("--gamma-c-init", fit_args.dtdml.gamma_c_init,
                      "first-iteration value in auto mode");
  fit_cmd->add_option("--rho-b", fit_args.dtdml.rho_b, "auto gamma_b scale");
  fit_cmd->add_option("--rho-c", fit_args.dtdml.rho_c, "auto gamma_c scale");
  fit_cmd->add_option("--sigma", fit_args.dtdml.sigma, "hinge smoothing width");
  fit_cmd->add_option("--sigma-prime", fit_args.dtdml.sigma_prime,
                      "L1 smoothing width");
  fit_cmd->add_option("--inner-tol", fit_args.dtdml.inner_tol,
                      "theta solve stopping tolerance");
  fit_cmd->add_option("--inner-max-iters", fit_args.dtdml.inner_max_iters,
                      "theta solve iteration cap");
  fit_cmd->add_option("--outer-tol", fit_args.dtdml.outer_tol,
                      "outer loop stopping tolerance");
  fit_cmd->add_option("--outer-max-iters", fit_args.dtdml.outer_max_iters,
                      "outer loop iteration cap");

  EvaluateArgs eval_args;
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "nearest-neighbor accuracy of a metric on a train/test pair");
  evaluate->add_option("--metric", eval_args.metric_path, "metric file")->required();
  evaluate->add_option("--train", eval_args.train_path, "reference dataset (csv)")
      ->required();
  evaluate->add_option("--test", eval_args.test_path, "evaluation dataset (csv)")
      ->required();
  evaluate->add_option("--k", eval_args.k, "neighbor count");
  evaluate->add_option("--out", eval_args.out_path, "optional file for the accuracy");

  std::string benchmark_config;
  std::string benchmark_sweep;
  CLI::App* benchmark = app.add_subcommand(
      "benchmark", "run the full method comparison described by a config file");
  benchmark->add_option("--config", benchmark_config, "run configuration file")
      ->required();
  benchmark->add_option("--sweep-gamma-a", benchmark_sweep,
                        "comma-separated source pull weights to sweep into sweep.csv");

  SyntheticArgs synth_args;
  CLI::App* synthetic = app.add_subcommand(
      "synthetic", "generate a synthetic transfer suite plus a ready benchmark config");
  synthetic->add_option("--out-dir", synth_args.out_dir, "output directory")->required();
  synthetic->add_option("--sources", synth_args.n_sources, "number of source tasks");
  synthetic->add_option("--seed", synth_args.seed, "generator seed");
  synthetic->add_option("--counts", synth_args.counts_csv,
                        "labeled counts written into benchmark.cfg");
  synthetic->add_option("--repeats", synth_args.repeats,
                        "repeats written into benchmark.cfg");
  synthetic->add_option("--gamma-a", synth_args.gamma_a,
                        "source pull weight written into benchmark.cfg");
  synthetic->add_option("--dim", synth_args.config.dim, "feature dimension");
  synthetic->add_option("--samples-per-class", synth_args.config.samples_per_class,
                        "samples per class per task");
  synthetic->add_option("--separation", synth_args.config.separation,
                        "class mean separation");
  synthetic->add_option("--signal-sigma", synth_args.config.signal_sigma,
                        "spread along the signal axis");
  synthetic->add_option("--nuisance-sigma", synth_args.config.nuisance_sigma,
                        "spread of the nuisance axes");
  synthetic->add_option("--rotation", synth_args.config.rotation,
                        "source frame perturbation scale");
  synthetic->add_option("--mean-jitter", synth_args.config.mean_jitter,
                        "source mean offset scale");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(train)) return run_train_source(train_args);
    if (app.got_subcommand(fit_cmd)) return run_fit(fit_args);
    if (app.got_subcommand(evaluate)) return run_evaluate(eval_args);
    if (app.got_subcommand(benchmark)) {
      return run_benchmark(benchmark_config, benchmark_sweep);
    }
    if (app.got_subcommand(synthetic)) return run_synthetic(synth_args);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace dtdml
