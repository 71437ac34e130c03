#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dtdml/cli.hpp"
#include "dtdml/io.hpp"
#include "dtdml/metric.hpp"
#include "test_util.hpp"

using namespace dtdml;
namespace fs = std::filesystem;

namespace {

// Routes std::cout and std::cerr into buffers for the lifetime of one call.
struct Capture {
  std::stringstream out;
  std::stringstream err;
  std::streambuf* old_out;
  std::streambuf* old_err;
  Capture()
      : old_out(std::cout.rdbuf(out.rdbuf())),
        old_err(std::cerr.rdbuf(err.rdbuf())) {}
  ~Capture() {
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
  }
};

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("dtdml");
  for (const std::string& a : args) argv.push_back(a.c_str());
  Capture capture;
  CliResult result;
  result.code = cli_main(static_cast<int>(argv.size()), argv.data());
  result.out = capture.out.str();
  result.err = capture.err.str();
  return result;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("dtdml_cli_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& name) const { return (path / name).string(); }
  static int counter;
};

int TempDir::counter = 0;

std::string write_two_class_csv(const TempDir& dir, const std::string& name,
                                std::uint64_t seed) {
  auto gen = testutil::rng(seed);
  LabeledDataset data = testutil::random_dataset(12, 3, 2, gen);
  // Separate the classes so accuracies are not pure noise.
  for (int i = 0; i < data.size(); ++i) {
    if (data.labels[i] == "c0") data.features(i, 0) += 4.0;
  }
  const std::string path = dir.str(name);
  save_dataset(path, data);
  return path;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("help exits cleanly and bad invocations exit with config code") {
  CHECK(run_cli({"--help"}).code == 0);
  CHECK(run_cli({"fit", "--help"}).code == 0);
  CHECK(run_cli({}).code == 2);               // a subcommand is required
  CHECK(run_cli({"frobnicate"}).code == 2);   // unknown subcommand
  CHECK(run_cli({"fit"}).code == 2);          // missing required options
}

TEST_CASE("train-source writes a loadable metric") {
  TempDir dir;
  const std::string data = write_two_class_csv(dir, "source.csv", 1);
  const std::string out = dir.str("metric.txt");

  const CliResult result = run_cli({"train-source", "--data", data, "--out", out,
                                    "--max-pairs", "30", "--seed", "5",
                                    "--epochs", "50"});
  CHECK(result.code == 0);
  CHECK(result.out.find("wrote " + out) != std::string::npos);
  CHECK(result.out.find("(30 pairs)") != std::string::npos);
  const Metric metric = load_metric(out);
  CHECK(metric.dim() == 3);
}

TEST_CASE("train-source rejects missing files and bad settings") {
  TempDir dir;
  const CliResult missing = run_cli({"train-source", "--data",
                                     dir.str("absent.csv"), "--out",
                                     dir.str("m.txt")});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("does not exist") != std::string::npos);

  const std::string data = write_two_class_csv(dir, "source.csv", 2);
  const CliResult bad = run_cli({"train-source", "--data", data, "--out",
                                 dir.str("m.txt"), "--epochs", "0"});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("rdml.epochs") != std::string::npos);
}

TEST_CASE("fit without source metrics is a config error naming sources") {
  TempDir dir;
  const std::string target = write_two_class_csv(dir, "target.csv", 3);
  const CliResult result =
      run_cli({"fit", "--target", target, "--out", dir.str("fitted.txt")});
  CHECK(result.code == 2);
  CHECK(result.err.find("sources") != std::string::npos);
}

TEST_CASE("fit trains from saved source metrics and writes a trace") {
  TempDir dir;
  const std::string target = write_two_class_csv(dir, "target.csv", 4);
  auto gen = testutil::rng(40);
  save_metric(dir.str("s1.txt"), Metric(testutil::random_psd(3, gen)));
  save_metric(dir.str("s2.txt"), Metric(testutil::random_psd(3, gen)));
  const std::string out = dir.str("fitted.txt");
  const std::string trace = dir.str("trace.csv");

  const CliResult result = run_cli(
      {"fit", "--target", target, "--sources",
       dir.str("s1.txt") + "," + dir.str("s2.txt"), "--out", out, "--trace",
       trace, "--seed", "9", "--outer-max-iters", "5"});
  CHECK(result.code == 0);
  CHECK(result.out.find("iterations=") != std::string::npos);
  CHECK(result.out.find("converged=") != std::string::npos);

  const Metric fitted = load_metric(out);
  CHECK(fitted.dim() == 3);
  const std::string trace_text = read_file(trace);
  CHECK(trace_text.rfind("iter,O_k,gamma_B,gamma_C,nnz_theta,alpha_1,alpha_2",
                         0) == 0);

  // Random bases work through the same entry point.
  const CliResult rb = run_cli(
      {"fit", "--target", target, "--sources", dir.str("s1.txt"), "--out",
       dir.str("fitted_rb.txt"), "--bases", "rb", "--n-bases", "12", "--seed",
       "9", "--outer-max-iters", "5"});
  CHECK(rb.code == 0);
  CHECK(load_metric(dir.str("fitted_rb.txt")).dim() == 3);
}

TEST_CASE("fit validates bases, dimensions, and gamma flags") {
  TempDir dir;
  const std::string target = write_two_class_csv(dir, "target.csv", 5);
  auto gen = testutil::rng(50);
  save_metric(dir.str("s3.txt"), Metric(testutil::random_psd(3, gen)));
  save_metric(dir.str("s2d.txt"), Metric(testutil::random_psd(2, gen)));
  const std::vector<std::string> base_args = {"fit", "--target", target,
                                              "--out", dir.str("f.txt")};

  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> args = base_args;
    args.insert(args.end(), extra.begin(), extra.end());
    return run_cli(args);
  };

  CHECK(with({"--sources", dir.str("s3.txt"), "--bases", "xx"}).code == 2);
  CHECK(with({"--sources", dir.str("s3.txt"), "--bases", "rb", "--n-bases",
              "0"}).code == 2);
  const CliResult mismatch = with({"--sources", dir.str("s2d.txt")});
  CHECK(mismatch.code == 2);
  CHECK(mismatch.err.find("dimension") != std::string::npos);
  const CliResult bad_gamma =
      with({"--sources", dir.str("s3.txt"), "--gamma-b", "sometimes"});
  CHECK(bad_gamma.code == 2);
  CHECK(bad_gamma.err.find("gamma_b") != std::string::npos);
}

TEST_CASE("evaluate reports accuracy on stdout and into a file") {
  TempDir dir;
  const std::string data = write_two_class_csv(dir, "data.csv", 6);
  save_metric(dir.str("identity.txt"),
              Metric((Eigen::MatrixXd::Identity(3, 3))));
  const std::string out = dir.str("accuracy.txt");

  // Evaluating a set against itself: every point is its own neighbor.
  const CliResult result =
      run_cli({"evaluate", "--metric", dir.str("identity.txt"), "--train", data,
               "--test", data, "--out", out});
  CHECK(result.code == 0);
  CHECK(result.out == "1.000000\n");
  CHECK(read_file(out) == "1.000000\n");

  CHECK(run_cli({"evaluate", "--metric", dir.str("identity.txt"), "--train",
                 data, "--test", data, "--k", "0"}).code == 2);
}

TEST_CASE("synthetic emits datasets plus a ready-to-run benchmark config") {
  TempDir dir;
  const std::string suite_dir = dir.str("suite");
  const CliResult result = run_cli(
      {"synthetic", "--out-dir", suite_dir, "--sources", "2", "--seed", "11",
       "--counts", "2", "--repeats", "2", "--dim", "4", "--samples-per-class",
       "16"});
  CHECK(result.code == 0);
  CHECK(fs::exists(suite_dir + "/target.csv"));
  CHECK(fs::exists(suite_dir + "/source1.csv"));
  CHECK(fs::exists(suite_dir + "/source2.csv"));
  CHECK(!fs::exists(suite_dir + "/source3.csv"));
  REQUIRE(fs::exists(suite_dir + "/benchmark.cfg"));

  const RunConfig run = RunConfig::from_file(suite_dir + "/benchmark.cfg");
  CHECK(run.labeled_counts == std::vector<int>{2});
  CHECK(run.repeats == 2);
  CHECK(run.seed == 11);
  CHECK(run.source_paths.size() == 2);
  CHECK(load_dataset(run.target_path).dim() == 4);
}

TEST_CASE("benchmark writes reports that replay byte for byte") {
  TempDir dir;
  const std::string suite_dir = dir.str("suite");
  REQUIRE(run_cli({"synthetic", "--out-dir", suite_dir, "--sources", "2",
                   "--seed", "21", "--counts", "2", "--repeats", "2", "--dim",
                   "4", "--samples-per-class", "16"})
              .code == 0);

  const CliResult first =
      run_cli({"benchmark", "--config", suite_dir + "/benchmark.cfg"});
  CHECK(first.code == 0);
  const std::string report_dir = suite_dir + "/report";
  REQUIRE(fs::exists(report_dir + "/report.txt"));
  REQUIRE(fs::exists(report_dir + "/report.csv"));
  CHECK(fs::exists(report_dir + "/plot.svg"));
  REQUIRE(fs::exists(report_dir + "/manifest.cfg"));

  const std::string csv = read_file(report_dir + "/report.csv");
  CHECK(csv.find("method,labeled_count,mean,std,repeats") != std::string::npos);
  CHECK(csv.find("dtdml_se,2,") != std::string::npos);
  const std::string text = read_file(report_dir + "/report.txt");
  CHECK(first.out == text);

  // Replaying the manifest into a fresh directory reproduces the reports.
  KeyValueFile manifest = KeyValueFile::parse_file(report_dir + "/manifest.cfg");
  manifest.set("output.dir", dir.str("replay"));
  manifest.write_file(dir.str("replay.cfg"));
  const CliResult second = run_cli({"benchmark", "--config", dir.str("replay.cfg")});
  CHECK(second.code == 0);
  CHECK(read_file(dir.str("replay") + "/report.csv") == csv);
  CHECK(read_file(dir.str("replay") + "/report.txt") == text);
}

TEST_CASE("benchmark sweeps the source pull weight for transfer methods only") {
  TempDir dir;
  const std::string suite_dir = dir.str("suite");
  REQUIRE(run_cli({"synthetic", "--out-dir", suite_dir, "--sources", "2",
                   "--seed", "31", "--counts", "2", "--repeats", "2", "--dim",
                   "4", "--samples-per-class", "16"})
              .code == 0);

  const CliResult result =
      run_cli({"benchmark", "--config", suite_dir + "/benchmark.cfg",
               "--sweep-gamma-a", "0.5,2"});
  CHECK(result.code == 0);
  const std::string sweep = read_file(suite_dir + "/report/sweep.csv");
  CHECK(sweep.find("gamma_a,method,labeled_count,mean,std,repeats") !=
        std::string::npos);
  CHECK(sweep.find("0.5,dtdml_se,2,") != std::string::npos);
  CHECK(sweep.find("2,dtdml_rb,2,") != std::string::npos);
  CHECK(sweep.find(",rdml,") == std::string::npos);
  CHECK(sweep.find(",rdml_agg,") == std::string::npos);

  CHECK(run_cli({"benchmark", "--config", suite_dir + "/benchmark.cfg",
                 "--sweep-gamma-a", "-1"})
            .code == 2);
}

TEST_CASE("benchmark rejects broken configuration files") {
  TempDir dir;
  CHECK(run_cli({"benchmark", "--config", dir.str("missing.cfg")}).code == 2);

  std::ofstream bad(dir.str("bad.cfg"));
  bad << "target = nowhere.csv\nsources = nothing.csv\nseed = 1\nbogus = 1\n";
  bad.close();
  const CliResult result = run_cli({"benchmark", "--config", dir.str("bad.cfg")});
  CHECK(result.code == 2);
  CHECK(result.err.find("bogus") != std::string::npos);
}
