#include "dtdml/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dtdml/errors.hpp"

namespace dtdml {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string::size_type start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_double_token(const std::string& token, const std::string& context) {
  const std::string t = trim(token);
  double value = 0.0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || t.empty()) {
    throw std::runtime_error(context + ": cannot parse number '" + t + "'");
  }
  if (!std::isfinite(value)) {
    throw std::runtime_error(context + ": non-finite value '" + t + "'");
  }
  return value;
}

std::string format_exact(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

}  // namespace

LabeledDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);

  std::vector<std::string> labels;
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  int dim = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && !line.empty() && line[0] == '#') continue;
    if (trim(line).empty()) {
      throw std::runtime_error("load_dataset: " + path + " line " +
                               std::to_string(line_no) + ": empty row");
    }
    const std::vector<std::string> tokens = split(line, ',');
    if (tokens.size() < 2) {
      throw std::runtime_error("load_dataset: " + path + " line " +
                               std::to_string(line_no) +
                               ": expected a label and at least one feature");
    }
    const std::string label = trim(tokens[0]);
    if (label.empty()) {
      throw std::runtime_error("load_dataset: " + path + " line " +
                               std::to_string(line_no) + ": empty label");
    }
    if (dim < 0) {
      dim = static_cast<int>(tokens.size()) - 1;
    } else if (static_cast<int>(tokens.size()) - 1 != dim) {
      throw std::runtime_error("load_dataset: " + path + " line " +
                               std::to_string(line_no) + ": expected " +
                               std::to_string(dim) + " features, got " +
                               std::to_string(tokens.size() - 1));
    }
    std::vector<double> row(dim);
    for (int j = 0; j < dim; ++j) {
      row[j] = parse_double_token(tokens[j + 1], "load_dataset: " + path + " line " +
                                                     std::to_string(line_no));
    }
    labels.push_back(label);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("load_dataset: " + path + " holds no samples");

  LabeledDataset data;
  data.features.resize(static_cast<int>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < dim; ++j) data.features(static_cast<int>(i), j) = rows[i][j];
  }
  data.labels = std::move(labels);
  return data;
}

void save_dataset(const std::string& path, const LabeledDataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
  for (int i = 0; i < data.size(); ++i) {
    out << data.labels[i];
    for (int j = 0; j < data.dim(); ++j) out << ',' << format_exact(data.features(i, j));
    out << '\n';
  }
  if (!out.good()) throw std::runtime_error("save_dataset: write failed for " + path);
}

void save_metric(const std::string& path, const Metric& metric) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_metric: cannot open " + path);
  out << "dim=" << metric.dim() << '\n';
  for (int i = 0; i < metric.dim(); ++i) {
    for (int j = 0; j < metric.dim(); ++j) {
      if (j) out << ',';
      out << format_exact(metric.entries()(i, j));
    }
    out << '\n';
  }
  if (!out.good()) throw std::runtime_error("save_metric: write failed for " + path);
}

Metric load_metric(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_metric: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("load_metric: " + path + " is empty");
  }
  const std::string header = trim(line);
  if (header.rfind("dim=", 0) != 0) {
    throw std::runtime_error("load_metric: " + path + ": first line must be dim=<d>");
  }
  int dim = 0;
  const std::string dim_text = header.substr(4);
  const auto [ptr, ec] =
      std::from_chars(dim_text.data(), dim_text.data() + dim_text.size(), dim);
  if (ec != std::errc() || ptr != dim_text.data() + dim_text.size() || dim < 1) {
    throw std::runtime_error("load_metric: " + path + ": bad dimension '" + dim_text + "'");
  }
  Eigen::MatrixXd entries(dim, dim);
  for (int i = 0; i < dim; ++i) {
    if (!std::getline(in, line)) {
      throw std::runtime_error("load_metric: " + path + ": expected " +
                               std::to_string(dim) + " rows, file ends after " +
                               std::to_string(i));
    }
    const std::vector<std::string> tokens = split(line, ',');
    if (static_cast<int>(tokens.size()) != dim) {
      throw std::runtime_error("load_metric: " + path + " row " + std::to_string(i + 1) +
                               ": expected " + std::to_string(dim) + " entries, got " +
                               std::to_string(tokens.size()));
    }
    for (int j = 0; j < dim; ++j) {
      entries(i, j) = parse_double_token(
          tokens[j], "load_metric: " + path + " row " + std::to_string(i + 1));
    }
  }
  return Metric(std::move(entries));
}

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open configuration file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_text(buffer.str());
}

KeyValueFile KeyValueFile::parse_text(const std::string& text) {
  KeyValueFile kv;
  int line_no = 0;
  for (const std::string& raw : split(text, '\n')) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no),
                        "expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_no), "empty key");
    }
    if (kv.has(key)) throw ConfigError(key, "duplicate key");
    kv.set(key, value);
  }
  return kv;
}

void KeyValueFile::set(const std::string& key, const std::string& value) {
  const auto it = index_.find(key);
  if (it != index_.end()) {
    entries_[it->second].second = value;
    return;
  }
  index_[key] = entries_.size();
  entries_.emplace_back(key, value);
}

bool KeyValueFile::has(const std::string& key) const {
  return index_.count(key) > 0;
}

const std::string& KeyValueFile::get(const std::string& key) const {
  const auto it = index_.find(key);
  if (it == index_.end()) throw ConfigError(key, "missing required key");
  return entries_[it->second].second;
}

std::string KeyValueFile::get_or(const std::string& key,
                                 const std::string& fallback) const {
  const auto it = index_.find(key);
  return it == index_.end() ? fallback : entries_[it->second].second;
}

std::string KeyValueFile::render() const {
  std::string out;
  for (const auto& [key, value] : entries_) {
    out += key + " = " + value + "\n";
  }
  return out;
}

void KeyValueFile::write_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("KeyValueFile: cannot open " + path);
  out << render();
  if (!out.good()) throw std::runtime_error("KeyValueFile: write failed for " + path);
}

namespace {

int parse_int(const KeyValueFile& kv, const std::string& key, int fallback) {
  if (!kv.has(key)) return fallback;
  const std::string text = kv.get(key);
  int value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(key, "cannot parse integer '" + text + "'");
  }
  return value;
}

std::uint64_t parse_seed(const KeyValueFile& kv, const std::string& key) {
  const std::string text = kv.get(key);  // required, throws when missing
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(key, "cannot parse seed '" + text + "'");
  }
  return value;
}

double parse_real(const KeyValueFile& kv, const std::string& key, double fallback) {
  if (!kv.has(key)) return fallback;
  const std::string text = kv.get(key);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
    throw ConfigError(key, "cannot parse number '" + text + "'");
  }
  return value;
}

bool parse_bool(const KeyValueFile& kv, const std::string& key, bool fallback) {
  if (!kv.has(key)) return fallback;
  const std::string text = kv.get(key);
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(key, "expected true/false, got '" + text + "'");
}

std::optional<double> parse_auto_real(const KeyValueFile& kv, const std::string& key,
                                      std::optional<double> fallback) {
  if (!kv.has(key)) return fallback;
  if (kv.get(key) == "auto") return std::nullopt;
  return parse_real(kv, key, 0.0);
}

std::vector<std::string> parse_list(const std::string& text) {
  std::vector<std::string> items;
  for (const std::string& piece : split(text, ',')) {
    const std::string item = trim(piece);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

std::string render_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

const char* const known_keys[] = {
    "target",         "sources",          "methods",          "labeled_counts",
    "repeats",        "knn.k",            "seed",             "n_random_bases",
    "max_pairs.source", "output.dir",     "emit_plot",        "rdml.eta",
    "rdml.step_size", "rdml.epochs",      "rdml.project_every", "rdml.seed",
    "dtdml.gamma_a",  "dtdml.gamma_b",    "dtdml.gamma_c",    "dtdml.gamma_b_init",
    "dtdml.gamma_c_init", "dtdml.rho_b",  "dtdml.rho_c",      "dtdml.sigma",
    "dtdml.sigma_prime", "dtdml.inner_tol", "dtdml.inner_max_iters",
    "dtdml.outer_tol", "dtdml.outer_max_iters",
};

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
  return from_key_values(KeyValueFile::parse_file(path));
}

RunConfig RunConfig::from_key_values(const KeyValueFile& kv) {
  for (const auto& [key, value] : kv.entries()) {
    bool known = false;
    for (const char* candidate : known_keys) {
      if (key == candidate) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError(key, "unknown key");
  }

  RunConfig run;
  run.target_path = kv.get("target");
  run.source_paths = parse_list(kv.get("sources"));
  if (run.source_paths.empty()) throw ConfigError("sources", "must list at least one path");
  run.methods = parse_list(kv.get_or("methods", "rdml,rdml_agg,dtdml_se,dtdml_rb"));
  if (run.methods.empty()) throw ConfigError("methods", "must list at least one method");
  for (const std::string& name : run.methods) method_from_name(name);

  run.labeled_counts.clear();
  for (const std::string& item : parse_list(kv.get_or("labeled_counts", "2,4,6,8,10"))) {
    int value = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (ec != std::errc() || ptr != item.data() + item.size()) {
      throw ConfigError("labeled_counts", "cannot parse count '" + item + "'");
    }
    run.labeled_counts.push_back(value);
  }
  if (run.labeled_counts.empty()) {
    throw ConfigError("labeled_counts", "must list at least one count");
  }

  run.repeats = parse_int(kv, "repeats", run.repeats);
  run.knn_k = parse_int(kv, "knn.k", run.knn_k);
  run.seed = parse_seed(kv, "seed");
  run.n_random_bases = parse_int(kv, "n_random_bases", run.n_random_bases);
  run.max_source_pairs = parse_int(kv, "max_pairs.source", run.max_source_pairs);
  run.output_dir = kv.get_or("output.dir", run.output_dir);
  run.emit_plot = parse_bool(kv, "emit_plot", run.emit_plot);

  run.rdml.eta = parse_real(kv, "rdml.eta", run.rdml.eta);
  run.rdml.step_size = parse_real(kv, "rdml.step_size", run.rdml.step_size);
  run.rdml.epochs = parse_int(kv, "rdml.epochs", run.rdml.epochs);
  run.rdml.project_every = parse_int(kv, "rdml.project_every", run.rdml.project_every);
  if (kv.has("rdml.seed")) {
    run.rdml.seed = parse_seed(kv, "rdml.seed");
  }

  run.dtdml.gamma_a = parse_real(kv, "dtdml.gamma_a", run.dtdml.gamma_a);
  run.dtdml.gamma_b = parse_auto_real(kv, "dtdml.gamma_b", run.dtdml.gamma_b);
  run.dtdml.gamma_c = parse_auto_real(kv, "dtdml.gamma_c", run.dtdml.gamma_c);
  run.dtdml.gamma_b_init = parse_real(kv, "dtdml.gamma_b_init", run.dtdml.gamma_b_init);
  run.dtdml.gamma_c_init = parse_real(kv, "dtdml.gamma_c_init", run.dtdml.gamma_c_init);
  run.dtdml.rho_b = parse_real(kv, "dtdml.rho_b", run.dtdml.rho_b);
  run.dtdml.rho_c = parse_real(kv, "dtdml.rho_c", run.dtdml.rho_c);
  run.dtdml.sigma = parse_real(kv, "dtdml.sigma", run.dtdml.sigma);
  run.dtdml.sigma_prime = parse_real(kv, "dtdml.sigma_prime", run.dtdml.sigma_prime);
  run.dtdml.inner_tol = parse_real(kv, "dtdml.inner_tol", run.dtdml.inner_tol);
  run.dtdml.inner_max_iters =
      parse_int(kv, "dtdml.inner_max_iters", run.dtdml.inner_max_iters);
  run.dtdml.outer_tol = parse_real(kv, "dtdml.outer_tol", run.dtdml.outer_tol);
  run.dtdml.outer_max_iters =
      parse_int(kv, "dtdml.outer_max_iters", run.dtdml.outer_max_iters);

  run.rdml.validate();
  run.dtdml.validate();

  if (!std::filesystem::exists(run.target_path)) {
    throw ConfigError("target", "file does not exist: " + run.target_path);
  }
  for (const std::string& path : run.source_paths) {
    if (!std::filesystem::exists(path)) {
      throw ConfigError("sources", "file does not exist: " + path);
    }
  }
  return run;
}

KeyValueFile RunConfig::manifest() const {
  KeyValueFile kv;
  kv.set("target", target_path);
  std::string sources_joined;
  for (std::size_t i = 0; i < source_paths.size(); ++i) {
    if (i) sources_joined += ",";
    sources_joined += source_paths[i];
  }
  kv.set("sources", sources_joined);
  std::string methods_joined;
  for (std::size_t i = 0; i < methods.size(); ++i) {
    if (i) methods_joined += ",";
    methods_joined += methods[i];
  }
  kv.set("methods", methods_joined);
  std::string counts_joined;
  for (std::size_t i = 0; i < labeled_counts.size(); ++i) {
    if (i) counts_joined += ",";
    counts_joined += std::to_string(labeled_counts[i]);
  }
  kv.set("labeled_counts", counts_joined);
  kv.set("repeats", std::to_string(repeats));
  kv.set("knn.k", std::to_string(knn_k));
  kv.set("seed", std::to_string(seed));
  kv.set("n_random_bases", std::to_string(n_random_bases));
  kv.set("max_pairs.source", std::to_string(max_source_pairs));
  kv.set("output.dir", output_dir);
  kv.set("emit_plot", emit_plot ? "true" : "false");
  kv.set("rdml.eta", render_real(rdml.eta));
  kv.set("rdml.step_size", render_real(rdml.step_size));
  kv.set("rdml.epochs", std::to_string(rdml.epochs));
  kv.set("rdml.project_every", std::to_string(rdml.project_every));
  kv.set("rdml.seed", std::to_string(rdml.seed));
  kv.set("dtdml.gamma_a", render_real(dtdml.gamma_a));
  kv.set("dtdml.gamma_b", dtdml.gamma_b ? render_real(*dtdml.gamma_b) : "auto");
  kv.set("dtdml.gamma_c", dtdml.gamma_c ? render_real(*dtdml.gamma_c) : "auto");
  kv.set("dtdml.gamma_b_init", render_real(dtdml.gamma_b_init));
  kv.set("dtdml.gamma_c_init", render_real(dtdml.gamma_c_init));
  kv.set("dtdml.rho_b", render_real(dtdml.rho_b));
  kv.set("dtdml.rho_c", render_real(dtdml.rho_c));
  kv.set("dtdml.sigma", render_real(dtdml.sigma));
  kv.set("dtdml.sigma_prime", render_real(dtdml.sigma_prime));
  kv.set("dtdml.inner_tol", render_real(dtdml.inner_tol));
  kv.set("dtdml.inner_max_iters", std::to_string(dtdml.inner_max_iters));
  kv.set("dtdml.outer_tol", render_real(dtdml.outer_tol));
  kv.set("dtdml.outer_max_iters", std::to_string(dtdml.outer_max_iters));
  return kv;
}

ExperimentConfig RunConfig::experiment_for(Method method) const {
  ExperimentConfig config;
  config.method = method;
  config.labeled_counts = labeled_counts;
  config.repeats = repeats;
  config.knn_k = knn_k;
  config.seed = seed;
  config.n_random_bases = n_random_bases;
  config.max_source_pairs = max_source_pairs;
  return config;
}

SolverBundle RunConfig::solver_bundle() const {
  return SolverBundle{rdml, dtdml};
}

}  // namespace dtdml
