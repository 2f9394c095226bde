#pragma once

// Experiment runner: parses a sectioned key-value config describing a sweep
// (algorithms x workers x batch sizes x seeds), executes every point through
// the cluster simulator, and writes RFC-4180 CSV. Row order is the
// deterministic sweep order regardless of how many threads execute points.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pssim/cluster.hpp"
#include "pssim/data.hpp"
#include "pssim/errors.hpp"
#include "pssim/model.hpp"
#include "pssim/numeric.hpp"

namespace pssim {

inline constexpr int kResultSchemaVersion = 1;

enum class ModelKind { kLogisticRegression, kSvm };
enum class NumericModeKind { kReal, kFixed };
enum class ScalingMode { kNone, kWeak, kStrong };

struct DatasetSpec {
  enum class Kind { kSynthetic, kLibsvm };
  Kind kind = Kind::kSynthetic;
  // Synthetic generator parameters. Under weak scaling, n is the per-worker
  // sample count and the total grows proportionally with N.
  std::size_t d = 16;
  std::size_t n = 1024;
  double mean_shift = 1.0;
  std::size_t test_n = 256;
  std::uint64_t seed = 1;
  bool normalize = false;
  // LIBSVM input. Without test_path, the tail test_fraction of a
  // deterministic shuffle becomes the test split.
  std::string path;
  std::string test_path;
  std::optional<std::size_t> dim_override;
  double test_fraction = 0.2;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  ModelKind model = ModelKind::kLogisticRegression;
  RegSpec reg;
  std::vector<Algorithm> algorithms;
  NumericModeKind numeric = NumericModeKind::kReal;
  int frac_bits = kDefaultFracBits;
  std::vector<std::size_t> workers{1};
  std::vector<std::size_t> batch_sizes{32};
  std::size_t epochs = 1;
  std::size_t sync_period = 1;
  double learning_rate = 0.1;
  double rho = 1.0;
  std::size_t admm_local_passes = 1;
  ScalingMode scaling = ScalingMode::kNone;
  std::vector<std::uint64_t> seeds{1};
  std::size_t exec_lanes = 1;
  double payload_mult_up = 1.0;
  double payload_mult_down = 1.0;
  std::string output_path = "results.csv";
  std::string breakdown_path;  // empty: no breakdown file
};

namespace detail {

inline std::string trim(const std::string& s) {
  const std::size_t lo = s.find_first_not_of(" \t");
  if (lo == std::string::npos) return "";
  const std::size_t hi = s.find_last_not_of(" \t");
  return s.substr(lo, hi - lo + 1);
}

// Sectioned key-value reader with line-precise diagnostics. Unknown keys
// are reported after parsing so config typos fail loudly.
class ConfigReader {
 public:
  ConfigReader(std::istream& in, std::string name) : name_(std::move(name)) {
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const std::string text = trim(line);
      if (text.empty() || text[0] == '#' || text[0] == ';') continue;
      if (text.front() == '[') {
        if (text.back() != ']' || text.size() < 3) {
          fail_line(line_no, "malformed section header");
        }
        section = trim(text.substr(1, text.size() - 2));
        continue;
      }
      const std::size_t eq = text.find('=');
      if (eq == std::string::npos) {
        fail_line(line_no, "expected key = value");
      }
      if (section.empty()) {
        fail_line(line_no, "key outside any [section]");
      }
      const std::string key = trim(text.substr(0, eq));
      const std::string value = trim(text.substr(eq + 1));
      if (key.empty()) fail_line(line_no, "empty key");
      auto [it, inserted] = entries_[section].emplace(key, Entry{value, line_no, false});
      if (!inserted) {
        fail_line(line_no, "duplicate key [" + section + "] " + key);
      }
    }
  }

  bool has(const std::string& section, const std::string& key) const {
    auto s = entries_.find(section);
    return s != entries_.end() && s->second.count(key) > 0;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) {
    const Entry* e = lookup(section, key);
    return e ? e->value : fallback;
  }

  std::string require_string(const std::string& section, const std::string& key) {
    const Entry* e = lookup(section, key);
    if (e == nullptr) {
      throw ConfigError(name_ + ": missing required key [" + section + "] " + key);
    }
    return e->value;
  }

  double get_double(const std::string& section, const std::string& key,
                    double fallback) {
    const Entry* e = lookup(section, key);
    if (e == nullptr) return fallback;
    return parse_double(section, key, *e);
  }

  std::size_t get_size(const std::string& section, const std::string& key,
                       std::size_t fallback) {
    const Entry* e = lookup(section, key);
    if (e == nullptr) return fallback;
    return parse_size(section, key, e->value, e->line);
  }

  bool get_bool(const std::string& section, const std::string& key, bool fallback) {
    const Entry* e = lookup(section, key);
    if (e == nullptr) return fallback;
    if (e->value == "true" || e->value == "1") return true;
    if (e->value == "false" || e->value == "0") return false;
    fail_key(section, key, e->line, "expected true/false");
    return false;
  }

  std::vector<std::string> get_list(const std::string& section, const std::string& key,
                                    const std::vector<std::string>& fallback) {
    const Entry* e = lookup(section, key);
    if (e == nullptr) return fallback;
    std::vector<std::string> out;
    std::stringstream ss(e->value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const std::string t = trim(item);
      if (t.empty()) fail_key(section, key, e->line, "empty list element");
      out.push_back(t);
    }
    if (out.empty()) fail_key(section, key, e->line, "empty list");
    return out;
  }

  std::vector<std::size_t> get_size_list(const std::string& section,
                                         const std::string& key,
                                         const std::vector<std::size_t>& fallback) {
    const Entry* e = lookup(section, key);
    if (e == nullptr) return fallback;
    std::vector<std::size_t> out;
    for (const auto& item : get_list_tokens(section, key, *e)) {
      out.push_back(parse_size(section, key, item, e->line));
    }
    return out;
  }

  std::size_t line_of(const std::string& section, const std::string& key) const {
    auto s = entries_.find(section);
    if (s == entries_.end()) return 0;
    auto k = s->second.find(key);
    return k == s->second.end() ? 0 : k->second.line;
  }

  [[noreturn]] void fail_key(const std::string& section, const std::string& key,
                             std::size_t line, const std::string& message) const {
    throw ConfigError(name_ + ":" + std::to_string(line) + ": [" + section + "] " +
                      key + ": " + message);
  }

  void check_unused() const {
    for (const auto& [section, keys] : entries_) {
      for (const auto& [key, entry] : keys) {
        if (!entry.used) {
          fail_key(section, key, entry.line, "unknown key");
        }
      }
    }
  }

 private:
  struct Entry {
    std::string value;
    std::size_t line;
    mutable bool used;
  };

  const Entry* lookup(const std::string& section, const std::string& key) {
    auto s = entries_.find(section);
    if (s == entries_.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    k->second.used = true;
    return &k->second;
  }

  std::vector<std::string> get_list_tokens(const std::string& section,
                                           const std::string& key, const Entry& e) {
    std::vector<std::string> out;
    std::stringstream ss(e.value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const std::string t = trim(item);
      if (t.empty()) fail_key(section, key, e.line, "empty list element");
      out.push_back(t);
    }
    if (out.empty()) fail_key(section, key, e.line, "empty list");
    return out;
  }

  double parse_double(const std::string& section, const std::string& key,
                      const Entry& e) {
    char* end = nullptr;
    const double v = std::strtod(e.value.c_str(), &end);
    if (end != e.value.c_str() + e.value.size() || e.value.empty() ||
        !std::isfinite(v)) {
      fail_key(section, key, e.line, "expected a finite number");
    }
    return v;
  }

  std::size_t parse_size(const std::string& section, const std::string& key,
                         const std::string& text, std::size_t line) {
    if (text.empty() ||
        text.find_first_not_of("0123456789") != std::string::npos) {
      fail_key(section, key, line, "expected a non-negative integer");
    }
    return static_cast<std::size_t>(std::strtoull(text.c_str(), nullptr, 10));
  }

  [[noreturn]] void fail_line(std::size_t line, const std::string& message) const {
    throw ConfigError(name_ + ":" + std::to_string(line) + ": " + message);
  }

  std::string name_;
  std::map<std::string, std::map<std::string, Entry>> entries_;
};

inline Algorithm algorithm_from_string(const std::string& s) {
  if (s == "serial") return Algorithm::kSerial;
  if (s == "ma_sgd") return Algorithm::kMaSgd;
  if (s == "ga_sgd") return Algorithm::kGaSgd;
  if (s == "admm") return Algorithm::kAdmm;
  throw ConfigError("unknown algorithm '" + s +
                    "' (expected serial, ma_sgd, ga_sgd, or admm)");
}

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kSerial: return "serial";
    case Algorithm::kMaSgd: return "ma_sgd";
    case Algorithm::kGaSgd: return "ga_sgd";
    case Algorithm::kAdmm: return "admm";
  }
  return "?";
}

inline std::string to_string(ModelKind m) {
  return m == ModelKind::kLogisticRegression ? "lr" : "svm";
}

inline std::string to_string(RegKind r) {
  switch (r) {
    case RegKind::kNone: return "none";
    case RegKind::kL1: return "l1";
    case RegKind::kL2: return "l2";
  }
  return "?";
}

inline std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(std::istream& in,
                                                const std::string& name) {
  detail::ConfigReader reader(in, name);
  ExperimentConfig cfg;

  // [dataset]
  const std::string kind = reader.get_string("dataset", "kind", "synthetic");
  if (kind == "synthetic") {
    cfg.dataset.kind = DatasetSpec::Kind::kSynthetic;
  } else if (kind == "libsvm") {
    cfg.dataset.kind = DatasetSpec::Kind::kLibsvm;
  } else {
    reader.fail_key("dataset", "kind", reader.line_of("dataset", "kind"),
                    "expected synthetic or libsvm");
  }
  cfg.dataset.d = reader.get_size("dataset", "d", cfg.dataset.d);
  cfg.dataset.n = reader.get_size("dataset", "n", cfg.dataset.n);
  cfg.dataset.mean_shift = reader.get_double("dataset", "mean_shift", cfg.dataset.mean_shift);
  cfg.dataset.test_n = reader.get_size("dataset", "test_n", cfg.dataset.test_n);
  cfg.dataset.seed = reader.get_size("dataset", "seed", cfg.dataset.seed);
  cfg.dataset.normalize = reader.get_bool("dataset", "normalize", cfg.dataset.normalize);
  cfg.dataset.path = reader.get_string("dataset", "path", "");
  cfg.dataset.test_path = reader.get_string("dataset", "test_path", "");
  if (reader.has("dataset", "d_override")) {
    cfg.dataset.dim_override = reader.get_size("dataset", "d_override", 0);
  }
  cfg.dataset.test_fraction =
      reader.get_double("dataset", "test_fraction", cfg.dataset.test_fraction);

  // [model]
  const std::string model = reader.get_string("model", "kind", "lr");
  if (model == "lr") {
    cfg.model = ModelKind::kLogisticRegression;
  } else if (model == "svm") {
    cfg.model = ModelKind::kSvm;
  } else {
    reader.fail_key("model", "kind", reader.line_of("model", "kind"),
                    "expected lr or svm");
  }
  const std::string reg = reader.get_string("model", "reg", "none");
  if (reg == "none") cfg.reg.kind = RegKind::kNone;
  else if (reg == "l1") cfg.reg.kind = RegKind::kL1;
  else if (reg == "l2") cfg.reg.kind = RegKind::kL2;
  else {
    reader.fail_key("model", "reg", reader.line_of("model", "reg"),
                    "expected none, l1, or l2");
  }
  cfg.reg.lambda = reader.get_double("model", "lambda", 0.0);

  // [train]
  std::vector<std::string> algs =
      reader.get_list("train", "algorithms", {"serial"});
  cfg.algorithms.clear();
  for (const auto& a : algs) cfg.algorithms.push_back(detail::algorithm_from_string(a));
  const std::string numeric = reader.get_string("train", "numeric_mode", "real");
  if (numeric == "real") cfg.numeric = NumericModeKind::kReal;
  else if (numeric == "fixed") cfg.numeric = NumericModeKind::kFixed;
  else {
    reader.fail_key("train", "numeric_mode", reader.line_of("train", "numeric_mode"),
                    "expected real or fixed");
  }
  cfg.frac_bits = static_cast<int>(reader.get_size("train", "frac_bits",
                                                   static_cast<std::size_t>(cfg.frac_bits)));
  cfg.workers = reader.get_size_list("train", "workers", cfg.workers);
  cfg.batch_sizes = reader.get_size_list("train", "batch_sizes", cfg.batch_sizes);
  cfg.epochs = reader.get_size("train", "epochs", cfg.epochs);
  const std::string period = reader.get_string("train", "sync_period", "1");
  if (period == "oneshot") {
    cfg.sync_period = kOneShot;
  } else {
    if (period.find_first_not_of("0123456789") != std::string::npos || period.empty()) {
      reader.fail_key("train", "sync_period", reader.line_of("train", "sync_period"),
                      "expected a positive integer or 'oneshot'");
    }
    cfg.sync_period = static_cast<std::size_t>(std::strtoull(period.c_str(), nullptr, 10));
  }
  cfg.learning_rate = reader.get_double("train", "learning_rate", cfg.learning_rate);
  cfg.rho = reader.get_double("train", "rho", cfg.rho);
  cfg.admm_local_passes =
      reader.get_size("train", "admm_local_passes", cfg.admm_local_passes);
  const std::string scaling = reader.get_string("train", "scaling", "none");
  if (scaling == "none") cfg.scaling = ScalingMode::kNone;
  else if (scaling == "weak") cfg.scaling = ScalingMode::kWeak;
  else if (scaling == "strong") cfg.scaling = ScalingMode::kStrong;
  else {
    reader.fail_key("train", "scaling", reader.line_of("train", "scaling"),
                    "expected none, weak, or strong");
  }
  std::vector<std::size_t> seeds = reader.get_size_list("train", "seeds", {1});
  cfg.seeds.assign(seeds.begin(), seeds.end());
  cfg.exec_lanes = reader.get_size("train", "exec_lanes", cfg.exec_lanes);
  cfg.payload_mult_up = reader.get_double("train", "payload_mult_up", cfg.payload_mult_up);
  cfg.payload_mult_down =
      reader.get_double("train", "payload_mult_down", cfg.payload_mult_down);

  // [output]
  cfg.output_path = reader.get_string("output", "path", cfg.output_path);
  cfg.breakdown_path = reader.get_string("output", "breakdown", "");

  reader.check_unused();
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  return parse_experiment_config(in, path);
}

inline void validate(const ExperimentConfig& cfg) {
  if (cfg.algorithms.empty() || cfg.workers.empty() || cfg.batch_sizes.empty() ||
      cfg.seeds.empty()) {
    throw ConfigError("sweep lists must be non-empty");
  }
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (cfg.reg.lambda < 0.0) throw ConfigError("lambda must be non-negative");
  if (!(cfg.rho > 0.0)) throw ConfigError("rho must be positive");
  if (cfg.frac_bits < 0 || cfg.frac_bits > 30) {
    throw ConfigError("frac_bits must lie in [0, 30]");
  }
  if (cfg.sync_period != kOneShot && cfg.sync_period < 1) {
    throw ConfigError("sync_period must be >= 1 or 'oneshot'");
  }
  for (std::size_t w : cfg.workers) {
    if (w < 1) throw ConfigError("worker counts must be >= 1");
  }
  for (std::size_t b : cfg.batch_sizes) {
    if (b < 1) throw ConfigError("batch sizes must be >= 1");
  }
  const bool has_ga = std::find(cfg.algorithms.begin(), cfg.algorithms.end(),
                                Algorithm::kGaSgd) != cfg.algorithms.end();
  if (has_ga) {
    for (std::size_t w : cfg.workers) {
      for (std::size_t b : cfg.batch_sizes) {
        if (b % w != 0) {
          throw ConfigError("ga_sgd requires every batch size to be divisible by "
                            "every worker count (violated by b=" + std::to_string(b) +
                            ", workers=" + std::to_string(w) + ")");
        }
      }
    }
  }
  if (cfg.dataset.kind == DatasetSpec::Kind::kSynthetic) {
    if (cfg.dataset.n < 2 || cfg.dataset.n % 2 != 0) {
      throw ConfigError("synthetic n must be even and >= 2");
    }
    if (cfg.dataset.test_n < 2 || cfg.dataset.test_n % 2 != 0) {
      throw ConfigError("synthetic test_n must be even and >= 2");
    }
  } else {
    if (cfg.dataset.path.empty()) throw ConfigError("libsvm dataset requires a path");
    if (cfg.dataset.test_path.empty() &&
        !(cfg.dataset.test_fraction > 0.0 && cfg.dataset.test_fraction < 1.0)) {
      throw ConfigError("libsvm dataset needs test_path or test_fraction in (0,1)");
    }
    if (cfg.scaling == ScalingMode::kWeak) {
      throw ConfigError("weak scaling requires a synthetic dataset");
    }
    if (cfg.dataset.normalize) {
      throw ConfigError("normalize applies to dense (synthetic) datasets only");
    }
  }
}

namespace detail {

struct DataBundle {
  Dataset<double> train_real;
  Dataset<double> test_real;
  std::optional<Dataset<fx32>> train_fixed;
  std::optional<Dataset<fx32>> test_fixed;
  std::uint64_t quantization_overflows = 0;
};

// Materializes the train/test pair for one sweep point. Weak scaling
// regenerates n_per_worker * N samples from a per-N derived seed; the test
// set stays fixed across N for comparability.
inline std::shared_ptr<DataBundle> build_bundle(const ExperimentConfig& cfg,
                                                std::size_t num_workers) {
  auto bundle = std::make_shared<DataBundle>();
  if (cfg.dataset.kind == DatasetSpec::Kind::kSynthetic) {
    std::size_t n = cfg.dataset.n;
    std::uint64_t data_seed = mix_seed(cfg.dataset.seed, 0x64617461ULL);
    if (cfg.scaling == ScalingMode::kWeak) {
      n = cfg.dataset.n * num_workers;
      data_seed = mix_seed(data_seed, num_workers);
    }
    bundle->train_real =
        generate_synthetic(cfg.dataset.d, n, cfg.dataset.mean_shift, data_seed);
    bundle->test_real =
        generate_synthetic(cfg.dataset.d, cfg.dataset.test_n, cfg.dataset.mean_shift,
                           mix_seed(cfg.dataset.seed, 0x74657374ULL));
    if (cfg.dataset.normalize) {
      bundle->train_real = normalize_columns(bundle->train_real);
      bundle->test_real = normalize_columns(bundle->test_real);
    }
  } else {
    bundle->train_real = load_libsvm_file(cfg.dataset.path, cfg.dataset.dim_override);
    if (!cfg.dataset.test_path.empty()) {
      bundle->test_real =
          load_libsvm_file(cfg.dataset.test_path, std::optional<std::size_t>{bundle->train_real.dim});
    } else {
      const Dataset<double> mixed =
          pssim::shuffle(bundle->train_real, mix_seed(cfg.dataset.seed, 0x73706C69ULL));
      const auto n_test = static_cast<std::size_t>(
          static_cast<double>(mixed.size()) * cfg.dataset.test_fraction);
      if (n_test == 0 || n_test >= mixed.size()) {
        throw ConfigError("test_fraction leaves an empty train or test split");
      }
      Dataset<double> train, test;
      train.layout = test.layout = mixed.layout;
      train.dim = test.dim = mixed.dim;
      train.row_offsets.push_back(0);
      test.row_offsets.push_back(0);
      const std::size_t n_train = mixed.size() - n_test;
      for (std::size_t i = 0; i < mixed.size(); ++i) {
        Dataset<double>& dst = i < n_train ? train : test;
        const std::size_t lo = mixed.row_offsets[i];
        const std::size_t hi = mixed.row_offsets[i + 1];
        dst.col_indices.insert(dst.col_indices.end(), mixed.col_indices.begin() + lo,
                               mixed.col_indices.begin() + hi);
        dst.sparse_values.insert(dst.sparse_values.end(),
                                 mixed.sparse_values.begin() + lo,
                                 mixed.sparse_values.begin() + hi);
        dst.row_offsets.push_back(dst.col_indices.size());
        dst.labels.push_back(mixed.labels[i]);
      }
      bundle->train_real = std::move(train);
      bundle->test_real = std::move(test);
    }
  }
  return bundle;
}

inline void quantize_bundle(DataBundle& bundle, FixedFormat fmt) {
  OverflowCounter counter;
  bundle.train_fixed = quantize(bundle.train_real, fmt, &counter);
  bundle.test_fixed = quantize(bundle.test_real, fmt, &counter);
  bundle.quantization_overflows = counter.value();
}

struct SweepPoint {
  Algorithm algorithm;
  std::size_t num_workers;
  std::size_t batch_size;
  std::uint64_t seed;
  const DataBundle* data;
};

struct PointResult {
  SweepPoint point;
  TrainReport report;
  std::uint64_t quantization_overflows = 0;
};

inline ClusterConfig cluster_config_for(const ExperimentConfig& cfg,
                                        const SweepPoint& point,
                                        std::uint64_t seed_offset) {
  ClusterConfig ccfg;
  ccfg.algorithm = point.algorithm;
  ccfg.num_workers = point.num_workers;
  ccfg.sync_period = cfg.sync_period;
  ccfg.sgd.learning_rate = cfg.learning_rate;
  ccfg.sgd.batch_size = point.batch_size;
  ccfg.sgd.epochs = cfg.epochs;
  ccfg.loss = cfg.model == ModelKind::kLogisticRegression ? LossKind::kLogistic
                                                          : LossKind::kHinge;
  ccfg.reg = cfg.reg;
  ccfg.rho = cfg.rho;
  ccfg.admm_local_passes = cfg.admm_local_passes;
  ccfg.master_seed = point.seed + seed_offset;
  ccfg.exec_lanes = cfg.exec_lanes;
  ccfg.payload_mult_up = cfg.payload_mult_up;
  ccfg.payload_mult_down = cfg.payload_mult_down;
  return ccfg;
}

}  // namespace detail

inline const char* result_csv_header() {
  return "dataset,model,algorithm,numeric_mode,frac_bits,scaling,n,d,num_workers,"
         "batch_size,sync_period,learning_rate,lambda,reg,rho,seed,epoch,"
         "train_loss,accuracy,auc,server_bytes_up,server_bytes_down,local_bytes,"
         "sync_events,overflow_count";
}

inline const char* breakdown_csv_header() {
  return "model,algorithm,numeric_mode,num_workers,batch_size,seed,epochs,n,d,"
         "server_bytes_up,server_bytes_down,bootstrap_bytes_up,"
         "bootstrap_bytes_down,local_bytes,sync_events,grad_evals";
}

// Per-run transfer/op totals: the byte-level analog of a wall-clock
// breakdown. One row per completed run.
inline std::string emit_breakdown(const ExperimentConfig& cfg,
                                  const std::vector<detail::PointResult>& results) {
  if (results.empty()) {
    throw ConfigError("emit_breakdown: no completed runs");
  }
  std::ostringstream out;
  out << "# pssim breakdown schema=" << kResultSchemaVersion << "\n";
  out << breakdown_csv_header() << "\n";
  for (const auto& r : results) {
    const CommLedger& led = r.report.ledger;
    out << detail::to_string(cfg.model) << ',' << detail::to_string(r.point.algorithm)
        << ',' << (cfg.numeric == NumericModeKind::kReal ? "real" : "fixed") << ','
        << r.point.num_workers << ',' << r.point.batch_size << ',' << r.point.seed
        << ',' << cfg.epochs << ',' << r.point.data->train_real.size() << ','
        << r.point.data->train_real.dim << ',' << led.server_bytes_up << ','
        << led.server_bytes_down << ',' << led.bootstrap_bytes_up << ','
        << led.bootstrap_bytes_down << ',' << led.local_bytes << ','
        << led.sync_events << ',' << r.report.grad_evals << "\n";
  }
  return out.str();
}

struct ExperimentOutput {
  std::string results_path;
  std::string breakdown_path;
  std::size_t rows = 0;
};

// Executes the full sweep and writes the CSV file(s). threads parallelizes
// across sweep points; rows appear in deterministic sweep order (algorithm,
// workers, batch size, seed, epoch) regardless of the thread count.
inline ExperimentOutput run_experiment(const ExperimentConfig& cfg,
                                       const std::string& out_dir,
                                       std::size_t threads = 1,
                                       std::uint64_t seed_offset = 0) {
  validate(cfg);

  // Materialize every dataset the sweep needs, keyed by worker count when
  // weak scaling regenerates per N.
  std::map<std::size_t, std::shared_ptr<detail::DataBundle>> bundles;
  const bool per_worker_data =
      cfg.scaling == ScalingMode::kWeak && cfg.dataset.kind == DatasetSpec::Kind::kSynthetic;
  const FixedFormat fmt{cfg.frac_bits};
  for (std::size_t w : cfg.workers) {
    const std::size_t key = per_worker_data ? w : 0;
    if (bundles.count(key) > 0) continue;
    auto bundle = detail::build_bundle(cfg, w);
    if (cfg.numeric == NumericModeKind::kFixed) {
      detail::quantize_bundle(*bundle, fmt);
    }
    bundles.emplace(key, std::move(bundle));
  }

  std::vector<detail::SweepPoint> points;
  for (Algorithm alg : cfg.algorithms) {
    for (std::size_t w : cfg.workers) {
      for (std::size_t b : cfg.batch_sizes) {
        for (std::uint64_t seed : cfg.seeds) {
          const std::size_t key = per_worker_data ? w : 0;
          points.push_back({alg, w, b, seed, bundles.at(key).get()});
        }
      }
    }
  }

  const SigmoidLut lut = cfg.numeric == NumericModeKind::kFixed
                             ? build_default_sigmoid_lut()
                             : SigmoidLut{};

  std::vector<detail::PointResult> results(points.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= points.size()) return;
      try {
        const detail::SweepPoint& point = points[i];
        const ClusterConfig ccfg = detail::cluster_config_for(cfg, point, seed_offset);
        detail::PointResult result;
        result.point = point;
        if (cfg.numeric == NumericModeKind::kReal) {
          result.report = run_training(RealMode{}, point.data->train_real,
                                       point.data->test_real, ccfg);
        } else {
          OverflowCounter counter;
          FixedMode mode(fmt, &lut, &counter);
          result.report = run_training(mode, *point.data->train_fixed,
                                       *point.data->test_fixed, ccfg);
          result.quantization_overflows = point.data->quantization_overflows;
        }
        results[i] = std::move(result);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  if (threads <= 1 || points.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const std::size_t count = std::min(threads, points.size());
    pool.reserve(count);
    for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  // Assemble the results CSV in sweep order.
  std::ostringstream out;
  out << "# pssim results schema=" << kResultSchemaVersion << "\n";
  out << result_csv_header() << "\n";
  std::size_t rows = 0;
  const std::string dataset_name =
      cfg.dataset.kind == DatasetSpec::Kind::kSynthetic
          ? "synthetic"
          : std::filesystem::path(cfg.dataset.path).filename().string();
  const std::string sync_period_text =
      cfg.sync_period == kOneShot ? "oneshot" : std::to_string(cfg.sync_period);
  for (const auto& r : results) {
    for (std::size_t e = 0; e < r.report.epochs.size(); ++e) {
      const EpochStats& stats = r.report.epochs[e];
      out << detail::csv_escape(dataset_name) << ',' << detail::to_string(cfg.model)
          << ',' << detail::to_string(r.point.algorithm) << ','
          << (cfg.numeric == NumericModeKind::kReal ? "real" : "fixed") << ','
          << cfg.frac_bits << ','
          << (cfg.scaling == ScalingMode::kNone
                  ? "none"
                  : (cfg.scaling == ScalingMode::kWeak ? "weak" : "strong"))
          << ',' << r.point.data->train_real.size() << ','
          << r.point.data->train_real.dim << ',' << r.point.num_workers << ','
          << r.point.batch_size << ',' << sync_period_text << ','
          << detail::format_double(cfg.learning_rate) << ','
          << detail::format_double(cfg.reg.lambda) << ','
          << detail::to_string(cfg.reg.kind) << ',' << detail::format_double(cfg.rho)
          << ',' << r.point.seed << ',' << e + 1 << ','
          << detail::format_double(stats.train_loss) << ','
          << detail::format_double(stats.accuracy) << ','
          << (stats.auc ? detail::format_double(*stats.auc) : "") << ','
          << stats.ledger.server_bytes_up << ',' << stats.ledger.server_bytes_down
          << ',' << stats.ledger.local_bytes << ',' << stats.ledger.sync_events
          << ',' << r.report.overflow_count + r.quantization_overflows << "\n";
      ++rows;
    }
  }

  namespace fs = std::filesystem;
  const fs::path base(out_dir);
  auto resolve = [&](const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
  };
  ExperimentOutput output;
  const fs::path results_path = resolve(cfg.output_path);
  if (results_path.has_parent_path()) {
    fs::create_directories(results_path.parent_path());
  }
  std::ofstream results_file(results_path);
  if (!results_file) {
    throw ConfigError("cannot write results file: " + results_path.string());
  }
  results_file << out.str();
  output.results_path = results_path.string();
  output.rows = rows;

  if (!cfg.breakdown_path.empty()) {
    const fs::path breakdown_path = resolve(cfg.breakdown_path);
    if (breakdown_path.has_parent_path()) {
      fs::create_directories(breakdown_path.parent_path());
    }
    std::ofstream breakdown_file(breakdown_path);
    if (!breakdown_file) {
      throw ConfigError("cannot write breakdown file: " + breakdown_path.string());
    }
    breakdown_file << emit_breakdown(cfg, results);
    output.breakdown_path = breakdown_path.string();
  }
  return output;
}

inline ExperimentOutput run_experiment_file(const std::string& config_path,
                                            const std::string& out_dir,
                                            std::size_t threads = 1,
                                            std::uint64_t seed_offset = 0) {
  const ExperimentConfig cfg = load_experiment_config(config_path);
  return run_experiment(cfg, out_dir, threads, seed_offset);
}

}  // namespace pssim
