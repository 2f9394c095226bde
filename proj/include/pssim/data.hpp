#pragma once

// Dataset container plus ingestion, generation, preprocessing, and the two
// partitioning schemes. Datasets are immutable once built and freely shared
// across worker threads.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "pssim/errors.hpp"
#include "pssim/fixedpoint.hpp"
#include "pssim/rng.hpp"

namespace pssim {

enum class Layout { kDense, kSparse };

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

// Read-only view of one sample. dense == nullptr marks a sparse sample, in
// which case (indices, values) hold nnz strictly ascending pairs.
template <typename T>
struct SampleView {
  const T* dense = nullptr;
  std::size_t dim = 0;
  const std::int32_t* indices = nullptr;
  const T* values = nullptr;
  std::size_t nnz = 0;
  std::int32_t label = 0;
};

template <typename T>
struct Dataset {
  Layout layout = Layout::kDense;
  std::size_t dim = 0;
  // Dense storage: n x dim, row major.
  std::vector<T> dense_values;
  // Sparse storage (CSR): row_offsets has n + 1 entries.
  std::vector<std::size_t> row_offsets;
  std::vector<std::int32_t> col_indices;
  std::vector<T> sparse_values;
  std::vector<std::int32_t> labels;

  std::size_t size() const { return labels.size(); }

  SampleView<T> sample(std::size_t i) const {
    SampleView<T> view;
    view.dim = dim;
    view.label = labels[i];
    if (layout == Layout::kDense) {
      view.dense = dense_values.data() + i * dim;
    } else {
      const std::size_t lo = row_offsets[i];
      const std::size_t hi = row_offsets[i + 1];
      view.indices = col_indices.data() + lo;
      view.values = sparse_values.data() + lo;
      view.nnz = hi - lo;
    }
    return view;
  }

  // Modeled stream footprint of samples [range), at 4 bytes per stored
  // feature value, 4 per sparse index, and 4 per label.
  std::uint64_t sample_bytes(IndexRange range) const {
    if (layout == Layout::kDense) {
      return static_cast<std::uint64_t>(range.size()) * (dim + 1) * 4;
    }
    const std::uint64_t nnz = row_offsets[range.end] - row_offsets[range.begin];
    return nnz * 8 + static_cast<std::uint64_t>(range.size()) * 4;
  }
};

namespace detail {

inline bool parse_double_token(const std::string& tok, double* out) {
  const char* s = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end != s + tok.size() || tok.empty()) return false;
  if (!std::isfinite(v)) return false;
  *out = v;
  return true;
}

}  // namespace detail

// Parses LIBSVM text: one `<label> <idx>:<val> ...` line per sample, labels
// integral, indices non-negative and strictly ascending within a line. The
// feature dimension is 1 + the largest index seen unless dim_override is
// given, in which case every index must fall below it.
inline Dataset<double> parse_libsvm(std::istream& in,
                                    std::optional<std::size_t> dim_override = {}) {
  Dataset<double> ds;
  ds.layout = Layout::kSparse;
  ds.row_offsets.push_back(0);
  std::string line;
  std::size_t line_no = 0;
  std::int64_t max_index = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t pos = line.find_first_not_of(" \t");
    if (pos == std::string::npos) continue;  // blank line

    // Label token.
    std::size_t tok_end = line.find_first_of(" \t", pos);
    if (tok_end == std::string::npos) tok_end = line.size();
    double label_val = 0.0;
    if (!detail::parse_double_token(line.substr(pos, tok_end - pos), &label_val) ||
        label_val != std::floor(label_val) ||
        std::abs(label_val) > 1e9) {
      throw ParseError(line_no, pos + 1, "malformed label");
    }
    ds.labels.push_back(static_cast<std::int32_t>(label_val));

    // index:value pairs.
    std::int64_t prev_index = -1;
    pos = tok_end;
    while (pos < line.size()) {
      pos = line.find_first_not_of(" \t", pos);
      if (pos == std::string::npos) break;
      tok_end = line.find_first_of(" \t", pos);
      if (tok_end == std::string::npos) tok_end = line.size();
      const std::string tok = line.substr(pos, tok_end - pos);
      const std::size_t colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size()) {
        throw ParseError(line_no, pos + 1, "expected index:value pair");
      }
      const std::string idx_str = tok.substr(0, colon);
      if (idx_str.find_first_not_of("0123456789") != std::string::npos) {
        throw ParseError(line_no, pos + 1, "feature index must be a non-negative integer");
      }
      const std::int64_t idx = std::strtoll(idx_str.c_str(), nullptr, 10);
      if (idx > std::numeric_limits<std::int32_t>::max()) {
        throw ParseError(line_no, pos + 1, "feature index out of range");
      }
      if (idx <= prev_index) {
        throw NonMonotonicIndexError(line_no);
      }
      if (dim_override && idx >= static_cast<std::int64_t>(*dim_override)) {
        throw ParseError(line_no, pos + 1,
                         "feature index exceeds the declared dimension");
      }
      double value = 0.0;
      if (!detail::parse_double_token(tok.substr(colon + 1), &value)) {
        throw ParseError(line_no, pos + colon + 2, "malformed feature value");
      }
      ds.col_indices.push_back(static_cast<std::int32_t>(idx));
      ds.sparse_values.push_back(value);
      prev_index = idx;
      max_index = std::max(max_index, idx);
      pos = tok_end;
    }
    ds.row_offsets.push_back(ds.col_indices.size());
  }
  if (ds.labels.empty()) {
    throw EmptyDatasetError();
  }
  ds.dim = dim_override ? *dim_override
                        : static_cast<std::size_t>(max_index + 1);
  return ds;
}

inline void serialize_libsvm(const Dataset<double>& ds, std::ostream& out) {
  if (ds.layout != Layout::kSparse) {
    throw UnsupportedLayoutError("serialize_libsvm: expects a sparse dataset");
  }
  char buf[64];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.labels[i];
    for (std::size_t k = ds.row_offsets[i]; k < ds.row_offsets[i + 1]; ++k) {
      std::snprintf(buf, sizeof(buf), " %d:%.17g", ds.col_indices[k],
                    ds.sparse_values[k]);
      out << buf;
    }
    out << '\n';
  }
}

// Reads a LIBSVM file; gzip-compressed input is handled transparently
// (zlib's gz layer passes plain text through unchanged).
inline Dataset<double> load_libsvm_file(const std::string& path,
                                        std::optional<std::size_t> dim_override = {}) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) {
    throw DataError("cannot open dataset file: " + path);
  }
  std::string content;
  char buf[1 << 16];
  int got = 0;
  while ((got = gzread(f, buf, sizeof(buf))) > 0) {
    content.append(buf, static_cast<std::size_t>(got));
  }
  const bool read_error = (got < 0);
  gzclose(f);
  if (read_error) {
    throw DataError("failed reading dataset file: " + path);
  }
  std::istringstream in(content);
  return parse_libsvm(in, dim_override);
}

// Two symmetric unit-variance Gaussians at +/- mean_shift/sqrt(d) * 1, so the
// Bayes-optimal accuracy is Phi(mean_shift) and checkable analytically.
// Samples alternate class (+,-,+,-,...); labels are 1/0. Output is a pure
// function of (d, n, mean_shift, seed).
inline Dataset<double> generate_synthetic(std::size_t d, std::size_t n,
                                          double mean_shift, std::uint64_t seed) {
  if (d < 1) {
    throw ConfigError("generate_synthetic: d must be >= 1");
  }
  if (n < 2 || n % 2 != 0) {
    throw ConfigError("generate_synthetic: n must be even and >= 2");
  }
  Dataset<double> ds;
  ds.layout = Layout::kDense;
  ds.dim = d;
  ds.dense_values.reserve(n * d);
  ds.labels.reserve(n);
  GaussianSampler gauss(seed);
  const double mu = mean_shift / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < n; ++i) {
    const bool positive = (i % 2 == 0);
    const double center = positive ? mu : -mu;
    for (std::size_t j = 0; j < d; ++j) {
      ds.dense_values.push_back(center + gauss.next());
    }
    ds.labels.push_back(positive ? 1 : 0);
  }
  return ds;
}

// Column-wise standardization: mean 0, standard deviation 1 (1/n variance).
// Columns whose relative variance is numerically zero become all-zero.
inline Dataset<double> normalize_columns(const Dataset<double>& ds) {
  if (ds.layout != Layout::kDense) {
    throw UnsupportedLayoutError("normalize_columns: dense datasets only");
  }
  const std::size_t n = ds.size();
  const std::size_t d = ds.dim;
  Dataset<double> out = ds;
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      mean[j] += ds.dense_values[i * d + j];
    }
  }
  for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = ds.dense_values[i * d + j] - mean[j];
      var[j] += c * c;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    var[j] /= static_cast<double>(n);
    // Relative threshold: catches columns that are constant up to roundoff.
    if (var[j] <= 1e-24 * std::max(1.0, mean[j] * mean[j])) var[j] = 0.0;
  }
  for (std::size_t j = 0; j < d; ++j) {
    const double inv = var[j] > 0.0 ? 1.0 / std::sqrt(var[j]) : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double& v = out.dense_values[i * d + j];
      v = var[j] > 0.0 ? (v - mean[j]) * inv : 0.0;
    }
  }
  return out;
}

// Encodes every feature value; labels pass through unchanged. Saturations
// are tallied on the supplied counter.
inline Dataset<fx32> quantize(const Dataset<double>& ds, FixedFormat fmt,
                              OverflowCounter* overflow = nullptr) {
  Dataset<fx32> out;
  out.layout = ds.layout;
  out.dim = ds.dim;
  out.labels = ds.labels;
  out.row_offsets = ds.row_offsets;
  out.col_indices = ds.col_indices;
  out.dense_values.reserve(ds.dense_values.size());
  for (double v : ds.dense_values) out.dense_values.push_back(encode(v, fmt, overflow));
  out.sparse_values.reserve(ds.sparse_values.size());
  for (double v : ds.sparse_values) out.sparse_values.push_back(encode(v, fmt, overflow));
  return out;
}

// Fisher-Yates permutation over SplitMix64: for i in [0, n-1),
// j = i + next() mod (n - i), swap. Returns a gathered copy.
template <typename T>
Dataset<T> shuffle(const Dataset<T>& ds, std::uint64_t seed) {
  const std::size_t n = ds.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t j = i + rng.next_below(n - i);
    std::swap(perm[i], perm[j]);
  }
  Dataset<T> out;
  out.layout = ds.layout;
  out.dim = ds.dim;
  out.labels.reserve(n);
  if (ds.layout == Layout::kDense) {
    out.dense_values.reserve(n * ds.dim);
    for (std::size_t i = 0; i < n; ++i) {
      const T* row = ds.dense_values.data() + perm[i] * ds.dim;
      out.dense_values.insert(out.dense_values.end(), row, row + ds.dim);
      out.labels.push_back(ds.labels[perm[i]]);
    }
  } else {
    out.row_offsets.reserve(n + 1);
    out.row_offsets.push_back(0);
    out.col_indices.reserve(ds.col_indices.size());
    out.sparse_values.reserve(ds.sparse_values.size());
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t lo = ds.row_offsets[perm[i]];
      const std::size_t hi = ds.row_offsets[perm[i] + 1];
      out.col_indices.insert(out.col_indices.end(), ds.col_indices.begin() + lo,
                             ds.col_indices.begin() + hi);
      out.sparse_values.insert(out.sparse_values.end(),
                               ds.sparse_values.begin() + lo,
                               ds.sparse_values.begin() + hi);
      out.row_offsets.push_back(out.col_indices.size());
      out.labels.push_back(ds.labels[perm[i]]);
    }
  }
  return out;
}

template <typename T>
Dataset<T> densify(const Dataset<T>& ds) {
  if (ds.layout == Layout::kDense) return ds;
  Dataset<T> out;
  out.layout = Layout::kDense;
  out.dim = ds.dim;
  out.labels = ds.labels;
  out.dense_values.assign(ds.size() * ds.dim, T{});
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t k = ds.row_offsets[i]; k < ds.row_offsets[i + 1]; ++k) {
      out.dense_values[i * ds.dim + ds.col_indices[k]] = ds.sparse_values[k];
    }
  }
  return out;
}

// Static assignment of samples to workers. Contiguous plans give worker k
// the k-th block of floor(n/N) samples; batch-shard plans give worker k the
// k-th slice of b/N samples of every global batch. Trailing samples that do
// not fill a block/batch are dropped and reported.
struct PartitionPlan {
  enum class Scheme { kContiguous, kBatchShard };
  Scheme scheme = Scheme::kContiguous;
  std::size_t num_workers = 1;
  std::size_t batch_size = 0;   // batch-shard only
  std::size_t per_worker = 0;   // contiguous only
  std::size_t num_batches = 0;  // batch-shard only
  std::size_t used = 0;
  std::size_t dropped = 0;

  IndexRange worker_range(std::size_t k) const {
    return {k * per_worker, (k + 1) * per_worker};
  }
  IndexRange shard_range(std::size_t batch, std::size_t worker) const {
    const std::size_t shard = batch_size / num_workers;
    const std::size_t base = batch * batch_size + worker * shard;
    return {base, base + shard};
  }
};

inline PartitionPlan partition_contiguous(std::size_t n, std::size_t num_workers) {
  if (num_workers < 1) {
    throw ConfigError("partition_contiguous: need at least one worker");
  }
  if (num_workers > n) {
    throw ConfigError("partition_contiguous: more workers than samples");
  }
  PartitionPlan plan;
  plan.scheme = PartitionPlan::Scheme::kContiguous;
  plan.num_workers = num_workers;
  plan.per_worker = n / num_workers;
  plan.used = plan.per_worker * num_workers;
  plan.dropped = n - plan.used;
  return plan;
}

inline PartitionPlan partition_batch_shards(std::size_t n, std::size_t num_workers,
                                            std::size_t batch_size) {
  if (num_workers < 1) {
    throw ConfigError("partition_batch_shards: need at least one worker");
  }
  if (batch_size < 1 || batch_size % num_workers != 0) {
    throw ConfigError("partition_batch_shards: batch size must be divisible by the worker count");
  }
  if (batch_size > n) {
    throw ConfigError("partition_batch_shards: batch size exceeds the sample count");
  }
  PartitionPlan plan;
  plan.scheme = PartitionPlan::Scheme::kBatchShard;
  plan.num_workers = num_workers;
  plan.batch_size = batch_size;
  plan.num_batches = n / batch_size;
  plan.used = plan.num_batches * batch_size;
  plan.dropped = n - plan.used;
  return plan;
}

template <typename T>
PartitionPlan partition_contiguous(const Dataset<T>& ds, std::size_t num_workers) {
  return partition_contiguous(ds.size(), num_workers);
}

template <typename T>
PartitionPlan partition_batch_shards(const Dataset<T>& ds, std::size_t num_workers,
                                     std::size_t batch_size) {
  return partition_batch_shards(ds.size(), num_workers, batch_size);
}

}  // namespace pssim
