#pragma once

// Parameter-server simulator. Executes serial mini-batch SGD, MA-SGD,
// GA-SGD, and consensus ADMM over statically partitioned data, with a byte
// ledger modeling every transfer across the worker/server boundary and the
// worker-local sample/model streams. Costs are modeled as byte counts, not
// simulated latency.
//
// Determinism contract: identical (config, dataset, seed) produce a
// bit-identical TrainReport regardless of how many execution lanes run the
// worker phases. All cross-worker reductions happen on the server in
// ascending worker order with a widened accumulator (64-bit raw sums in
// fixed mode, long double in real mode).

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "pssim/data.hpp"
#include "pssim/errors.hpp"
#include "pssim/metrics.hpp"
#include "pssim/model.hpp"
#include "pssim/numeric.hpp"
#include "pssim/optim.hpp"

namespace pssim {

enum class Algorithm { kSerial, kMaSgd, kGaSgd, kAdmm };

// sync_period value selecting one-shot averaging (a single sync per epoch).
inline constexpr std::size_t kOneShot = static_cast<std::size_t>(-1);

struct ClusterConfig {
  Algorithm algorithm = Algorithm::kSerial;
  std::size_t num_workers = 1;
  std::size_t sync_period = 1;  // MA-SGD batches between averagings
  SgdConfig sgd;
  LossKind loss = LossKind::kLogistic;
  RegSpec reg;
  double rho = 1.0;
  std::size_t admm_local_passes = 1;
  std::uint64_t master_seed = 0;
  std::size_t exec_lanes = 1;
  // Payload multipliers per transfer direction, exposed so alternative wire
  // accountings can be modeled; 1.0/1.0 is the symmetric two-payload
  // protocol (one model/gradient up, one model down per worker per sync).
  double payload_mult_up = 1.0;
  double payload_mult_down = 1.0;
};

struct LedgerSnapshot {
  std::uint64_t server_bytes_up = 0;
  std::uint64_t server_bytes_down = 0;
  std::uint64_t local_bytes = 0;
  std::uint64_t sync_events = 0;
  friend bool operator==(const LedgerSnapshot&, const LedgerSnapshot&) = default;
};

// Cumulative transfer counters. The one-time initial model broadcast and
// final collection are tracked separately from the per-epoch loop traffic.
struct CommLedger {
  std::uint64_t server_bytes_up = 0;
  std::uint64_t server_bytes_down = 0;
  std::uint64_t bootstrap_bytes_up = 0;
  std::uint64_t bootstrap_bytes_down = 0;
  std::uint64_t local_bytes = 0;
  std::uint64_t sync_events = 0;
  std::uint64_t payload_bytes = 0;  // P = 4 * (d + 1)

  LedgerSnapshot snapshot() const {
    return {server_bytes_up, server_bytes_down, local_bytes, sync_events};
  }
};

struct EpochStats {
  std::vector<double> weights;  // decoded global model at the epoch boundary
  double bias = 0.0;
  double train_loss = 0.0;
  double accuracy = 0.0;
  std::optional<double> auc;
  LedgerSnapshot ledger;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  CommLedger ledger;
  std::vector<double> final_weights;
  double final_bias = 0.0;
  std::uint64_t overflow_count = 0;
  std::uint64_t grad_evals = 0;
  std::size_t dropped_samples = 0;
  double wall_seconds = 0.0;
};

// Closed-form per-epoch server traffic. Must match the counted ledger
// exactly at every epoch boundary; the test suite holds the two sides
// together.
struct LedgerForecast {
  std::uint64_t sync_events_per_epoch = 0;
  std::uint64_t server_bytes_up_per_epoch = 0;
  std::uint64_t server_bytes_down_per_epoch = 0;
  std::uint64_t total_per_epoch() const {
    return server_bytes_up_per_epoch + server_bytes_down_per_epoch;
  }
};

inline std::uint64_t model_payload_bytes(std::uint64_t d) { return 4 * (d + 1); }

inline LedgerForecast ledger_formulas(const ClusterConfig& cfg, std::uint64_t n,
                                      std::uint64_t d) {
  const std::uint64_t payload = model_payload_bytes(d);
  const auto per_up = static_cast<std::uint64_t>(
      std::llround(cfg.payload_mult_up * static_cast<double>(payload)));
  const auto per_down = static_cast<std::uint64_t>(
      std::llround(cfg.payload_mult_down * static_cast<double>(payload)));
  const std::uint64_t workers = cfg.num_workers;
  const std::uint64_t b = cfg.sgd.batch_size;
  std::uint64_t syncs = 0;
  switch (cfg.algorithm) {
    case Algorithm::kSerial:
      syncs = 0;
      break;
    case Algorithm::kMaSgd: {
      const std::uint64_t per_worker_batches = (n / workers) / b;
      const std::uint64_t period =
          cfg.sync_period == kOneShot ? per_worker_batches : cfg.sync_period;
      syncs = period == 0 ? 0 : (per_worker_batches + period - 1) / period;
      break;
    }
    case Algorithm::kGaSgd:
      syncs = n / b;
      break;
    case Algorithm::kAdmm:
      syncs = 1;
      break;
  }
  LedgerForecast forecast;
  forecast.sync_events_per_epoch = syncs;
  forecast.server_bytes_up_per_epoch = syncs * workers * per_up;
  forecast.server_bytes_down_per_epoch = syncs * workers * per_down;
  return forecast;
}

// Fixed-size lane pool for running worker phases concurrently. Lane t
// executes indices t, t + lanes, ... so the partitioning is static; phases
// share no mutable state, keeping results independent of the lane count.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t lanes) : lanes_(lanes) {
    threads_.reserve(lanes);
    for (std::size_t t = 0; t < lanes; ++t) {
      threads_.emplace_back([this, t] { lane_loop(t); });
    }
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  ~WorkerPool() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      stop_ = true;
    }
    cv_work_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void run(std::size_t count, const std::function<void(std::size_t)>& fn) {
    std::unique_lock<std::mutex> lock(mu_);
    fn_ = &fn;
    count_ = count;
    pending_ = lanes_;
    ++generation_;
    cv_work_.notify_all();
    cv_done_.wait(lock, [this] { return pending_ == 0; });
    fn_ = nullptr;
    if (error_) {
      std::exception_ptr e = error_;
      error_ = nullptr;
      std::rethrow_exception(e);
    }
  }

 private:
  void lane_loop(std::size_t lane) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(std::size_t)>* fn = nullptr;
      std::size_t count = 0;
      {
        std::unique_lock<std::mutex> lock(mu_);
        cv_work_.wait(lock, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        fn = fn_;
        count = count_;
      }
      try {
        for (std::size_t i = lane; i < count; i += lanes_) (*fn)(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu_);
        if (!error_) error_ = std::current_exception();
      }
      {
        std::lock_guard<std::mutex> lock(mu_);
        if (--pending_ == 0) cv_done_.notify_all();
      }
    }
  }

  std::size_t lanes_;
  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_work_;
  std::condition_variable cv_done_;
  const std::function<void(std::size_t)>* fn_ = nullptr;
  std::size_t count_ = 0;
  std::size_t pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

namespace detail {

// Ascending-worker-id reduction of models into their coordinate-wise mean.
template <class Mode>
void average_models(const Mode& num,
                    const std::vector<LinearModel<typename Mode::scalar>>& models,
                    LinearModel<typename Mode::scalar>& out) {
  const std::size_t workers = models.size();
  const std::size_t d = models[0].dim();
  if constexpr (Mode::is_fixed) {
    for (std::size_t j = 0; j < d; ++j) {
      std::int64_t acc = 0;
      for (std::size_t k = 0; k < workers; ++k) acc += models[k].weights[j].raw;
      out.weights[j] = fx32{saturate_i64(
          div_round_nearest_even(acc, static_cast<std::int64_t>(workers)),
          num.overflow())};
    }
    std::int64_t acc = 0;
    for (std::size_t k = 0; k < workers; ++k) acc += models[k].bias.raw;
    out.bias = fx32{saturate_i64(
        div_round_nearest_even(acc, static_cast<std::int64_t>(workers)),
        num.overflow())};
  } else {
    for (std::size_t j = 0; j < d; ++j) {
      long double acc = 0.0L;
      for (std::size_t k = 0; k < workers; ++k) acc += models[k].weights[j];
      out.weights[j] = static_cast<double>(acc / static_cast<long double>(workers));
    }
    long double acc = 0.0L;
    for (std::size_t k = 0; k < workers; ++k) acc += models[k].bias;
    out.bias = static_cast<double>(acc / static_cast<long double>(workers));
  }
}

template <class Mode>
void average_gradients(const Mode& num,
                       const std::vector<Gradient<typename Mode::scalar>>& grads,
                       Gradient<typename Mode::scalar>& out) {
  const std::size_t workers = grads.size();
  const std::size_t d = grads[0].weights.size();
  out.weights.resize(d);
  if constexpr (Mode::is_fixed) {
    for (std::size_t j = 0; j < d; ++j) {
      std::int64_t acc = 0;
      for (std::size_t k = 0; k < workers; ++k) acc += grads[k].weights[j].raw;
      out.weights[j] = fx32{saturate_i64(
          div_round_nearest_even(acc, static_cast<std::int64_t>(workers)),
          num.overflow())};
    }
    std::int64_t acc = 0;
    for (std::size_t k = 0; k < workers; ++k) acc += grads[k].bias.raw;
    out.bias = fx32{saturate_i64(
        div_round_nearest_even(acc, static_cast<std::int64_t>(workers)),
        num.overflow())};
  } else {
    for (std::size_t j = 0; j < d; ++j) {
      long double acc = 0.0L;
      for (std::size_t k = 0; k < workers; ++k) acc += grads[k].weights[j];
      out.weights[j] = static_cast<double>(acc / static_cast<long double>(workers));
    }
    long double acc = 0.0L;
    for (std::size_t k = 0; k < workers; ++k) acc += grads[k].bias;
    out.bias = static_cast<double>(acc / static_cast<long double>(workers));
  }
}

template <class Mode>
LinearModel<double> decode_model(const Mode& num,
                                 const LinearModel<typename Mode::scalar>& m) {
  LinearModel<double> out = LinearModel<double>::zeros(m.dim());
  for (std::size_t j = 0; j < m.dim(); ++j) out.weights[j] = num.to_real(m.weights[j]);
  out.bias = num.to_real(m.bias);
  return out;
}

// Shared run scaffolding: shuffled training copy, per-worker slots, ledger
// bookkeeping, and epoch snapshots.
template <class Mode>
class Engine {
 public:
  using S = typename Mode::scalar;

  Engine(Mode num, const Dataset<S>& train, const Dataset<S>& test,
         const ClusterConfig& cfg)
      : num_(num),
        test_(test),
        cfg_(cfg),
        train_(pssim::shuffle(train, cfg.master_seed)),
        overflow_start_(num.overflow_count()) {
    validate(cfg_.sgd);
    validate(cfg_.reg);
    if (train_.size() == 0) throw ConfigError("training set is empty");
    if (test_.size() == 0) throw ConfigError("test set is empty");
    if (train_.dim != test_.dim) {
      throw DimensionError("train/test dimension mismatch");
    }
    report_.ledger.payload_bytes = model_payload_bytes(train_.dim);
    per_up_ = static_cast<std::uint64_t>(std::llround(
        cfg_.payload_mult_up * static_cast<double>(report_.ledger.payload_bytes)));
    per_down_ = static_cast<std::uint64_t>(std::llround(
        cfg_.payload_mult_down * static_cast<double>(report_.ledger.payload_bytes)));
    if (cfg_.exec_lanes > 1) {
      pool_ = std::make_unique<WorkerPool>(cfg_.exec_lanes);
    }
  }

  struct WorkerSlot {
    LinearModel<S> model;
    GradWorkspace<Mode> workspace;
    Gradient<S> gradient;
    std::uint64_t local_bytes = 0;
    std::uint64_t grad_evals = 0;
  };

  const Dataset<S>& train() const { return train_; }
  const ClusterConfig& config() const { return cfg_; }
  Mode& num() { return num_; }
  std::vector<WorkerSlot>& slots() { return slots_; }

  void init_slots(std::size_t count) {
    slots_.resize(count);
    for (auto& slot : slots_) slot.model = LinearModel<S>::zeros(train_.dim);
    // One-time distribution of the initial model to every worker.
    report_.ledger.bootstrap_bytes_down +=
        report_.ledger.payload_bytes * static_cast<std::uint64_t>(count);
  }

  void parallel(std::size_t count, const std::function<void(std::size_t)>& fn) {
    if (pool_ != nullptr && count > 1) {
      pool_->run(count, fn);
    } else {
      for (std::size_t i = 0; i < count; ++i) fn(i);
    }
  }

  void record_sync(std::size_t workers) {
    report_.ledger.server_bytes_up += per_up_ * workers;
    report_.ledger.server_bytes_down += per_down_ * workers;
    report_.ledger.sync_events += 1;
  }

  // Worker-local stream model: the batch's samples plus one model read and
  // one model write.
  void count_batch(WorkerSlot& slot, IndexRange batch) {
    slot.local_bytes +=
        train_.sample_bytes(batch) + 2 * report_.ledger.payload_bytes;
    slot.grad_evals += batch.size();
  }

  void snapshot_epoch(const LinearModel<S>& global) {
    // Fold per-worker counters into the cumulative ledger (ascending id).
    std::uint64_t local = 0, evals = 0;
    for (const auto& slot : slots_) {
      local += slot.local_bytes;
      evals += slot.grad_evals;
    }
    report_.ledger.local_bytes = local;
    report_.grad_evals = evals;

    EpochStats stats;
    const LinearModel<double> decoded = decode_model(num_, global);
    stats.weights = decoded.weights;
    stats.bias = decoded.bias;
    stats.train_loss = loss_value(num_, global, train_,
                                  IndexRange{0, train_.size()}, cfg_.loss, cfg_.reg);
    const EvalResult eval =
        evaluate_model(num_, global, test_, cfg_.loss, cfg_.reg);
    stats.accuracy = eval.accuracy;
    stats.auc = eval.auc;
    stats.ledger = report_.ledger.snapshot();
    report_.epochs.push_back(std::move(stats));
  }

  TrainReport finish(const LinearModel<S>& global, std::size_t workers,
                     std::size_t dropped,
                     std::chrono::steady_clock::time_point started) {
    // One-time collection of the final model from every worker.
    report_.ledger.bootstrap_bytes_up +=
        report_.ledger.payload_bytes * static_cast<std::uint64_t>(workers);
    const LinearModel<double> decoded = decode_model(num_, global);
    report_.final_weights = decoded.weights;
    report_.final_bias = decoded.bias;
    report_.dropped_samples = dropped;
    report_.overflow_count = num_.overflow_count() - overflow_start_;
    report_.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
            .count();
    return std::move(report_);
  }

 private:
  Mode num_;
  const Dataset<S>& test_;
  ClusterConfig cfg_;
  Dataset<S> train_;
  std::uint64_t overflow_start_ = 0;
  std::uint64_t per_up_ = 0;
  std::uint64_t per_down_ = 0;
  TrainReport report_;
  std::vector<WorkerSlot> slots_;
  std::unique_ptr<WorkerPool> pool_;
};

}  // namespace detail

// Sequential mini-batch SGD over the shuffled data; the reference
// trajectory for the distributed equivalence checks. Worker count and sync
// period are ignored.
template <class Mode>
TrainReport run_serial_sgd(Mode num, const Dataset<typename Mode::scalar>& train,
                           const Dataset<typename Mode::scalar>& test,
                           const ClusterConfig& cfg) {
  const auto started = std::chrono::steady_clock::now();
  detail::Engine<Mode> engine(num, train, test, cfg);
  const std::size_t n = engine.train().size();
  const std::size_t b = cfg.sgd.batch_size;
  const std::size_t num_batches = n / b;
  if (num_batches == 0) {
    throw ConfigError("run_serial_sgd: batch size exceeds the sample count");
  }
  engine.init_slots(1);
  auto& slot = engine.slots()[0];
  const auto eta = engine.num().from_real(cfg.sgd.learning_rate);
  for (std::size_t epoch = 0; epoch < cfg.sgd.epochs; ++epoch) {
    for (std::size_t t = 0; t < num_batches; ++t) {
      const IndexRange batch{t * b, (t + 1) * b};
      detail::loss_gradient(engine.num(), slot.model, engine.train(), batch,
                            cfg.loss, cfg.reg, slot.workspace, slot.gradient);
      sgd_step(engine.num(), slot.model, slot.gradient, eta);
      engine.count_batch(slot, batch);
    }
    engine.snapshot_epoch(slot.model);
  }
  return engine.finish(slot.model, 1, n - num_batches * b, started);
}

// MA-SGD: each worker runs sync_period local mini-batches, then the server
// averages the N local models coordinate-wise and broadcasts the result.
// One epoch ends when every worker has consumed its partition once.
template <class Mode>
TrainReport run_ma_sgd(Mode num, const Dataset<typename Mode::scalar>& train,
                       const Dataset<typename Mode::scalar>& test,
                       const ClusterConfig& cfg) {
  const auto started = std::chrono::steady_clock::now();
  if (cfg.sync_period < 1) {
    throw ConfigError("run_ma_sgd: sync period must be >= 1");
  }
  detail::Engine<Mode> engine(num, train, test, cfg);
  const std::size_t workers = cfg.num_workers;
  const PartitionPlan plan = partition_contiguous(engine.train(), workers);
  const std::size_t b = cfg.sgd.batch_size;
  const std::size_t batches_per_worker = plan.per_worker / b;
  if (batches_per_worker == 0) {
    throw ConfigError("run_ma_sgd: partition holds no full batch");
  }
  const std::size_t period =
      cfg.sync_period == kOneShot ? batches_per_worker : cfg.sync_period;
  engine.init_slots(workers);
  auto global = LinearModel<typename Mode::scalar>::zeros(engine.train().dim);
  const auto eta = engine.num().from_real(cfg.sgd.learning_rate);
  std::vector<LinearModel<typename Mode::scalar>> local_models(workers);

  const std::size_t dropped =
      plan.dropped + workers * (plan.per_worker - batches_per_worker * b);

  for (std::size_t epoch = 0; epoch < cfg.sgd.epochs; ++epoch) {
    std::size_t cursor = 0;
    while (cursor < batches_per_worker) {
      const std::size_t take = std::min(period, batches_per_worker - cursor);
      engine.parallel(workers, [&](std::size_t k) {
        auto& slot = engine.slots()[k];
        const IndexRange part = plan.worker_range(k);
        for (std::size_t t = cursor; t < cursor + take; ++t) {
          const IndexRange batch{part.begin + t * b, part.begin + (t + 1) * b};
          detail::loss_gradient(engine.num(), slot.model, engine.train(), batch,
                                cfg.loss, cfg.reg, slot.workspace, slot.gradient);
          sgd_step(engine.num(), slot.model, slot.gradient, eta);
          engine.count_batch(slot, batch);
        }
      });
      for (std::size_t k = 0; k < workers; ++k) {
        local_models[k] = engine.slots()[k].model;
      }
      detail::average_models(engine.num(), local_models, global);
      engine.record_sync(workers);
      for (std::size_t k = 0; k < workers; ++k) engine.slots()[k].model = global;
      cursor += take;
    }
    engine.snapshot_epoch(global);
  }
  return engine.finish(global, workers, dropped, started);
}

// GA-SGD: per global batch, every worker computes the gradient of its
// b/N-sample shard; the server averages the gradients in ascending worker
// order, applies one step to the single global model, and broadcasts it.
template <class Mode>
TrainReport run_ga_sgd(Mode num, const Dataset<typename Mode::scalar>& train,
                       const Dataset<typename Mode::scalar>& test,
                       const ClusterConfig& cfg) {
  const auto started = std::chrono::steady_clock::now();
  detail::Engine<Mode> engine(num, train, test, cfg);
  const std::size_t workers = cfg.num_workers;
  const std::size_t b = cfg.sgd.batch_size;
  const PartitionPlan plan = partition_batch_shards(engine.train(), workers, b);
  engine.init_slots(workers);
  auto global = LinearModel<typename Mode::scalar>::zeros(engine.train().dim);
  const auto eta = engine.num().from_real(cfg.sgd.learning_rate);
  std::vector<Gradient<typename Mode::scalar>> shard_grads(workers);
  Gradient<typename Mode::scalar> mean_grad;

  for (std::size_t epoch = 0; epoch < cfg.sgd.epochs; ++epoch) {
    for (std::size_t j = 0; j < plan.num_batches; ++j) {
      engine.parallel(workers, [&](std::size_t k) {
        auto& slot = engine.slots()[k];
        const IndexRange shard = plan.shard_range(j, k);
        detail::loss_gradient(engine.num(), global, engine.train(), shard,
                              cfg.loss, cfg.reg, slot.workspace, shard_grads[k]);
        engine.count_batch(slot, shard);
      });
      detail::average_gradients(engine.num(), shard_grads, mean_grad);
      sgd_step(engine.num(), global, mean_grad, eta);
      engine.record_sync(workers);
    }
    engine.snapshot_epoch(global);
  }
  return engine.finish(global, workers, plan.dropped, started);
}

// Consensus ADMM. Per epoch each worker makes admm_local_passes proximal
// SGD passes over its whole partition, the server averages the received
// local models, forms z with the regularizer's closed-form prox, and
// broadcasts it; workers then update their duals locally. Duals never cross
// the wire: the server reconstructs the dual mean from its broadcast history
// via u_bar' = u_bar + x_bar - z.
template <class Mode>
TrainReport run_admm(Mode num, const Dataset<typename Mode::scalar>& train,
                     const Dataset<typename Mode::scalar>& test,
                     const ClusterConfig& cfg) {
  using S = typename Mode::scalar;
  const auto started = std::chrono::steady_clock::now();
  if (!(cfg.rho > 0.0)) {
    throw ConfigError("run_admm: rho must be positive");
  }
  if (cfg.admm_local_passes < 1) {
    throw ConfigError("run_admm: local pass count must be >= 1");
  }
  detail::Engine<Mode> engine(num, train, test, cfg);
  const std::size_t workers = cfg.num_workers;
  const PartitionPlan plan = partition_contiguous(engine.train(), workers);
  const std::size_t b = cfg.sgd.batch_size;
  const std::size_t batches_per_worker = plan.per_worker / b;
  if (batches_per_worker == 0) {
    throw ConfigError("run_admm: partition holds no full batch");
  }
  engine.init_slots(workers);
  const std::size_t d = engine.train().dim;

  AdmmState<S> state;
  state.rho = cfg.rho;
  state.z = LinearModel<S>::zeros(d);
  state.duals.assign(workers, LinearModel<S>::zeros(d));
  LinearModel<double> server_dual_mean = LinearModel<double>::zeros(d);

  const auto eta = engine.num().from_real(cfg.sgd.learning_rate);
  const auto rho_enc = engine.num().from_real(cfg.rho);
  // The local subproblem carries only the loss and the proximal coupling;
  // the regularizer is applied exactly in the z-update.
  const RegSpec no_reg;
  std::vector<LinearModel<S>> local_models(workers);
  LinearModel<S> x_mean = LinearModel<S>::zeros(d);

  const std::size_t dropped =
      plan.dropped + workers * (plan.per_worker - batches_per_worker * b);

  for (std::size_t epoch = 0; epoch < cfg.sgd.epochs; ++epoch) {
    engine.parallel(workers, [&](std::size_t k) {
      auto& slot = engine.slots()[k];
      const IndexRange part = plan.worker_range(k);
      ProxTerm<Mode> prox{&state.z, &state.duals[k], rho_enc};
      for (std::size_t pass = 0; pass < cfg.admm_local_passes; ++pass) {
        for (std::size_t t = 0; t < batches_per_worker; ++t) {
          const IndexRange batch{part.begin + t * b, part.begin + (t + 1) * b};
          detail::loss_gradient(engine.num(), slot.model, engine.train(), batch,
                                cfg.loss, no_reg, slot.workspace, slot.gradient);
          add_prox_term(engine.num(), slot.model, prox, slot.gradient);
          sgd_step(engine.num(), slot.model, slot.gradient, eta);
          engine.count_batch(slot, batch);
        }
      }
    });
    // Server: average local models, form z, update its dual-mean mirror.
    for (std::size_t k = 0; k < workers; ++k) {
      local_models[k] = engine.slots()[k].model;
    }
    detail::average_models(engine.num(), local_models, x_mean);
    const LinearModel<double> x_bar = detail::decode_model(engine.num(), x_mean);
    LinearModel<double> z_real;
    if (cfg.reg.kind == RegKind::kL1) {
      z_real = admm_z_update_l1(x_bar, server_dual_mean, cfg.reg.lambda, cfg.rho,
                                workers);
    } else {
      const double lambda = cfg.reg.kind == RegKind::kL2 ? cfg.reg.lambda : 0.0;
      z_real = admm_z_update_l2(x_bar, server_dual_mean, lambda, cfg.rho, workers);
    }
    for (std::size_t j = 0; j < d; ++j) {
      state.z.weights[j] = engine.num().from_real(z_real.weights[j]);
    }
    state.z.bias = engine.num().from_real(z_real.bias);
    // Mirror update uses the broadcast (possibly re-quantized) z so the
    // server's view matches what the workers integrate into their duals.
    const LinearModel<double> z_seen = detail::decode_model(engine.num(), state.z);
    for (std::size_t j = 0; j < d; ++j) {
      server_dual_mean.weights[j] += x_bar.weights[j] - z_seen.weights[j];
    }
    server_dual_mean.bias += x_bar.bias - z_seen.bias;
    engine.record_sync(workers);
    // Workers: scaled-dual update, local arithmetic, no transfers.
    engine.parallel(workers, [&](std::size_t k) {
      admm_u_update(engine.num(), state.duals[k], engine.slots()[k].model, state.z);
    });
    engine.snapshot_epoch(state.z);
  }
  return engine.finish(state.z, workers, dropped, started);
}

template <class Mode>
TrainReport run_training(Mode num, const Dataset<typename Mode::scalar>& train,
                         const Dataset<typename Mode::scalar>& test,
                         const ClusterConfig& cfg) {
  switch (cfg.algorithm) {
    case Algorithm::kSerial:
      return run_serial_sgd(num, train, test, cfg);
    case Algorithm::kMaSgd:
      return run_ma_sgd(num, train, test, cfg);
    case Algorithm::kGaSgd:
      return run_ga_sgd(num, train, test, cfg);
    case Algorithm::kAdmm:
      return run_admm(num, train, test, cfg);
  }
  throw ConfigError("unknown algorithm");
}

}  // namespace pssim
