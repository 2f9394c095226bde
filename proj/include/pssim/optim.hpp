#pragma once

// Per-worker mini-batch SGD and the consensus-ADMM updates. The z-updates
// run on the parameter server, which is a full CPU in the modeled system,
// so they compute in double; x- and u-updates run on workers in the run's
// numeric mode.

#include <cmath>
#include <cstdint>
#include <type_traits>
#include <vector>

#include "pssim/data.hpp"
#include "pssim/errors.hpp"
#include "pssim/model.hpp"

namespace pssim {

struct SgdConfig {
  double learning_rate = 0.1;
  std::size_t batch_size = 1;
  std::size_t epochs = 1;
};

inline void validate(const SgdConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) {
    throw ConfigError("learning rate must be positive");
  }
  if (cfg.batch_size < 1) {
    throw ConfigError("batch size must be at least 1");
  }
}

// w <- w - eta * grad_w, b <- b - eta * grad_b. Fixed mode uses the
// saturating multiply/subtract.
template <class Mode>
void sgd_step(const Mode& num, LinearModel<typename Mode::scalar>& m,
              const Gradient<typename Mode::scalar>& grad,
              typename Mode::scalar eta) {
  for (std::size_t j = 0; j < m.weights.size(); ++j) {
    m.weights[j] = num.sub(m.weights[j], num.mul(eta, grad.weights[j]));
  }
  m.bias = num.sub(m.bias, num.mul(eta, grad.bias));
}

// Proximal coupling toward the consensus model: adds rho * (m - z + u) to a
// batch gradient.
template <class Mode>
struct ProxTerm {
  const LinearModel<typename Mode::scalar>* z = nullptr;
  const LinearModel<typename Mode::scalar>* u = nullptr;
  typename Mode::scalar rho{};
};

template <class Mode>
void add_prox_term(const Mode& num, const LinearModel<typename Mode::scalar>& m,
                   const ProxTerm<Mode>& prox,
                   Gradient<typename Mode::scalar>& grad) {
  for (std::size_t j = 0; j < m.weights.size(); ++j) {
    const auto drift = num.add(num.sub(m.weights[j], prox.z->weights[j]),
                               prox.u->weights[j]);
    grad.weights[j] = num.add(grad.weights[j], num.mul(prox.rho, drift));
  }
  const auto drift = num.add(num.sub(m.bias, prox.z->bias), prox.u->bias);
  grad.bias = num.add(grad.bias, num.mul(prox.rho, drift));
}

// One sequential pass over the partition's full mini-batches, one sgd_step
// per batch. With a prox term this is the ADMM x-update (the loss gradient
// then carries no regularizer; the z-update owns it).
template <class Mode>
void local_sgd_pass(const Mode& num, LinearModel<typename Mode::scalar>& m,
                    const Dataset<typename Mode::scalar>& ds, IndexRange partition,
                    std::size_t batch_size, typename Mode::scalar eta,
                    LossKind loss, const RegSpec& reg,
                    const std::type_identity_t<ProxTerm<Mode>>* prox,
                    GradWorkspace<Mode>& ws,
                    Gradient<typename Mode::scalar>& grad) {
  if (partition.size() == 0) {
    throw ConfigError("local_sgd_pass: empty partition");
  }
  const std::size_t num_batches = partition.size() / batch_size;
  if (num_batches == 0) {
    throw ConfigError("local_sgd_pass: partition holds no full batch");
  }
  for (std::size_t t = 0; t < num_batches; ++t) {
    const IndexRange batch{partition.begin + t * batch_size,
                           partition.begin + (t + 1) * batch_size};
    detail::loss_gradient(num, m, ds, batch, loss, reg, ws, grad);
    if (prox != nullptr) add_prox_term(num, m, *prox, grad);
    sgd_step(num, m, grad, eta);
  }
}

template <class Mode>
void local_sgd_pass(const Mode& num, LinearModel<typename Mode::scalar>& m,
                    const Dataset<typename Mode::scalar>& ds, IndexRange partition,
                    std::size_t batch_size, typename Mode::scalar eta,
                    LossKind loss, const RegSpec& reg,
                    const std::type_identity_t<ProxTerm<Mode>>* prox = nullptr) {
  GradWorkspace<Mode> ws;
  Gradient<typename Mode::scalar> grad;
  local_sgd_pass(num, m, ds, partition, batch_size, eta, loss, reg, prox, ws, grad);
}

// Global consensus state: z is broadcast, each worker keeps its own dual.
template <typename T>
struct AdmmState {
  LinearModel<T> z;
  std::vector<LinearModel<T>> duals;
  double rho = 1.0;
};

inline double soft_threshold(double v, double kappa) {
  if (v > kappa) return v - kappa;
  if (v < -kappa) return v + kappa;
  return 0.0;
}

// z-update for L2: z = (N rho / (lambda + N rho)) * (x_bar + u_bar)
// elementwise; the bias is unregularized and passes through as the plain
// average.
inline LinearModel<double> admm_z_update_l2(const LinearModel<double>& x_bar,
                                            const LinearModel<double>& u_bar,
                                            double lambda, double rho,
                                            std::size_t num_workers) {
  if (!(rho > 0.0) || num_workers < 1) {
    throw ConfigError("admm_z_update_l2: requires rho > 0 and N >= 1");
  }
  const double n_rho = static_cast<double>(num_workers) * rho;
  const double shrink = n_rho / (lambda + n_rho);
  LinearModel<double> z = LinearModel<double>::zeros(x_bar.dim());
  for (std::size_t j = 0; j < z.dim(); ++j) {
    z.weights[j] = shrink * (x_bar.weights[j] + u_bar.weights[j]);
  }
  z.bias = x_bar.bias + u_bar.bias;
  return z;
}

// z-update for L1: elementwise soft threshold at kappa = lambda / (N rho).
inline LinearModel<double> admm_z_update_l1(const LinearModel<double>& x_bar,
                                            const LinearModel<double>& u_bar,
                                            double lambda, double rho,
                                            std::size_t num_workers) {
  if (!(rho > 0.0) || num_workers < 1) {
    throw ConfigError("admm_z_update_l1: requires rho > 0 and N >= 1");
  }
  const double kappa = lambda / (static_cast<double>(num_workers) * rho);
  LinearModel<double> z = LinearModel<double>::zeros(x_bar.dim());
  for (std::size_t j = 0; j < z.dim(); ++j) {
    z.weights[j] = soft_threshold(x_bar.weights[j] + u_bar.weights[j], kappa);
  }
  z.bias = x_bar.bias + u_bar.bias;
  return z;
}

// Scaled-dual update u <- u + x - z, in the worker's numeric mode.
template <class Mode>
void admm_u_update(const Mode& num, LinearModel<typename Mode::scalar>& u,
                   const LinearModel<typename Mode::scalar>& x,
                   const LinearModel<typename Mode::scalar>& z) {
  if (u.dim() != x.dim() || x.dim() != z.dim()) {
    throw DimensionError("admm_u_update: shape mismatch");
  }
  for (std::size_t j = 0; j < u.weights.size(); ++j) {
    u.weights[j] = num.add(u.weights[j], num.sub(x.weights[j], z.weights[j]));
  }
  u.bias = num.add(u.bias, num.sub(x.bias, z.bias));
}

}  // namespace pssim
