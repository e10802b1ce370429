// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pmd/model/bi_encoder.hpp"
#include "pmd/simd/kernels.hpp"

namespace pmd::train {

struct AdamwConfig {
  double peak_lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  std::size_t total_steps = 1;

  /// Throws ConfigError on non-positive lr/total_steps or betas outside [0, 1).
  void validate() const;
};

/// peak * (1 - step / total), clamped at 0. step counts completed updates.
double linear_decay_lr(double peak, std::size_t step, std::size_t total);

/// Optimizer state for one model: moment buffers shaped like the parameters.
template <class Model>
struct TrainState {
  std::size_t step = 0;
  double lr = 0.0;
  Model m;
  Model v;
};

template <class T>
TrainState<model::BiEncoder<T>> make_train_state(const model::BiEncoder<T>& params) {
  TrainState<model::BiEncoder<T>> s;
  s.m = model::BiEncoder<T>::zeros(params.config());
  s.v = model::BiEncoder<T>::zeros(params.config());
  return s;
}

namespace detail {
template <class Model, class Tensor>
std::vector<std::pair<std::string, Tensor*>> flatten(Model& m) {
  std::vector<std::pair<std::string, Tensor*>> out;
  m.visit([&](const std::string& name, Tensor& t) { out.emplace_back(name, &t); });
  return out;
}
void check_gradient(const std::string& name, const float* g, std::size_t n);
void check_gradient(const std::string& name, const double* g, std::size_t n);
void shape_mismatch(const std::string& name);
}  // namespace detail

/// One AdamW update at the scheduled learning rate. Throws NumericError
/// naming the first parameter whose gradient is non-finite; parameters and
/// state are left untouched in that case.
template <class T>
void optimizer_step(TrainState<model::BiEncoder<T>>& state, model::BiEncoder<T>& params,
                    const model::BiEncoder<T>& grads, const AdamwConfig& cfg) {
  auto p = detail::flatten<model::BiEncoder<T>, Tensor<T>>(params);
  auto g = detail::flatten<const model::BiEncoder<T>, const Tensor<T>>(grads);
  auto m = detail::flatten<model::BiEncoder<T>, Tensor<T>>(state.m);
  auto v = detail::flatten<model::BiEncoder<T>, Tensor<T>>(state.v);
  if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size())
    detail::shape_mismatch("model");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (g[i].second->shape() != p[i].second->shape() || m[i].second->shape() != p[i].second->shape() ||
        v[i].second->shape() != p[i].second->shape())
      detail::shape_mismatch(p[i].first);
    detail::check_gradient(p[i].first, g[i].second->data(), g[i].second->size());
  }
  state.lr = linear_decay_lr(cfg.peak_lr, state.step, cfg.total_steps);
  ++state.step;
  const simd::AdamwStep step{state.lr,
                             cfg.beta1,
                             cfg.beta2,
                             cfg.eps,
                             cfg.weight_decay,
                             1.0 - std::pow(cfg.beta1, double(state.step)),
                             1.0 - std::pow(cfg.beta2, double(state.step))};
  for (std::size_t i = 0; i < p.size(); ++i)
    simd::adamw_update(step, p[i].second->data(), g[i].second->data(), m[i].second->data(),
                       v[i].second->data(), p[i].second->size());
}

}  // namespace pmd::train
