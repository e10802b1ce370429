// SPDX-License-Identifier: Apache-2.0
#include "pmd/train/adamw.hpp"

#include <cmath>

#include "pmd/error.hpp"

namespace pmd::train {

void AdamwConfig::validate() const {
  if (!(peak_lr > 0.0) || !std::isfinite(peak_lr)) throw ConfigError("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("AdamW betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("AdamW eps must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  if (total_steps == 0) throw ConfigError("total_steps must be positive");
}

double linear_decay_lr(double peak, std::size_t step, std::size_t total) {
  if (total == 0 || step >= total) return 0.0;
  return peak * (1.0 - double(step) / double(total));
}

namespace detail {

template <class T>
void check_impl(const std::string& name, const T* g, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(g[i]))
      throw NumericError("non-finite gradient in parameter '" + name + "' at index " + std::to_string(i));
}

void check_gradient(const std::string& name, const float* g, std::size_t n) { check_impl(name, g, n); }
void check_gradient(const std::string& name, const double* g, std::size_t n) { check_impl(name, g, n); }
void shape_mismatch(const std::string& name) {
  throw ConfigError("optimizer: shape mismatch for '" + name + "'");
}

}  // namespace detail
}  // namespace pmd::train
