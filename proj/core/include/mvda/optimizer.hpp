#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mvda/tape.hpp"

namespace mvda {

template <typename T>
struct AdamConfig {
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

// Adam with bias correction. Moments are kept per parameter element; frozen
// parameters are skipped entirely, so their values and moments never move.
template <typename T>
class Adam {
 public:
  explicit Adam(ParameterStore<T>& params, AdamConfig<T> config = {})
      : params_(&params), config_(config) {
    for (const auto& p : params.items()) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }

  long step_count() const { return t_; }

  void step(T lr) {
    if (lr < T(0)) throw std::invalid_argument("adam: learning rate must be >= 0");
    ++t_;
    const T bc1 = T(1) - static_cast<T>(std::pow(static_cast<double>(config_.beta1), t_));
    const T bc2 = T(1) - static_cast<T>(std::pow(static_cast<double>(config_.beta2), t_));
    const auto& items = params_->items();
    for (std::size_t pi = 0; pi < items.size(); ++pi) {
      Parameter<T>& p = *items[pi];
      if (p.frozen) continue;
      const T* grad = p.grad.data();
      T* value = p.value.mutable_data();
      T* m = m_[pi].mutable_data();
      T* v = v_[pi].mutable_data();
      for (std::size_t i = 0; i < p.size(); ++i) {
        const T gi = grad[i];
        if (!std::isfinite(static_cast<double>(gi)))
          throw std::runtime_error("adam: non-finite gradient in parameter '" + p.name +
                                   "' at element " + std::to_string(i));
        m[i] = config_.beta1 * m[i] + (T(1) - config_.beta1) * gi;
        v[i] = config_.beta2 * v[i] + (T(1) - config_.beta2) * gi * gi;
        const T m_hat = m[i] / bc1;
        const T v_hat = v[i] / bc2;
        value[i] -= lr * m_hat / (std::sqrt(v_hat) + config_.eps);
      }
    }
  }

 private:
  ParameterStore<T>* params_;
  AdamConfig<T> config_;
  std::vector<Tensor<T>> m_, v_;
  long t_ = 0;
};

}  // namespace mvda
