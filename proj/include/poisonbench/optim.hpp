#pragma once

#include <span>

#include "poisonbench/layers.hpp"

namespace pb {

// Heavy-ball SGD with coupled L2 weight decay:
//   buffer <- momentum * buffer + grad + weight_decay * value
//   value  <- value - lr * buffer
template <typename T>
void sgd_step(std::span<Parameter<T>* const> params, T lr, T momentum, T weight_decay) {
  for (Parameter<T>* p : params) {
    T* v = p->value.ptr();
    T* b = p->momentum_buffer.ptr();
    const T* g = p->gradient.ptr();
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      b[i] = momentum * b[i] + g[i] + weight_decay * v[i];
      v[i] -= lr * b[i];
    }
  }
}

template <typename T>
void sgd_step(const std::vector<Parameter<T>*>& params, T lr, T momentum, T weight_decay) {
  sgd_step(std::span<Parameter<T>* const>(params), lr, momentum, weight_decay);
}

}  // namespace pb
