#pragma once

#include <cstdint>

#include "medsr/tensor.hpp"

namespace medsr {

/// Moment estimates for one parameter tensor.
template <typename T>
struct AdamState {
  BasicTensor<T> first_moment;
  BasicTensor<T> second_moment;
  std::uint64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 1e-3;

  AdamState() = default;
  explicit AdamState(const Shape& param_shape, double lr = 1e-3)
      : first_moment(param_shape), second_moment(param_shape), learning_rate(lr) {}
};

/// One bias-corrected Adam update of params in place. Rejects non-finite
/// gradients before touching any state.
template <typename T>
void adam_step(BasicTensor<T>& params, const BasicTensor<T>& grads, AdamState<T>& state);

}  // namespace medsr
