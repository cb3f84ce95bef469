#include "medsr/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace medsr {

template <typename T>
void adam_step(BasicTensor<T>& params, const BasicTensor<T>& grads, AdamState<T>& state) {
  require_same_shape(params.shape(), grads.shape(), "adam_step grads");
  require_same_shape(params.shape(), state.first_moment.shape(), "adam_step first moment");
  require_same_shape(params.shape(), state.second_moment.shape(), "adam_step second moment");
  if (!(state.learning_rate > 0.0)) throw std::invalid_argument("adam_step: learning rate must be positive");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw std::invalid_argument("adam_step: non-finite gradient at element " + std::to_string(i));
    }
  }

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    T& m = state.first_moment[i];
    T& v = state.second_moment[i];
    m = b1 * m + (T{1} - b1) * g;
    v = b2 * v + (T{1} - b2) * g * g;
    const double m_hat = static_cast<double>(m) / correction1;
    const double v_hat = static_cast<double>(v) / correction2;
    params[i] -= static_cast<T>(state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon));
  }
}

template void adam_step(BasicTensor<float>&, const BasicTensor<float>&, AdamState<float>&);
template void adam_step(BasicTensor<double>&, const BasicTensor<double>&, AdamState<double>&);

}  // namespace medsr
