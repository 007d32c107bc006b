#include "searchreg/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace sreg {

template <typename T>
void adam_step(AdamState<T>& state, std::vector<Tensor<T>>& params) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(std::size_t(params[i].numel()), T(0));
      state.v[i].assign(std::size_t(params[i].numel()), T(0));
    }
  }
  if (state.m.size() != params.size())
    throw std::invalid_argument("adam_step: parameter count changed");

  for (std::size_t i = 0; i < params.size(); ++i)
    if (!params[i].grad_allocated())
      throw std::invalid_argument("adam_step: parameter " + std::to_string(i) +
                                  " has no gradient");

  state.step += 1;
  const T bc1 = T(1) - std::pow(state.beta1, T(state.step));
  const T bc2 = T(1) - std::pow(state.beta2, T(state.step));

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].values_mut();
    auto grad = params[i].grad_mut();
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != values.size())
      throw std::invalid_argument("adam_step: moment buffer shape mismatch");
    for (std::size_t j = 0; j < values.size(); ++j) {
      const T g = grad[j];
      m[j] = state.beta1 * m[j] + (T(1) - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (T(1) - state.beta2) * g * g;
      const T mhat = m[j] / bc1;
      const T vhat = v[j] / bc2;
      values[j] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.eps);
      grad[j] = T(0);
    }
  }
}

template void adam_step<float>(AdamState<float>&, std::vector<Tensor<float>>&);
template void adam_step<double>(AdamState<double>&, std::vector<Tensor<double>>&);

}  // namespace sreg
