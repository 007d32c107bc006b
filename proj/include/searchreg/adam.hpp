#pragma once

#include <cstdint>
#include <vector>

#include "searchreg/tensor.hpp"

namespace sreg {

// Adaptive-moment optimizer state. Moment buffers are indexed by parameter
// order, so the parameter list must be stable across steps.
template <typename T>
struct AdamState {
  T learning_rate = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  std::int64_t step = 0;
  std::vector<std::vector<T>> m;  // first moments, one buffer per parameter
  std::vector<std::vector<T>> v;  // second moments
};

// One update with bias correction over all parameters, then zeroes their
// gradients. Throws if any parameter has no populated gradient.
template <typename T>
void adam_step(AdamState<T>& state, std::vector<Tensor<T>>& params);

}  // namespace sreg
