#pragma once

#include "searchreg/ops.hpp"
#include "searchreg/rng.hpp"
#include "searchreg/tensor.hpp"

namespace sreg {

// Convolutional gated recurrent cell, 3x3 kernels. Gate weights are split
// into the input-side and hidden-side kernels with one bias per gate:
//   r = sigmoid(conv(x; wxr) + conv(h; whr) + br)
//   z = sigmoid(conv(x; wxz) + conv(h; whz) + bz)
//   c = tanh(conv(x; wxh) + conv(r .* h; whh) + bh)
//   h' = (1 - z) .* h + z .* c
template <typename T>
struct GruParams {
  Tensor<T> wxr, whr, br;
  Tensor<T> wxz, whz, bz;
  Tensor<T> wxh, whh, bh;
  int input_channels() const { return wxr.dim(1); }
  int hidden_channels() const { return wxr.dim(0); }
};

template <typename T>
GruParams<T> make_gru_params(Rng& rng, int input_channels, int hidden_channels);

template <typename T>
Tensor<T> gru_cell(const Tensor<T>& x, const Tensor<T>& h_prev,
                   const GruParams<T>& params);

// Two 3x3 conv layers mapping the hidden state to a 2-channel field update
// (x-displacement then y-displacement).
template <typename T>
struct FlowHeadParams {
  Tensor<T> w1, b1;  // hidden -> mid
  Tensor<T> w2, b2;  // mid -> 2
};

template <typename T>
FlowHeadParams<T> make_flow_head_params(Rng& rng, int hidden_channels,
                                        int mid_channels = 32);

template <typename T>
Tensor<T> flow_head(const Tensor<T>& hidden, const FlowHeadParams<T>& params);

}  // namespace sreg
