#include "searchreg/gru.hpp"

#include "searchreg/encoder.hpp"

namespace sreg {

template <typename T>
GruParams<T> make_gru_params(Rng& rng, int input_channels, int hidden_channels) {
  GruParams<T> p;
  const int fan_x = input_channels * 9;
  const int fan_h = hidden_channels * 9;
  p.wxr = fan_in_uniform<T>(rng, {hidden_channels, input_channels, 3, 3}, fan_x);
  p.whr = fan_in_uniform<T>(rng, {hidden_channels, hidden_channels, 3, 3}, fan_h);
  p.br = Tensor<T>::zeros({hidden_channels}, true);
  p.wxz = fan_in_uniform<T>(rng, {hidden_channels, input_channels, 3, 3}, fan_x);
  p.whz = fan_in_uniform<T>(rng, {hidden_channels, hidden_channels, 3, 3}, fan_h);
  p.bz = Tensor<T>::zeros({hidden_channels}, true);
  p.wxh = fan_in_uniform<T>(rng, {hidden_channels, input_channels, 3, 3}, fan_x);
  p.whh = fan_in_uniform<T>(rng, {hidden_channels, hidden_channels, 3, 3}, fan_h);
  p.bh = Tensor<T>::zeros({hidden_channels}, true);
  return p;
}

template <typename T>
Tensor<T> gru_cell(const Tensor<T>& x, const Tensor<T>& h_prev,
                   const GruParams<T>& params) {
  if (x.rank() != 3 || h_prev.rank() != 3)
    throw std::invalid_argument("gru_cell: inputs must be [C,h,w]");
  if (x.dim(0) != params.input_channels())
    throw std::invalid_argument("gru_cell: input has " +
                                std::to_string(x.dim(0)) + " channels, params expect " +
                                std::to_string(params.input_channels()));
  if (h_prev.dim(0) != params.hidden_channels())
    throw std::invalid_argument("gru_cell: hidden channel mismatch");
  if (x.dim(1) != h_prev.dim(1) || x.dim(2) != h_prev.dim(2))
    throw std::invalid_argument("gru_cell: spatial size mismatch");

  // conv(x; wx) + conv(h; wh) computed as one kernel over the stacked input;
  // both sigmoid gates share one convolution.
  const int hc = params.hidden_channels();
  Tensor<T> xh = concat_channels<T>({x, h_prev});
  Tensor<T> w_rz = concat_dim0<T>({concat_dim1<T>({params.wxr, params.whr}),
                                   concat_dim1<T>({params.wxz, params.whz})});
  Tensor<T> b_rz = concat_dim0<T>({params.br, params.bz});
  Tensor<T> gates = conv2d(xh, w_rz, b_rz, 1, 1);
  Tensor<T> r = sigmoid(slice_channels(gates, 0, hc));
  Tensor<T> z = sigmoid(slice_channels(gates, hc, 2 * hc));

  Tensor<T> gated = concat_channels<T>({x, mul(r, h_prev)});
  Tensor<T> w_h = concat_dim1<T>({params.wxh, params.whh});
  Tensor<T> cand = tanh(conv2d(gated, w_h, params.bh, 1, 1));

  Tensor<T> keep = add_scalar(scale(z, T(-1)), T(1));  // 1 - z
  return add(mul(keep, h_prev), mul(z, cand));
}

template <typename T>
FlowHeadParams<T> make_flow_head_params(Rng& rng, int hidden_channels,
                                        int mid_channels) {
  FlowHeadParams<T> p;
  p.w1 = fan_in_uniform<T>(rng, {mid_channels, hidden_channels, 3, 3},
                           hidden_channels * 9);
  p.b1 = Tensor<T>::zeros({mid_channels}, true);
  p.w2 = fan_in_uniform<T>(rng, {2, mid_channels, 3, 3}, mid_channels * 9);
  p.b2 = Tensor<T>::zeros({2}, true);
  return p;
}

template <typename T>
Tensor<T> flow_head(const Tensor<T>& hidden, const FlowHeadParams<T>& params) {
  Tensor<T> mid = leaky_relu(conv2d(hidden, params.w1, params.b1, 1, 1), T(0.1));
  return conv2d(mid, params.w2, params.b2, 1, 1);
}

#define SREG_INSTANTIATE_GRU(T)                                              \
  template GruParams<T> make_gru_params<T>(Rng&, int, int);                  \
  template Tensor<T> gru_cell<T>(const Tensor<T>&, const Tensor<T>&,         \
                                 const GruParams<T>&);                       \
  template FlowHeadParams<T> make_flow_head_params<T>(Rng&, int, int);       \
  template Tensor<T> flow_head<T>(const Tensor<T>&, const FlowHeadParams<T>&);

SREG_INSTANTIATE_GRU(float)
SREG_INSTANTIATE_GRU(double)

}  // namespace sreg
