#pragma once

#include <vector>

#include "searchreg/tensor.hpp"

namespace sreg {

// Elementwise (shapes must match exactly; no broadcasting).
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T value);

// Activations and pointwise math.
template <typename T> Tensor<T> leaky_relu(const Tensor<T>& x, T slope = T(0.1));
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> tanh(const Tensor<T>& x);
template <typename T> Tensor<T> sqrt(const Tensor<T>& x);

// Scalar reductions (rank-0 results).
template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);

// Shape plumbing. reshape copies; concat/slice act on the channel axis of
// [C,H,W] tensors; crop2d takes the half-open row/col window of a [H,W]
// tensor.
template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts);
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, int begin, int end);
// Concatenation along dims 0/1 of same-rank tensors (used to fuse gate
// convolutions into single kernels without merging their parameters).
template <typename T>
Tensor<T> concat_dim0(const std::vector<Tensor<T>>& parts);
template <typename T>
Tensor<T> concat_dim1(const std::vector<Tensor<T>>& parts);
template <typename T>
Tensor<T> crop2d(const Tensor<T>& x, int row0, int row1, int col0, int col1);

// conv2d: input [N,C,H,W] or [C,H,W], weight [K,C,kh,kw], optional bias [K].
// Output spatial size (H + 2*padding - kh)/stride + 1. Zero padding.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight,
                 const Tensor<T>& bias, int stride, int padding);
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, int stride,
                 int padding);

// Mean pooling of the trailing two dims by `kernel`, replicate-padding the
// bottom/right edge up to the next multiple. Output ceil(H/k) x ceil(W/k).
template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& input, int kernel);

// Bilinear sampling of input [C,H,W] at coords [2,Ho,Wo]; channel 0 holds x
// (column) and channel 1 holds y (row) in pixel units. Coordinates are
// clamped to [0,W-1] x [0,H-1] before interpolation, and clamped samples
// carry no coordinate gradient.
template <typename T>
Tensor<T> grid_sample(const Tensor<T>& input, const Tensor<T>& coords);

// The identity sampling grid for grid_sample (constant, not tracked).
template <typename T>
Tensor<T> identity_coords(int height, int width);

// 2x bilinear upsampling of [C,H,W] -> [C,2H,2W]. Output pixel o samples the
// source at (o + 0.5)/2 - 0.5 with border clamping.
template <typename T>
Tensor<T> upsample2x_bilinear(const Tensor<T>& x);

// Batch normalization over all dims but the channel axis of [N,C,H,W] (or
// [C,H,W], treated as N=1). Training mode uses current-batch statistics and
// folds them into the running buffers in place; eval mode reads buffers.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, Tensor<T>& running_mean,
                     Tensor<T>& running_var, bool training,
                     T momentum = T(0.1), T eps = T(1e-5));

template <typename T>
bool all_finite(const Tensor<T>& x);

namespace detail {

// Clamp a sampling coordinate into [0, hi]. Non-finite values index cell 0
// so a diverging field surfaces as a non-finite loss instead of a wild read.
template <typename T>
inline T clamp_coord(T v, T hi) {
  if (!(v >= T(0))) return T(0);
  return v > hi ? hi : v;
}

}  // namespace detail

}  // namespace sreg
