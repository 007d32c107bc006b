#pragma once

#include "searchreg/ops.hpp"
#include "searchreg/rng.hpp"
#include "searchreg/tensor.hpp"

namespace sreg {

// Uniform init in +-1/sqrt(fan_in), drawn from `rng` in flat index order.
template <typename T>
Tensor<T> fan_in_uniform(Rng& rng, Shape shape, int fan_in,
                         bool requires_grad = true);

template <typename T>
struct ConvBnLayer {
  Tensor<T> w;                       // [K,C,kh,kw], no conv bias before BN
  Tensor<T> gamma, beta;             // trained
  Tensor<T> running_mean, running_var;  // buffers
  int stride = 1;
  int padding = 1;
};

template <typename T>
ConvBnLayer<T> make_conv_bn(Rng& rng, int in_ch, int out_ch, int ksize,
                            int stride);

template <typename T>
Tensor<T> conv_bn_act(const Tensor<T>& x, ConvBnLayer<T>& layer, bool training);

// Shared-trunk feature/context extractor. The trunk is a small U-shape
// (full -> 1/2 -> 1/4 -> back to 1/2 with a skip concat); both images run
// through the same trunk tensors, and the two heads project to the 4-channel
// per-image feature maps and 16-channel per-image context halves.
template <typename T>
struct EncoderParams {
  ConvBnLayer<T> stem;    // 1 -> 16, full res
  ConvBnLayer<T> down1;   // 16 -> 32, stride 2
  ConvBnLayer<T> conv1;   // 32 -> 32
  ConvBnLayer<T> down2;   // 32 -> 32, stride 2
  ConvBnLayer<T> conv2;   // 32 -> 32
  ConvBnLayer<T> fuse;    // 64 -> 32 after skip concat
  Tensor<T> feat_w, feat_b;  // 1x1, 32 -> 4
  Tensor<T> ctx_w, ctx_b;    // 1x1, 32 -> 16
};

template <typename T>
EncoderParams<T> make_encoder_params(Rng& rng);

// h(M), h(F) and the stacked context at half the input resolution.
template <typename T>
struct FeatureMaps {
  Tensor<T> moving_feat;  // [4, H/2, W/2]
  Tensor<T> fixed_feat;   // [4, H/2, W/2]
  Tensor<T> context;      // [32, H/2, W/2], fixed-image half first
};

template <typename T>
Tensor<T> encoder_trunk(const Tensor<T>& image, EncoderParams<T>& params,
                        bool training);
template <typename T>
Tensor<T> feature_head(const Tensor<T>& trunk, const EncoderParams<T>& params);
template <typename T>
Tensor<T> context_head(const Tensor<T>& trunk, const EncoderParams<T>& params);

// Runs both images through the shared trunk, then both heads. Inputs must be
// [1,H,W] with H,W divisible by 4 and intensities in [0,1].
template <typename T>
FeatureMaps<T> encode(const Tensor<T>& moving, const Tensor<T>& fixed,
                      EncoderParams<T>& params, bool training);

}  // namespace sreg
