#include "searchreg/encoder.hpp"

#include <cmath>

namespace sreg {

template <typename T>
Tensor<T> fan_in_uniform(Rng& rng, Shape shape, int fan_in, bool requires_grad) {
  const double bound = 1.0 / std::sqrt(double(fan_in));
  std::vector<T> v(std::size_t(shape_numel(shape)));
  for (auto& x : v) x = T(rng.uniform(-bound, bound));
  return Tensor<T>::from_data(std::move(shape), std::move(v), requires_grad);
}

template <typename T>
ConvBnLayer<T> make_conv_bn(Rng& rng, int in_ch, int out_ch, int ksize,
                            int stride) {
  ConvBnLayer<T> layer;
  layer.w = fan_in_uniform<T>(rng, {out_ch, in_ch, ksize, ksize},
                              in_ch * ksize * ksize);
  layer.gamma = Tensor<T>::filled({out_ch}, T(1), true);
  layer.beta = Tensor<T>::zeros({out_ch}, true);
  layer.running_mean = Tensor<T>::zeros({out_ch});
  layer.running_var = Tensor<T>::filled({out_ch}, T(1));
  layer.stride = stride;
  layer.padding = ksize / 2;
  return layer;
}

template <typename T>
Tensor<T> conv_bn_act(const Tensor<T>& x, ConvBnLayer<T>& layer, bool training) {
  Tensor<T> y = conv2d(x, layer.w, layer.stride, layer.padding);
  y = batch_norm(y, layer.gamma, layer.beta, layer.running_mean,
                 layer.running_var, training);
  return leaky_relu(y, T(0.1));
}

template <typename T>
EncoderParams<T> make_encoder_params(Rng& rng) {
  EncoderParams<T> p;
  p.stem = make_conv_bn<T>(rng, 1, 16, 3, 1);
  p.down1 = make_conv_bn<T>(rng, 16, 32, 3, 2);
  p.conv1 = make_conv_bn<T>(rng, 32, 32, 3, 1);
  p.down2 = make_conv_bn<T>(rng, 32, 32, 3, 2);
  p.conv2 = make_conv_bn<T>(rng, 32, 32, 3, 1);
  p.fuse = make_conv_bn<T>(rng, 64, 32, 3, 1);
  p.feat_w = fan_in_uniform<T>(rng, {4, 32, 1, 1}, 32);
  p.feat_b = Tensor<T>::zeros({4}, true);
  p.ctx_w = fan_in_uniform<T>(rng, {16, 32, 1, 1}, 32);
  p.ctx_b = Tensor<T>::zeros({16}, true);
  return p;
}

template <typename T>
Tensor<T> encoder_trunk(const Tensor<T>& image, EncoderParams<T>& params,
                        bool training) {
  Tensor<T> a0 = conv_bn_act(image, params.stem, training);
  Tensor<T> a1 = conv_bn_act(a0, params.down1, training);
  Tensor<T> skip = conv_bn_act(a1, params.conv1, training);
  Tensor<T> a2 = conv_bn_act(skip, params.down2, training);
  Tensor<T> a3 = conv_bn_act(a2, params.conv2, training);
  Tensor<T> up = upsample2x_bilinear(a3);
  Tensor<T> cat = concat_channels<T>({up, skip});
  return conv_bn_act(cat, params.fuse, training);
}

template <typename T>
Tensor<T> feature_head(const Tensor<T>& trunk, const EncoderParams<T>& params) {
  return conv2d(trunk, params.feat_w, params.feat_b, 1, 0);
}

template <typename T>
Tensor<T> context_head(const Tensor<T>& trunk, const EncoderParams<T>& params) {
  return conv2d(trunk, params.ctx_w, params.ctx_b, 1, 0);
}

template <typename T>
FeatureMaps<T> encode(const Tensor<T>& moving, const Tensor<T>& fixed,
                      EncoderParams<T>& params, bool training) {
  if (moving.rank() != 3 || fixed.rank() != 3 || moving.dim(0) != 1 ||
      fixed.dim(0) != 1)
    throw std::invalid_argument("encode: images must be [1,H,W]");
  if (moving.shape() != fixed.shape())
    throw std::invalid_argument("encode: image shapes differ");
  if (moving.dim(1) % 4 != 0 || moving.dim(2) % 4 != 0)
    throw std::invalid_argument(
        "encode: image sides must be divisible by 4; pad the input (see "
        "load_pgm) before encoding");

  Tensor<T> trunk_fixed = encoder_trunk(fixed, params, training);
  Tensor<T> trunk_moving = encoder_trunk(moving, params, training);

  FeatureMaps<T> fm;
  fm.fixed_feat = feature_head(trunk_fixed, params);
  fm.moving_feat = feature_head(trunk_moving, params);
  fm.context = concat_channels<T>({context_head(trunk_fixed, params),
                                   context_head(trunk_moving, params)});
  return fm;
}

#define SREG_INSTANTIATE_ENCODER(T)                                           \
  template Tensor<T> fan_in_uniform<T>(Rng&, Shape, int, bool);               \
  template ConvBnLayer<T> make_conv_bn<T>(Rng&, int, int, int, int);          \
  template Tensor<T> conv_bn_act<T>(const Tensor<T>&, ConvBnLayer<T>&, bool); \
  template EncoderParams<T> make_encoder_params<T>(Rng&);                     \
  template Tensor<T> encoder_trunk<T>(const Tensor<T>&, EncoderParams<T>&,    \
                                      bool);                                  \
  template Tensor<T> feature_head<T>(const Tensor<T>&,                        \
                                     const EncoderParams<T>&);                \
  template Tensor<T> context_head<T>(const Tensor<T>&,                        \
                                     const EncoderParams<T>&);                \
  template FeatureMaps<T> encode<T>(const Tensor<T>&, const Tensor<T>&,       \
                                    EncoderParams<T>&, bool);

SREG_INSTANTIATE_ENCODER(float)
SREG_INSTANTIATE_ENCODER(double)

}  // namespace sreg
