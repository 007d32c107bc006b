#pragma once

#include "searchreg/config.hpp"
#include "searchreg/field_iterator.hpp"
#include "searchreg/tensor.hpp"

namespace sreg {

struct LossConfig {
  Similarity similarity = Similarity::mse;
  double alpha = 0.01;
  int lncc_window = 9;
  bool lncc_signed = false;
};

LossConfig loss_config_from(const RegistrationConfig& cfg);

// Parameter-free resampling layer: output(p) = bilinear sample of image at
// p + field(p), clamped at the borders. Differentiable in both arguments.
template <typename T>
Tensor<T> warp(const Tensor<T>& image, const DeformationField<T>& field);

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& a, const Tensor<T>& b);

// 1 - mean squared local correlation coefficient over all pixels whose full
// window x window neighborhood fits in the image. eps stabilizes the
// denominator. With signed_mode, the signed coefficient is used instead of
// its square (mapped as (1 - corr) / ... no squaring).
template <typename T>
Tensor<T> lncc_loss(const Tensor<T>& a, const Tensor<T>& b, int window,
                    T eps = T(1e-5), bool signed_mode = false);

// Mean over interior pixels of the summed squared forward differences of
// both field components.
template <typename T>
Tensor<T> smoothness_loss(const DeformationField<T>& field);

// similarity(warp(moving, field), fixed) + alpha * smoothness(field)
template <typename T>
Tensor<T> total_loss(const Tensor<T>& moving, const Tensor<T>& fixed,
                     const DeformationField<T>& field, const LossConfig& cfg);

}  // namespace sreg
