#pragma once

#include <vector>

#include "searchreg/config.hpp"
#include "searchreg/correlation.hpp"
#include "searchreg/encoder.hpp"
#include "searchreg/gru.hpp"
#include "searchreg/tensor.hpp"

namespace sreg {

enum class FieldResolution { half, full };

// Per-pixel displacement in pixels of its own resolution; half-resolution
// fields live on the feature grid, full-resolution on the image grid.
template <typename T>
struct DeformationField {
  Tensor<T> fx, fy;  // [H,W] each
  FieldResolution resolution = FieldResolution::half;
  int rows() const { return fx.dim(0); }
  int cols() const { return fx.dim(1); }
};

template <typename T>
DeformationField<T> zero_field(int rows, int cols,
                               FieldResolution res = FieldResolution::half);

template <typename T>
struct IterateResult {
  DeformationField<T> full;                  // finalized, image resolution
  std::vector<DeformationField<T>> steps;    // one half-res field per step
  int lookup_count = 0;                      // search maps computed
};

// Refinement loop: starting from a zero field and zero hidden state, each
// step looks the current field up in the pyramid, feeds the search map plus
// context through the recurrent cell, and accumulates the predicted update.
// The last iterate is upsampled to full resolution.
template <typename T>
IterateResult<T> iterate(const FeatureMaps<T>& fm,
                         const CorrelationPyramid<T>& pyramid,
                         const GruParams<T>& gru_params,
                         const FlowHeadParams<T>& head_params,
                         const RegistrationConfig& cfg);

// 2x bilinear upsampling of each component followed by doubling the values,
// re-expressing the displacement in full-resolution pixel units.
template <typename T>
DeformationField<T> finalize(const DeformationField<T>& half);

}  // namespace sreg
