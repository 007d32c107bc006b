#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "searchreg/field_iterator.hpp"

namespace sreg {

// Integer label map; 0 is background.
struct LabelMask {
  int rows = 0, cols = 0;
  std::vector<std::int32_t> labels;  // row-major

  std::int32_t at(int r, int c) const {
    return labels[std::size_t(r) * cols + c];
  }
};

// 2|A n B| / (|A| + |B|) for one label; 1 when both sets are empty.
double dice(const LabelMask& a, const LabelMask& b, std::int32_t label);

// Sorted nonzero labels present in either mask.
std::vector<std::int32_t> label_set(const LabelMask& a, const LabelMask& b);

// Mean dice across label_set(a, b); 1.0 when there are no labels.
double mean_dice(const LabelMask& a, const LabelMask& b);

// Fraction of interior pixels (forward differences, last row/column
// excluded) where det of the Jacobian of p -> p + field(p) is <= 0.
double folding_ratio(const DeformationField<float>& field);
double folding_ratio(const DeformationField<double>& field);

// Mean Euclidean distance between two displacement fields.
template <typename T>
double endpoint_error(const DeformationField<T>& predicted,
                      const DeformationField<T>& truth);

// Mean displacement magnitude; the endpoint error of the identity transform.
template <typename T>
double field_magnitude(const DeformationField<T>& field);

// Labels resampled with nearest-neighbor lookup at p + field(p).
LabelMask warp_mask_nearest(const LabelMask& mask,
                            const DeformationField<float>& field);

// Wall-clock seconds of one registration call (monotone clock).
double time_pair(const std::function<void()>& run);

}  // namespace sreg
