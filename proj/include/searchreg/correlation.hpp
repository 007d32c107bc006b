#pragma once

#include <array>
#include <utility>
#include <vector>

#include "searchreg/tensor.hpp"

namespace sreg {

// All-pairs inner products of two feature maps. values[i,j,k,l] is the
// correlation of moving position (i,j) with fixed position (k,l); row-major
// storage makes it the canonical (H*W) x (H*W) matrix with moving positions
// outermost.
template <typename T>
struct CostVolume {
  Tensor<T> values;  // [H,W,H,W]
  int rows() const { return values.dim(0); }
  int cols() const { return values.dim(1); }
};

// `normalize` divides by sqrt(D) to control the numeric range.
template <typename T>
CostVolume<T> compute_cost_volume(const Tensor<T>& moving_feat,
                                  const Tensor<T>& fixed_feat,
                                  bool normalize = false);

// The cost volume plus mean-poolings of its trailing (fixed-image) dims by
// 2, 4 and 8. The moving-image dims are kept at full feature resolution on
// every level.
template <typename T>
struct CorrelationPyramid {
  std::array<Tensor<T>, 4> levels;  // level l: [H,W,ceil(H/2^l),ceil(W/2^l)]
  int rows() const { return levels[0].dim(0); }
  int cols() const { return levels[0].dim(1); }
};

template <typename T>
CorrelationPyramid<T> build_pyramid(const CostVolume<T>& cv);

// L1 ball of integer offsets, |dx|+|dy| <= radius, ordered lexicographically
// by (dy, dx). Contains 2r^2 + 2r + 1 offsets including (0,0).
struct SearchNeighborhood {
  int radius;
  std::vector<std::pair<int, int>> offsets;  // (dx, dy)
  static SearchNeighborhood make(int radius);
};

// For each pixel X, warps by the half-resolution field to X^w, then samples
// every pyramid level at X^w / 2^level + offset for each diamond offset
// (offsets are in level units, so the reach doubles per level). Bilinear
// with border clamping over the level's trailing dims. Output channels are
// level-major: [4 * offsets, H, W].
template <typename T>
Tensor<T> search_lookup(const CorrelationPyramid<T>& pyramid,
                        const Tensor<T>& field_x, const Tensor<T>& field_y,
                        int radius);

}  // namespace sreg
