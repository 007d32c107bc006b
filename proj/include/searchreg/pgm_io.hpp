#pragma once

#include <string>

#include "searchreg/metrics.hpp"
#include "searchreg/tensor.hpp"

namespace sreg {

// Replicate padding applied on load so that image sides become multiples of
// 4 (right/bottom only). Keep it around to crop outputs back.
struct PadRecord {
  int left = 0, top = 0, right = 0, bottom = 0;
  bool any() const { return left || top || right || bottom; }
};

struct LoadedImage {
  Tensor<float> image;  // [1,H,W], intensities in [0,1]
  PadRecord pad;
  int orig_rows = 0, orig_cols = 0;
};

struct LoadedMask {
  LabelMask mask;  // pixel value is the label id
  PadRecord pad;
  int orig_rows = 0, orig_cols = 0;
};

// Binary 8-bit PGM (P5) only; 16-bit files and malformed headers raise
// DataError.
LoadedImage load_pgm(const std::string& path);
LoadedMask load_mask(const std::string& path);

// Writes [1,H,W] as P5 after cropping `crop` and clamping to [0,1].
void save_pgm(const std::string& path, const Tensor<float>& image,
              const PadRecord& crop = {});
void save_mask_pgm(const std::string& path, const LabelMask& mask,
                   const PadRecord& crop = {});

}  // namespace sreg
