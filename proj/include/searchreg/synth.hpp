#pragma once

#include <vector>

#include "searchreg/config.hpp"
#include "searchreg/field_iterator.hpp"
#include "searchreg/metrics.hpp"
#include "searchreg/rng.hpp"
#include "searchreg/tensor.hpp"

namespace sreg {

// One synthetic registration pair. The moving image is a band-limited
// texture with 1-3 elliptic structures (doubling as labels); the ground
// truth is a smoothed, fold-free displacement field in the registration
// direction: warp(moving, gt) == fixed exactly by construction.
struct SynthPair {
  Tensor<float> moving, fixed;  // [1,H,W]
  DeformationField<float> gt;   // full resolution
  LabelMask moving_mask, fixed_mask;
};

struct SynthOptions {
  int count = 200;
  int rows = 64, cols = 64;
  double max_disp = 6.0;  // max |component| in full-resolution pixels
  int smoothness = 24;    // box-blur passes over the raw displacement noise
  std::uint64_t seed = 42;
};

std::vector<SynthPair> synth_generate(const SynthOptions& opts);

// On-disk corpus layout: manifest.txt with the pair count, then per pair
// PGM images/masks and a [2,H,W] TNSR ground-truth field.
void write_corpus(const std::string& dir, const std::vector<SynthPair>& pairs);
std::vector<SynthPair> load_corpus(const std::string& dir);

}  // namespace sreg
