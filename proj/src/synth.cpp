#include "searchreg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "searchreg/errors.hpp"
#include "searchreg/pgm_io.hpp"
#include "searchreg/tnsr_io.hpp"
#include "searchreg/warp_loss.hpp"

namespace sreg {
namespace {

// In-place 3x3 box blur with edge clamping.
void box_blur(std::vector<float>& v, int rows, int cols, int passes) {
  std::vector<float> tmp(v.size());
  for (int pass = 0; pass < passes; ++pass) {
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        float s = 0;
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const int rr = std::clamp(r + dr, 0, rows - 1);
            const int cc = std::clamp(c + dc, 0, cols - 1);
            s += v[std::size_t(rr) * cols + cc];
          }
        tmp[std::size_t(r) * cols + c] = s / 9.0f;
      }
    v.swap(tmp);
  }
}

std::vector<float> noise(Rng& rng, int rows, int cols) {
  std::vector<float> v(std::size_t(rows) * cols);
  for (auto& x : v) x = float(rng.uniform(-1.0, 1.0));
  return v;
}

// Two blurred octaves plus fine grain, normalized into [0.1, 0.9].
std::vector<float> texture(Rng& rng, int rows, int cols) {
  std::vector<float> coarse = noise(rng, rows, cols);
  box_blur(coarse, rows, cols, 6);
  std::vector<float> mid = noise(rng, rows, cols);
  box_blur(mid, rows, cols, 2);
  std::vector<float> fine = noise(rng, rows, cols);
  std::vector<float> v(coarse.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = 1.0f * coarse[i] + 0.4f * mid[i] + 0.08f * fine[i];
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  const float lo = *mn, span = std::max(*mx - lo, 1e-6f);
  for (auto& x : v) x = 0.1f + 0.8f * (x - lo) / span;
  return v;
}

void add_ellipses(Rng& rng, std::vector<float>& img, LabelMask& mask, int rows,
                  int cols) {
  const int count = rng.uniform_int(1, 3);
  for (int j = 1; j <= count; ++j) {
    const double cx = rng.uniform(0.25, 0.75) * cols;
    const double cy = rng.uniform(0.25, 0.75) * rows;
    const double ax = rng.uniform(0.10, 0.22) * cols;
    const double ay = rng.uniform(0.10, 0.22) * rows;
    const double angle = rng.uniform(0.0, 3.14159265);
    const double ca = std::cos(angle), sa = std::sin(angle);
    const float delta =
        float((j % 2 ? 1.0 : -1.0) * rng.uniform(0.20, 0.35));
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const double dx = c - cx, dy = r - cy;
        const double u = (dx * ca + dy * sa) / ax;
        const double v = (-dx * sa + dy * ca) / ay;
        if (u * u + v * v <= 1.0) {
          const std::size_t i = std::size_t(r) * cols + c;
          img[i] = std::clamp(img[i] + delta, 0.0f, 1.0f);
          mask.labels[i] = j;
        }
      }
  }
}

DeformationField<float> random_field(Rng& rng, int rows, int cols,
                                     double max_disp, int smoothness) {
  DeformationField<float> field;
  field.resolution = FieldResolution::full;
  for (int attempt = 0;; ++attempt) {
    std::vector<float> fx = noise(rng, rows, cols);
    std::vector<float> fy = noise(rng, rows, cols);
    const int passes = smoothness + 8 * attempt;
    box_blur(fx, rows, cols, passes);
    box_blur(fy, rows, cols, passes);
    float peak = 0;
    for (std::size_t i = 0; i < fx.size(); ++i)
      peak = std::max({peak, std::abs(fx[i]), std::abs(fy[i])});
    const float s = peak > 0 ? float(max_disp) / peak : 0.0f;
    for (auto& x : fx) x *= s;
    for (auto& x : fy) x *= s;
    field.fx = Tensor<float>::from_data({rows, cols}, std::move(fx));
    field.fy = Tensor<float>::from_data({rows, cols}, std::move(fy));
    // Fold-free by construction: reject and smooth harder otherwise.
    if (max_disp == 0.0 || folding_ratio(field) == 0.0 || attempt >= 6) break;
  }
  return field;
}

}  // namespace

std::vector<SynthPair> synth_generate(const SynthOptions& opts) {
  if (opts.max_disp < 0)
    throw std::invalid_argument("synth_generate: max_disp must be >= 0");
  if (opts.rows < 8 || opts.cols < 8 || opts.rows % 4 || opts.cols % 4)
    throw std::invalid_argument(
        "synth_generate: sides must be >= 8 and divisible by 4");
  Rng rng(opts.seed);
  std::vector<SynthPair> pairs;
  pairs.reserve(std::size_t(opts.count));
  for (int n = 0; n < opts.count; ++n) {
    SynthPair pair;
    std::vector<float> img = texture(rng, opts.rows, opts.cols);
    pair.moving_mask.rows = opts.rows;
    pair.moving_mask.cols = opts.cols;
    pair.moving_mask.labels.assign(img.size(), 0);
    add_ellipses(rng, img, pair.moving_mask, opts.rows, opts.cols);
    pair.moving =
        Tensor<float>::from_data({1, opts.rows, opts.cols}, std::move(img));
    pair.gt = random_field(rng, opts.rows, opts.cols, opts.max_disp,
                           opts.smoothness);
    pair.fixed = warp(pair.moving, pair.gt);
    pair.fixed_mask = warp_mask_nearest(pair.moving_mask, pair.gt);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

namespace {

std::string pair_stem(const std::string& dir, int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "pair_%04d", index);
  return dir + "/" + buf;
}

Tensor<float> pack_field(const DeformationField<float>& f) {
  const int h = f.rows(), w = f.cols();
  std::vector<float> packed;
  packed.reserve(std::size_t(2) * h * w);
  packed.insert(packed.end(), f.fx.values().begin(), f.fx.values().end());
  packed.insert(packed.end(), f.fy.values().begin(), f.fy.values().end());
  return Tensor<float>::from_data({2, h, w}, std::move(packed));
}

}  // namespace

void write_corpus(const std::string& dir, const std::vector<SynthPair>& pairs) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir + "/manifest.txt");
  if (!manifest) throw DataError("cannot write manifest in " + dir);
  manifest << "count = " << pairs.size() << "\n";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    const std::string stem = pair_stem(dir, int(i));
    save_pgm(stem + "_moving.pgm", p.moving);
    save_pgm(stem + "_fixed.pgm", p.fixed);
    save_mask_pgm(stem + "_moving_mask.pgm", p.moving_mask);
    save_mask_pgm(stem + "_fixed_mask.pgm", p.fixed_mask);
    save_tnsr(stem + "_field.tnsr", pack_field(p.gt));
  }
}

std::vector<SynthPair> load_corpus(const std::string& dir) {
  std::ifstream manifest(dir + "/manifest.txt");
  if (!manifest) throw DataError("missing manifest.txt in " + dir);
  std::string key, eq;
  int count = 0;
  manifest >> key >> eq >> count;
  if (key != "count" || count <= 0) throw DataError("bad manifest in " + dir);
  std::vector<SynthPair> pairs;
  pairs.reserve(std::size_t(count));
  for (int i = 0; i < count; ++i) {
    const std::string stem = pair_stem(dir, i);
    SynthPair p;
    p.moving = load_pgm(stem + "_moving.pgm").image;
    p.fixed = load_pgm(stem + "_fixed.pgm").image;
    p.moving_mask = load_mask(stem + "_moving_mask.pgm").mask;
    p.fixed_mask = load_mask(stem + "_fixed_mask.pgm").mask;
    if (std::filesystem::exists(stem + "_field.tnsr")) {
      Tensor<float> packed = load_tnsr(stem + "_field.tnsr");
      const int h = packed.dim(1), w = packed.dim(2);
      const auto v = packed.values();
      p.gt.resolution = FieldResolution::full;
      p.gt.fx = Tensor<float>::from_data(
          {h, w}, std::vector<float>(v.begin(), v.begin() + h * w));
      p.gt.fy = Tensor<float>::from_data(
          {h, w}, std::vector<float>(v.begin() + h * w, v.end()));
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace sreg
