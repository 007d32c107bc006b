#pragma once

// Test-only reference implementations. Everything here is written as plain
// scalar loops, independent of the library's compute paths, so the main
// implementations can be checked against them.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "searchreg/correlation.hpp"
#include "searchreg/rng.hpp"
#include "searchreg/tensor.hpp"

namespace oracle {

using sreg::Rng;
using sreg::Shape;
using sreg::Tensor;

template <typename T>
Tensor<T> rand_tensor(Rng& rng, Shape shape, double lo, double hi,
                      bool requires_grad = false) {
  std::vector<T> v(std::size_t(sreg::shape_numel(shape)));
  for (auto& x : v) x = T(rng.uniform(lo, hi));
  return Tensor<T>::from_data(std::move(shape), std::move(v), requires_grad);
}

// Values bounded away from zero (leaky_relu kink) for activation checks.
template <typename T>
Tensor<T> rand_tensor_no_kink(Rng& rng, Shape shape, bool requires_grad = false) {
  std::vector<T> v(std::size_t(sreg::shape_numel(shape)));
  for (auto& x : v) {
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    x = T(sign * rng.uniform(0.05, 1.0));
  }
  return Tensor<T>::from_data(std::move(shape), std::move(v), requires_grad);
}

// Sample coordinates that stay strictly inside the grid with fractional
// parts away from the bilinear knots.
template <typename T>
T rand_coord(Rng& rng, int extent) {
  const int cell = rng.uniform_int(0, std::max(0, extent - 2));
  return T(cell) + T(rng.uniform(0.15, 0.85));
}

// Displacement component so that pixel + displacement == rand_coord.
template <typename T>
Tensor<T> rand_field_component(Rng& rng, int rows, int cols, bool x_axis,
                               bool requires_grad = false) {
  std::vector<T> v(std::size_t(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int extent = x_axis ? cols : rows;
      const int base = x_axis ? c : r;
      v[std::size_t(r) * cols + c] = rand_coord<T>(rng, extent) - T(base);
    }
  return Tensor<T>::from_data({rows, cols}, std::move(v), requires_grad);
}

// Central-difference gradient check. `loss_fn` must rebuild the scalar loss
// from the current values of the target tensors. Checks `samples` random
// entries per tensor at relative tolerance `tol`.
inline void check_gradients(const std::function<Tensor<double>()>& loss_fn,
                            std::vector<Tensor<double>> targets, Rng& rng,
                            int samples = 6, double step = 1e-4,
                            double tol = 1e-3, double abs_floor = 3e-6) {
  for (auto& t : targets) {
    REQUIRE(t.requires_grad());
    t.zero_grad();
  }
  {
    sreg::GradientTape<double> tape;
    Tensor<double> loss = loss_fn();
    sreg::backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(targets.size());
  for (auto& t : targets)
    analytic.emplace_back(t.grad().begin(), t.grad().end());

  for (std::size_t ti = 0; ti < targets.size(); ++ti) {
    auto& t = targets[ti];
    const int n = int(t.numel());
    const int checks = std::min(samples, n);
    for (int s = 0; s < checks; ++s) {
      const int idx = checks == n ? s : rng.uniform_int(0, n - 1);
      auto values = t.values_mut();
      const double saved = values[std::size_t(idx)];
      values[std::size_t(idx)] = saved + step;
      const double plus = loss_fn().item();
      values[std::size_t(idx)] = saved - step;
      const double minus = loss_fn().item();
      values[std::size_t(idx)] = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[ti][std::size_t(idx)];
      const double err = std::abs(a - numeric);
      const double bound = tol * std::max(std::abs(a), std::abs(numeric)) + abs_floor;
      INFO("tensor ", ti, " entry ", idx, ": analytic ", a, " numeric ", numeric);
      CHECK(err <= bound);
    }
  }
}

// Quadruple-loop cost volume.
template <typename T>
std::vector<T> brute_force_cost_volume(const Tensor<T>& m, const Tensor<T>& f) {
  const int d = m.dim(0), h = m.dim(1), w = m.dim(2);
  std::vector<T> out(std::size_t(h) * w * h * w);
  std::size_t o = 0;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int k = 0; k < h; ++k)
        for (int l = 0; l < w; ++l) {
          T s = T(0);
          for (int c = 0; c < d; ++c)
            s += m.at({c, i, j}) * f.at({c, k, l});
          out[o++] = s;
        }
  return out;
}

// Scalar bilinear sample with border clamping.
template <typename T>
T bilinear_clamped(const T* plane, int rows, int cols, T x, T y) {
  x = std::clamp(x, T(0), T(cols - 1));
  y = std::clamp(y, T(0), T(rows - 1));
  const int x0 = int(std::floor(x)), y0 = int(std::floor(y));
  const int x1 = std::min(x0 + 1, cols - 1), y1 = std::min(y0 + 1, rows - 1);
  const T wx = x - T(x0), wy = y - T(y0);
  const T top = (T(1) - wx) * plane[y0 * cols + x0] + wx * plane[y0 * cols + x1];
  const T bot = (T(1) - wx) * plane[y1 * cols + x0] + wx * plane[y1 * cols + x1];
  return (T(1) - wy) * top + wy * bot;
}

// Direct per-pixel, per-offset, per-level search-map lookup.
template <typename T>
std::vector<T> naive_search_lookup(const sreg::CorrelationPyramid<T>& pyr,
                                   const Tensor<T>& fx, const Tensor<T>& fy,
                                   int radius) {
  const auto hood = sreg::SearchNeighborhood::make(radius);
  const int h = pyr.rows(), w = pyr.cols();
  const int noff = int(hood.offsets.size());
  std::vector<T> out(std::size_t(4) * noff * h * w);
  for (int level = 0; level < 4; ++level) {
    const auto& lvl = pyr.levels[std::size_t(level)];
    const int lh = lvl.dim(2), lw = lvl.dim(3);
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        const T wx = (T(u) + fx.at({v, u})) / T(1 << level);
        const T wy = (T(v) + fy.at({v, u})) / T(1 << level);
        const T* cell = lvl.values().data() +
                        (std::size_t(v) * w + u) * std::size_t(lh) * lw;
        for (int o = 0; o < noff; ++o) {
          const auto [dx, dy] = hood.offsets[std::size_t(o)];
          const T s = bilinear_clamped(cell, lh, lw, wx + T(dx), wy + T(dy));
          out[((std::size_t(level) * noff + o) * h + v) * w + u] = s;
        }
      }
  }
  return out;
}

inline double max_abs_diff(std::span<const float> a, std::span<const float> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace oracle
