#include "searchreg/correlation.hpp"

#include <algorithm>
#include <cmath>

#include "searchreg/gemm.hpp"
#include "searchreg/ops.hpp"

namespace sreg {

template <typename T>
CostVolume<T> compute_cost_volume(const Tensor<T>& moving_feat,
                                  const Tensor<T>& fixed_feat, bool normalize) {
  if (moving_feat.rank() != 3 || fixed_feat.rank() != 3)
    throw std::invalid_argument("compute_cost_volume: features must be [D,H,W]");
  if (moving_feat.shape() != fixed_feat.shape())
    throw std::invalid_argument("compute_cost_volume: feature shapes differ " +
                                shape_to_string(moving_feat.shape()) + " vs " +
                                shape_to_string(fixed_feat.shape()));
  const int d = moving_feat.dim(0), h = moving_feat.dim(1), w = moving_feat.dim(2);
  const int hw = h * w;
  const T norm = normalize ? T(1) / std::sqrt(T(d)) : T(1);

  // values[(ij),(kl)] = sum_d m[d,ij] * f[d,kl]
  std::vector<T> out(std::size_t(hw) * hw);
  gemm_tn(hw, hw, d, moving_feat.values().data(), fixed_feat.values().data(),
          out.data(), false);
  if (normalize)
    for (auto& v : out) v *= norm;

  const bool track = detail::tracked(moving_feat) || detail::tracked(fixed_feat);
  Tensor<T> values = detail::op_result(Shape{h, w, h, w}, std::move(out), track);
  detail::record_pull(values, [yn = values.node(), mn = moving_feat.node(),
                               fn = fixed_feat.node(), d, hw, norm] {
    std::vector<T> g;
    const T* gp = yn->grad.data();
    if (norm != T(1)) {
      g.assign(yn->grad.begin(), yn->grad.end());
      for (auto& v : g) v *= norm;
      gp = g.data();
    }
    if (mn->requires_grad) {
      mn->ensure_grad();
      // grad_m[d, ij] += sum_kl f[d, kl] * g[ij, kl]
      gemm_nt(d, hw, hw, fn->values.data(), gp, mn->grad.data(), true);
    }
    if (fn->requires_grad) {
      fn->ensure_grad();
      // grad_f[d, kl] += sum_ij m[d, ij] * g[ij, kl]
      gemm(d, hw, hw, mn->values.data(), gp, fn->grad.data(), true);
    }
  });
  return CostVolume<T>{values};
}

template <typename T>
CorrelationPyramid<T> build_pyramid(const CostVolume<T>& cv) {
  if (cv.values.rank() != 4)
    throw std::invalid_argument("build_pyramid: cost volume must be 4D");
  CorrelationPyramid<T> pyr;
  pyr.levels[0] = cv.values;
  for (int level = 1; level < 4; ++level)
    pyr.levels[std::size_t(level)] = avg_pool2d(cv.values, 1 << level);
  return pyr;
}

SearchNeighborhood SearchNeighborhood::make(int radius) {
  if (radius < 1)
    throw std::invalid_argument("SearchNeighborhood: radius must be >= 1");
  SearchNeighborhood n;
  n.radius = radius;
  for (int dy = -radius; dy <= radius; ++dy) {
    const int span = radius - std::abs(dy);
    for (int dx = -span; dx <= span; ++dx) n.offsets.emplace_back(dx, dy);
  }
  return n;
}

template <typename T>
Tensor<T> search_lookup(const CorrelationPyramid<T>& pyramid,
                        const Tensor<T>& field_x, const Tensor<T>& field_y,
                        int radius) {
  const SearchNeighborhood hood = SearchNeighborhood::make(radius);
  const int h = pyramid.rows(), w = pyramid.cols();
  if (field_x.rank() != 2 || field_x.dim(0) != h || field_x.dim(1) != w ||
      field_x.shape() != field_y.shape())
    throw std::invalid_argument(
        "search_lookup: field must be [H,W] matching the pyramid");

  const int noff = int(hood.offsets.size());
  const int channels = 4 * noff;
  const std::size_t pix = std::size_t(h) * w;

  const T* fx = field_x.values().data();
  const T* fy = field_y.values().data();
  std::vector<T> out(std::size_t(channels) * pix);
  for (int level = 0; level < 4; ++level) {
    const Tensor<T>& lvl = pyramid.levels[std::size_t(level)];
    const int lh = lvl.dim(2), lw = lvl.dim(3);
    const T* lv = lvl.values().data();
    const T inv_scale = T(1) / T(1 << level);
#pragma omp parallel for schedule(static) if (pix * std::size_t(noff) > (1u << 14))
    for (std::size_t p = 0; p < pix; ++p) {
      const T cx = (T(int(p % std::size_t(w))) + fx[p]) * inv_scale;
      const T cy = (T(int(p / std::size_t(w))) + fy[p]) * inv_scale;
      const T* cell = lv + p * std::size_t(lh) * lw;
      for (int o = 0; o < noff; ++o) {
        const T x = detail::clamp_coord(cx + T(hood.offsets[std::size_t(o)].first), T(lw - 1));
        const T y = detail::clamp_coord(cy + T(hood.offsets[std::size_t(o)].second), T(lh - 1));
        const int x0 = int(std::floor(x)), y0 = int(std::floor(y));
        const int x1 = std::min(x0 + 1, lw - 1), y1 = std::min(y0 + 1, lh - 1);
        const T wx = x - T(x0), wy = y - T(y0);
        const T top = (T(1) - wx) * cell[std::size_t(y0) * lw + x0] +
                      wx * cell[std::size_t(y0) * lw + x1];
        const T bot = (T(1) - wx) * cell[std::size_t(y1) * lw + x0] +
                      wx * cell[std::size_t(y1) * lw + x1];
        out[(std::size_t(level) * noff + std::size_t(o)) * pix + p] =
            (T(1) - wy) * top + wy * bot;
      }
    }
  }

  bool track = detail::tracked(field_x) || detail::tracked(field_y);
  for (const auto& lvl : pyramid.levels) track = track || detail::tracked(lvl);
  Tensor<T> y = detail::op_result(Shape{channels, h, w}, std::move(out), track);

  std::array<std::shared_ptr<detail::TensorNode<T>>, 4> lvl_nodes;
  for (int i = 0; i < 4; ++i) lvl_nodes[std::size_t(i)] = pyramid.levels[std::size_t(i)].node();
  detail::record_pull(y, [yn = y.node(), fxn = field_x.node(),
                          fyn = field_y.node(), lvl_nodes, hood, h, w, noff,
                          pix] {
    const bool need_field = fxn->requires_grad || fyn->requires_grad;
    if (fxn->requires_grad) fxn->ensure_grad();
    if (fyn->requires_grad) fyn->ensure_grad();
    const T* fx = fxn->values.data();
    const T* fy = fyn->values.data();
    for (int level = 0; level < 4; ++level) {
      auto& ln = lvl_nodes[std::size_t(level)];
      const bool need_level = ln->requires_grad;
      if (need_level) ln->ensure_grad();
      if (!need_level && !need_field) continue;
      // each pixel owns its cell slab of the level gradient, so the
      // parallel scatter is race free and deterministic
      const int lh = ln->shape[2], lw = ln->shape[3];
      const T* lv = ln->values.data();
      const T inv_scale = T(1) / T(1 << level);
#pragma omp parallel for schedule(static) if (pix * std::size_t(noff) > (1u << 14))
      for (std::size_t p = 0; p < pix; ++p) {
        const T cx = (T(int(p % std::size_t(w))) + fx[p]) * inv_scale;
        const T cy = (T(int(p / std::size_t(w))) + fy[p]) * inv_scale;
        const T* cell = lv + p * std::size_t(lh) * lw;
        T* gcell = need_level ? ln->grad.data() + p * std::size_t(lh) * lw : nullptr;
        T gx_total = T(0), gy_total = T(0);
        for (int o = 0; o < noff; ++o) {
          const T g = yn->grad[(std::size_t(level) * noff + std::size_t(o)) * pix + p];
          if (g == T(0)) continue;
          const T xr = cx + T(hood.offsets[std::size_t(o)].first);
          const T yr = cy + T(hood.offsets[std::size_t(o)].second);
          const T x = detail::clamp_coord(xr, T(lw - 1));
          const T y2 = detail::clamp_coord(yr, T(lh - 1));
          const int x0 = int(std::floor(x)), y0 = int(std::floor(y2));
          const int x1 = std::min(x0 + 1, lw - 1), y1 = std::min(y0 + 1, lh - 1);
          const T wx = x - T(x0), wy = y2 - T(y0);
          if (need_level) {
            gcell[std::size_t(y0) * lw + x0] += g * (T(1) - wx) * (T(1) - wy);
            gcell[std::size_t(y0) * lw + x1] += g * wx * (T(1) - wy);
            gcell[std::size_t(y1) * lw + x0] += g * (T(1) - wx) * wy;
            gcell[std::size_t(y1) * lw + x1] += g * wx * wy;
          }
          if (need_field) {
            const T v00 = cell[std::size_t(y0) * lw + x0];
            const T v01 = cell[std::size_t(y0) * lw + x1];
            const T v10 = cell[std::size_t(y1) * lw + x0];
            const T v11 = cell[std::size_t(y1) * lw + x1];
            if (xr >= T(0) && xr <= T(lw - 1))
              gx_total += g * ((T(1) - wy) * (v01 - v00) + wy * (v11 - v10));
            if (yr >= T(0) && yr <= T(lh - 1))
              gy_total += g * ((T(1) - wx) * (v10 - v00) + wx * (v11 - v01));
          }
        }
        if (fxn->requires_grad) fxn->grad[p] += gx_total * inv_scale;
        if (fyn->requires_grad) fyn->grad[p] += gy_total * inv_scale;
      }
    }
  });
  return y;
}

#define SREG_INSTANTIATE_CORR(T)                                            \
  template CostVolume<T> compute_cost_volume<T>(const Tensor<T>&,           \
                                                const Tensor<T>&, bool);    \
  template CorrelationPyramid<T> build_pyramid<T>(const CostVolume<T>&);    \
  template Tensor<T> search_lookup<T>(const CorrelationPyramid<T>&,         \
                                      const Tensor<T>&, const Tensor<T>&,   \
                                      int);

SREG_INSTANTIATE_CORR(float)
SREG_INSTANTIATE_CORR(double)

}  // namespace sreg
