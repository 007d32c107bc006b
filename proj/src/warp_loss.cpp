#include "searchreg/warp_loss.hpp"

#include <algorithm>
#include <cmath>

#include "searchreg/ops.hpp"

namespace sreg {

LossConfig loss_config_from(const RegistrationConfig& cfg) {
  return LossConfig{cfg.similarity, cfg.alpha, cfg.lncc_window, cfg.lncc_signed};
}

template <typename T>
Tensor<T> warp(const Tensor<T>& image, const DeformationField<T>& field) {
  if (image.rank() != 3) throw std::invalid_argument("warp: image must be [C,H,W]");
  if (field.resolution != FieldResolution::full)
    throw std::invalid_argument("warp: field must be full resolution");
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (field.rows() != h || field.cols() != w)
    throw std::invalid_argument("warp: field size " +
                                shape_to_string(field.fx.shape()) +
                                " does not match image " +
                                shape_to_string(image.shape()));

  const std::size_t pix = std::size_t(h) * w;
  const T* fx = field.fx.values().data();
  const T* fy = field.fy.values().data();
  const T* in = image.values().data();
  std::vector<T> out(std::size_t(c) * pix);
  for (std::size_t p = 0; p < pix; ++p) {
    const T x = detail::clamp_coord(T(int(p % std::size_t(w))) + fx[p], T(w - 1));
    const T y = detail::clamp_coord(T(int(p / std::size_t(w))) + fy[p], T(h - 1));
    const int x0 = int(std::floor(x)), y0 = int(std::floor(y));
    const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    const T wx = x - T(x0), wy = y - T(y0);
    for (int ch = 0; ch < c; ++ch) {
      const T* plane = in + std::size_t(ch) * pix;
      const T top = (T(1) - wx) * plane[std::size_t(y0) * w + x0] +
                    wx * plane[std::size_t(y0) * w + x1];
      const T bot = (T(1) - wx) * plane[std::size_t(y1) * w + x0] +
                    wx * plane[std::size_t(y1) * w + x1];
      out[std::size_t(ch) * pix + p] = (T(1) - wy) * top + wy * bot;
    }
  }

  const bool track = detail::tracked(image) || detail::tracked(field.fx) ||
                     detail::tracked(field.fy);
  Tensor<T> y = detail::op_result(image.shape(), std::move(out), track);
  detail::record_pull(y, [yn = y.node(), xn = image.node(),
                          fxn = field.fx.node(), fyn = field.fy.node(), c, h, w,
                          pix] {
    const bool need_img = xn->requires_grad;
    const bool need_fx = fxn->requires_grad;
    const bool need_fy = fyn->requires_grad;
    if (need_img) xn->ensure_grad();
    if (need_fx) fxn->ensure_grad();
    if (need_fy) fyn->ensure_grad();
    const T* fx = fxn->values.data();
    const T* fy = fyn->values.data();
    const T* in = xn->values.data();
    for (std::size_t p = 0; p < pix; ++p) {
      const T xr = T(int(p % std::size_t(w))) + fx[p];
      const T yr = T(int(p / std::size_t(w))) + fy[p];
      const T x = detail::clamp_coord(xr, T(w - 1));
      const T y2 = detail::clamp_coord(yr, T(h - 1));
      const int x0 = int(std::floor(x)), y0 = int(std::floor(y2));
      const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const T wx = x - T(x0), wy = y2 - T(y0);
      T gx = T(0), gy = T(0);
      for (int ch = 0; ch < c; ++ch) {
        const T g = yn->grad[std::size_t(ch) * pix + p];
        if (g == T(0)) continue;
        const T* plane = in + std::size_t(ch) * pix;
        const T v00 = plane[std::size_t(y0) * w + x0];
        const T v01 = plane[std::size_t(y0) * w + x1];
        const T v10 = plane[std::size_t(y1) * w + x0];
        const T v11 = plane[std::size_t(y1) * w + x1];
        if (need_img) {
          T* gp = xn->grad.data() + std::size_t(ch) * pix;
          gp[std::size_t(y0) * w + x0] += g * (T(1) - wx) * (T(1) - wy);
          gp[std::size_t(y0) * w + x1] += g * wx * (T(1) - wy);
          gp[std::size_t(y1) * w + x0] += g * (T(1) - wx) * wy;
          gp[std::size_t(y1) * w + x1] += g * wx * wy;
        }
        gx += g * ((T(1) - wy) * (v01 - v00) + wy * (v11 - v10));
        gy += g * ((T(1) - wx) * (v10 - v00) + wx * (v11 - v01));
      }
      if (need_fx && xr >= T(0) && xr <= T(w - 1)) fxn->grad[p] += gx;
      if (need_fy && yr >= T(0) && yr <= T(h - 1)) fyn->grad[p] += gy;
    }
  });
  return y;
}

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument("mse_loss: shape mismatch " +
                                shape_to_string(a.shape()) + " vs " +
                                shape_to_string(b.shape()));
  Tensor<T> d = sub(a, b);
  return mean(mul(d, d));
}

template <typename T>
Tensor<T> lncc_loss(const Tensor<T>& a, const Tensor<T>& b, int window, T eps,
                    bool signed_mode) {
  if (window % 2 == 0 || window < 3)
    throw std::invalid_argument("lncc_loss: window must be odd and >= 3");
  if (a.rank() != 3 || a.dim(0) != 1)
    throw std::invalid_argument("lncc_loss: inputs must be [1,H,W]");
  if (a.shape() != b.shape())
    throw std::invalid_argument("lncc_loss: shape mismatch");
  if (a.dim(1) < window || a.dim(2) < window)
    throw std::invalid_argument("lncc_loss: image smaller than the window");

  // Valid-mode box sums give per-window statistics over interior pixels.
  Tensor<T> box = Tensor<T>::filled({1, 1, window, window}, T(1));
  const T n = T(window) * T(window);
  Tensor<T> sa = conv2d(a, box, 1, 0);
  Tensor<T> sb = conv2d(b, box, 1, 0);
  Tensor<T> saa = conv2d(mul(a, a), box, 1, 0);
  Tensor<T> sbb = conv2d(mul(b, b), box, 1, 0);
  Tensor<T> sab = conv2d(mul(a, b), box, 1, 0);

  Tensor<T> cross = sub(sab, scale(mul(sa, sb), T(1) / n));
  Tensor<T> var_a = sub(saa, scale(mul(sa, sa), T(1) / n));
  Tensor<T> var_b = sub(sbb, scale(mul(sb, sb), T(1) / n));
  Tensor<T> denom = add_scalar(mul(var_a, var_b), eps);
  if (signed_mode) {
    // corr = cross / sqrt(var_a * var_b + eps); loss = 1 - mean(corr)
    return add_scalar(scale(mean(div(cross, sqrt(denom))), T(-1)), T(1));
  }
  Tensor<T> corr2 = div(mul(cross, cross), denom);
  return add_scalar(scale(mean(corr2), T(-1)), T(1));
}

template <typename T>
Tensor<T> smoothness_loss(const DeformationField<T>& field) {
  const int h = field.rows(), w = field.cols();
  if (h < 2 || w < 2)
    throw std::invalid_argument("smoothness_loss: field must be at least 2x2");
  const T inv = T(1) / (T(h - 1) * T(w - 1));
  Tensor<T> acc;
  bool first = true;
  for (const Tensor<T>* comp : {&field.fx, &field.fy}) {
    Tensor<T> dx = sub(crop2d(*comp, 0, h - 1, 1, w), crop2d(*comp, 0, h - 1, 0, w - 1));
    Tensor<T> dy = sub(crop2d(*comp, 1, h, 0, w - 1), crop2d(*comp, 0, h - 1, 0, w - 1));
    Tensor<T> e = add(sum(mul(dx, dx)), sum(mul(dy, dy)));
    acc = first ? e : add(acc, e);
    first = false;
  }
  return scale(acc, inv);
}

template <typename T>
Tensor<T> total_loss(const Tensor<T>& moving, const Tensor<T>& fixed,
                     const DeformationField<T>& field, const LossConfig& cfg) {
  Tensor<T> warped = warp(moving, field);
  Tensor<T> sim = cfg.similarity == Similarity::mse
                      ? mse_loss(warped, fixed)
                      : lncc_loss(warped, fixed, cfg.lncc_window, T(1e-5),
                                  cfg.lncc_signed);
  return add(sim, scale(smoothness_loss(field), T(cfg.alpha)));
}

#define SREG_INSTANTIATE_WARP(T)                                              \
  template Tensor<T> warp<T>(const Tensor<T>&, const DeformationField<T>&);   \
  template Tensor<T> mse_loss<T>(const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> lncc_loss<T>(const Tensor<T>&, const Tensor<T>&, int, T, \
                                  bool);                                      \
  template Tensor<T> smoothness_loss<T>(const DeformationField<T>&);          \
  template Tensor<T> total_loss<T>(const Tensor<T>&, const Tensor<T>&,        \
                                   const DeformationField<T>&,                \
                                   const LossConfig&);

SREG_INSTANTIATE_WARP(float)
SREG_INSTANTIATE_WARP(double)

}  // namespace sreg
