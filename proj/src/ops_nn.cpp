#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

#include "searchreg/gemm.hpp"
#include "searchreg/ops.hpp"

namespace sreg {
namespace {

struct ConvDims {
  int n, c, h, w;      // input
  int k, kh, kw;       // weight
  int oh, ow;          // output
};

template <typename T>
void im2col(const T* in, const ConvDims& d, int stride, int pad, T* col) {
  const int ohw = d.oh * d.ow;
#pragma omp parallel for schedule(static) if (std::size_t(d.c) * d.kh * d.kw * ohw > (1u << 16))
  for (int c = 0; c < d.c; ++c) {
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx) {
        T* dst = col + std::size_t((c * d.kh + ky) * d.kw + kx) * ohw;
        for (int oy = 0; oy < d.oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          T* drow = dst + std::size_t(oy) * d.ow;
          if (iy < 0 || iy >= d.h) {
            std::memset(drow, 0, sizeof(T) * d.ow);
            continue;
          }
          const T* srow = in + (std::size_t(c) * d.h + iy) * d.w;
          for (int ox = 0; ox < d.ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            drow[ox] = (ix >= 0 && ix < d.w) ? srow[ix] : T(0);
          }
        }
      }
    }
  }
}

// Scatters gradients back per input channel; channels are disjoint so the
// parallel loop stays deterministic.
template <typename T>
void col2im_add(const T* col, const ConvDims& d, int stride, int pad, T* gin) {
  const int ohw = d.oh * d.ow;
#pragma omp parallel for schedule(static) if (std::size_t(d.c) * d.kh * d.kw * ohw > (1u << 16))
  for (int c = 0; c < d.c; ++c) {
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx) {
        const T* src = col + std::size_t((c * d.kh + ky) * d.kw + kx) * ohw;
        for (int oy = 0; oy < d.oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= d.h) continue;
          T* grow = gin + (std::size_t(c) * d.h + iy) * d.w;
          const T* srow = src + std::size_t(oy) * d.ow;
          for (int ox = 0; ox < d.ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < d.w) grow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight,
                 const Tensor<T>& bias, int stride, int padding) {
  const bool batched = input.rank() == 4;
  if (!batched && input.rank() != 3)
    throw std::invalid_argument("conv2d: input must be [N,C,H,W] or [C,H,W]");
  if (weight.rank() != 4)
    throw std::invalid_argument("conv2d: weight must be [K,C,kh,kw]");
  if (stride < 1 || padding < 0)
    throw std::invalid_argument("conv2d: stride must be >= 1, padding >= 0");

  ConvDims d;
  d.n = batched ? input.dim(0) : 1;
  d.c = input.dim(batched ? 1 : 0);
  d.h = input.dim(-2);
  d.w = input.dim(-1);
  d.k = weight.dim(0);
  d.kh = weight.dim(2);
  d.kw = weight.dim(3);
  if (weight.dim(1) != d.c)
    throw std::invalid_argument("conv2d: input channels " + std::to_string(d.c) +
                                " do not match weight channels " +
                                std::to_string(weight.dim(1)));
  if (d.kh % 2 == 0 || d.kw % 2 == 0)
    throw std::invalid_argument("conv2d: kernel sides must be odd");
  d.oh = (d.h + 2 * padding - d.kh) / stride + 1;
  d.ow = (d.w + 2 * padding - d.kw) / stride + 1;
  if (d.oh <= 0 || d.ow <= 0)
    throw std::invalid_argument("conv2d: output would be empty");
  const bool has_bias = bias.defined() && bias.numel() > 0;
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != d.k))
    throw std::invalid_argument("conv2d: bias must be [K]");

  const int ckk = d.c * d.kh * d.kw;
  const int ohw = d.oh * d.ow;
  const std::size_t in_plane = std::size_t(d.c) * d.h * d.w;
  const std::size_t out_plane = std::size_t(d.k) * ohw;

  std::vector<T> out(std::size_t(d.n) * out_plane);
  // One im2col per batch entry, kept alive for the backward pass (the
  // weight-gradient GEMM reuses it). Raw arrays skip the zero fill.
  auto cols = std::make_shared<std::vector<std::unique_ptr<T[]>>>();
  cols->resize(std::size_t(d.n));
  const T* in = input.values().data();
  const T* wv = weight.values().data();
  const bool track = detail::tracked(input) || detail::tracked(weight) ||
                     (has_bias && detail::tracked(bias));
  for (int n = 0; n < d.n; ++n) {
    auto& col = (*cols)[std::size_t(n)];
    col.reset(new T[std::size_t(ckk) * ohw]);
    im2col(in + n * in_plane, d, stride, padding, col.get());
    gemm(d.k, ohw, ckk, wv, col.get(), out.data() + n * out_plane, false);
    if (has_bias) {
      const auto bv = bias.values();
      for (int k = 0; k < d.k; ++k) {
        T* row = out.data() + n * out_plane + std::size_t(k) * ohw;
        for (int s = 0; s < ohw; ++s) row[s] += bv[std::size_t(k)];
      }
    }
  }

  Shape out_shape = batched ? Shape{d.n, d.k, d.oh, d.ow} : Shape{d.k, d.oh, d.ow};
  Tensor<T> y = detail::op_result(std::move(out_shape), std::move(out), track);
  if (!track) return y;

  detail::record_pull(y, [yn = y.node(), xn = input.node(), wn = weight.node(),
                          bn = has_bias ? bias.node() : nullptr, cols, d,
                          stride, padding, ckk, ohw, in_plane, out_plane] {
    const T* g = yn->grad.data();
    if (bn && bn->requires_grad) {
      bn->ensure_grad();
      for (int n = 0; n < d.n; ++n)
        for (int k = 0; k < d.k; ++k) {
          T s = T(0);
          const T* row = g + n * out_plane + std::size_t(k) * ohw;
          for (int i = 0; i < ohw; ++i) s += row[i];
          bn->grad[std::size_t(k)] += s;
        }
    }
    const bool need_w = wn->requires_grad;
    const bool need_x = xn->requires_grad;
    if (!need_w && !need_x) return;
    if (need_w) wn->ensure_grad();
    if (need_x) xn->ensure_grad();
    std::unique_ptr<T[]> gcol;
    if (need_x) gcol.reset(new T[std::size_t(ckk) * ohw]);
    for (int n = 0; n < d.n; ++n) {
      const T* gout = g + n * out_plane;
      if (need_w)
        gemm_nt(d.k, ckk, ohw, gout, (*cols)[std::size_t(n)].get(),
                wn->grad.data(), true);
      if (need_x) {
        gemm_tn(ckk, ohw, d.k, wn->values.data(), gout, gcol.get(), false);
        col2im_add(gcol.get(), d, stride, padding,
                   xn->grad.data() + n * in_plane);
      }
    }
  });
  return y;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, int stride,
                 int padding) {
  return conv2d(input, weight, Tensor<T>(), stride, padding);
}

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& input, int kernel) {
  if (kernel <= 0) throw std::invalid_argument("avg_pool2d: kernel must be > 0");
  if (input.rank() < 2)
    throw std::invalid_argument("avg_pool2d: input needs trailing [H,W] dims");
  const int h = input.dim(-2), w = input.dim(-1);
  const int oh = (h + kernel - 1) / kernel;
  const int ow = (w + kernel - 1) / kernel;
  const std::size_t lead = std::size_t(input.numel() / (std::int64_t(h) * w));

  Shape out_shape = input.shape();
  out_shape[out_shape.size() - 2] = oh;
  out_shape[out_shape.size() - 1] = ow;

  const T* in = input.values().data();
  std::vector<T> out(lead * oh * ow);
  const T inv = T(1) / T(kernel * kernel);
#pragma omp parallel for schedule(static) if (lead * oh * ow * kernel * kernel > (1u << 16))
  for (std::size_t l = 0; l < lead; ++l) {
    const T* plane = in + l * h * w;
    T* oplane = out.data() + l * oh * ow;
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        T s = T(0);
        for (int ky = 0; ky < kernel; ++ky) {
          const int iy = std::min(oy * kernel + ky, h - 1);
          for (int kx = 0; kx < kernel; ++kx) {
            const int ix = std::min(ox * kernel + kx, w - 1);
            s += plane[std::size_t(iy) * w + ix];
          }
        }
        oplane[std::size_t(oy) * ow + ox] = s * inv;
      }
  }

  Tensor<T> y =
      detail::op_result(std::move(out_shape), std::move(out), detail::tracked(input));
  detail::record_pull(y, [yn = y.node(), xn = input.node(), h, w, oh, ow,
                          kernel, lead, inv] {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
#pragma omp parallel for schedule(static) if (lead * oh * ow * kernel * kernel > (1u << 16))
    for (std::size_t l = 0; l < lead; ++l) {
      const T* gplane = yn->grad.data() + l * oh * ow;
      T* xg = xn->grad.data() + l * h * w;
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          const T g = gplane[std::size_t(oy) * ow + ox] * inv;
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = std::min(oy * kernel + ky, h - 1);
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = std::min(ox * kernel + kx, w - 1);
              xg[std::size_t(iy) * w + ix] += g;
            }
          }
        }
    }
  });
  return y;
}

template <typename T>
Tensor<T> grid_sample(const Tensor<T>& input, const Tensor<T>& coords) {
  if (input.rank() != 3)
    throw std::invalid_argument("grid_sample: input must be [C,H,W]");
  if (coords.rank() != 3 || coords.dim(0) != 2)
    throw std::invalid_argument("grid_sample: coords must be [2,H,W]");
  const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int oh = coords.dim(1), ow = coords.dim(2);
  const std::size_t opix = std::size_t(oh) * ow;

  const T* in = input.values().data();
  const T* cv = coords.values().data();
  std::vector<T> out(std::size_t(c) * opix);
  for (std::size_t p = 0; p < opix; ++p) {
    const T x = detail::clamp_coord(cv[p], T(w - 1));
    const T y = detail::clamp_coord(cv[opix + p], T(h - 1));
    const int x0 = int(std::floor(x)), y0 = int(std::floor(y));
    const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    const T wx = x - T(x0), wy = y - T(y0);
    for (int ch = 0; ch < c; ++ch) {
      const T* plane = in + std::size_t(ch) * h * w;
      const T top = (T(1) - wx) * plane[std::size_t(y0) * w + x0] +
                    wx * plane[std::size_t(y0) * w + x1];
      const T bot = (T(1) - wx) * plane[std::size_t(y1) * w + x0] +
                    wx * plane[std::size_t(y1) * w + x1];
      out[std::size_t(ch) * opix + p] = (T(1) - wy) * top + wy * bot;
    }
  }

  Tensor<T> y = detail::op_result(Shape{c, oh, ow}, std::move(out),
                                  detail::tracked(input) || detail::tracked(coords));
  detail::record_pull(y, [yn = y.node(), xn = input.node(), cn = coords.node(),
                          c, h, w, opix] {
    const bool need_in = xn->requires_grad;
    const bool need_co = cn->requires_grad;
    if (!need_in && !need_co) return;
    if (need_in) xn->ensure_grad();
    if (need_co) cn->ensure_grad();
    const T* cv = cn->values.data();
    const T* in = xn->values.data();
    for (std::size_t p = 0; p < opix; ++p) {
      const T xr = cv[p], yr = cv[opix + p];
      const T x = detail::clamp_coord(xr, T(w - 1));
      const T y = detail::clamp_coord(yr, T(h - 1));
      const int x0 = int(std::floor(x)), y0 = int(std::floor(y));
      const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const T wx = x - T(x0), wy = y - T(y0);
      const bool in_x = xr >= T(0) && xr <= T(w - 1);
      const bool in_y = yr >= T(0) && yr <= T(h - 1);
      T gx = T(0), gy = T(0);
      for (int ch = 0; ch < c; ++ch) {
        const T g = yn->grad[std::size_t(ch) * opix + p];
        if (g == T(0)) continue;
        const std::size_t base = std::size_t(ch) * h * w;
        const T v00 = in[base + std::size_t(y0) * w + x0];
        const T v01 = in[base + std::size_t(y0) * w + x1];
        const T v10 = in[base + std::size_t(y1) * w + x0];
        const T v11 = in[base + std::size_t(y1) * w + x1];
        if (need_in) {
          xn->grad[base + std::size_t(y0) * w + x0] += g * (T(1) - wx) * (T(1) - wy);
          xn->grad[base + std::size_t(y0) * w + x1] += g * wx * (T(1) - wy);
          xn->grad[base + std::size_t(y1) * w + x0] += g * (T(1) - wx) * wy;
          xn->grad[base + std::size_t(y1) * w + x1] += g * wx * wy;
        }
        if (need_co) {
          gx += g * ((T(1) - wy) * (v01 - v00) + wy * (v11 - v10));
          gy += g * ((T(1) - wx) * (v10 - v00) + wx * (v11 - v01));
        }
      }
      if (need_co) {
        if (in_x) cn->grad[p] += gx;
        if (in_y) cn->grad[opix + p] += gy;
      }
    }
  });
  return y;
}

template <typename T>
Tensor<T> identity_coords(int height, int width) {
  std::vector<T> v(std::size_t(2) * height * width);
  const std::size_t plane = std::size_t(height) * width;
  for (int j = 0; j < height; ++j)
    for (int i = 0; i < width; ++i) {
      v[std::size_t(j) * width + i] = T(i);
      v[plane + std::size_t(j) * width + i] = T(j);
    }
  return Tensor<T>::from_data(Shape{2, height, width}, std::move(v));
}

template <typename T>
Tensor<T> upsample2x_bilinear(const Tensor<T>& x) {
  if (x.rank() != 3)
    throw std::invalid_argument("upsample2x_bilinear: input must be [C,H,W]");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int oh = 2 * h, ow = 2 * w;
  const T* in = x.values().data();
  std::vector<T> out(std::size_t(c) * oh * ow);
  for (int oy = 0; oy < oh; ++oy) {
    const T sy = std::clamp(T(oy) * T(0.5) - T(0.25), T(0), T(h - 1));
    const int y0 = int(std::floor(sy));
    const int y1 = std::min(y0 + 1, h - 1);
    const T wy = sy - T(y0);
    for (int ox = 0; ox < ow; ++ox) {
      const T sx = std::clamp(T(ox) * T(0.5) - T(0.25), T(0), T(w - 1));
      const int x0 = int(std::floor(sx));
      const int x1 = std::min(x0 + 1, w - 1);
      const T wx = sx - T(x0);
      for (int ch = 0; ch < c; ++ch) {
        const T* plane = in + std::size_t(ch) * h * w;
        const T top = (T(1) - wx) * plane[std::size_t(y0) * w + x0] +
                      wx * plane[std::size_t(y0) * w + x1];
        const T bot = (T(1) - wx) * plane[std::size_t(y1) * w + x0] +
                      wx * plane[std::size_t(y1) * w + x1];
        out[(std::size_t(ch) * oh + oy) * ow + ox] = (T(1) - wy) * top + wy * bot;
      }
    }
  }
  Tensor<T> y = detail::op_result(Shape{c, oh, ow}, std::move(out),
                                  detail::tracked(x));
  detail::record_pull(y, [yn = y.node(), xn = x.node(), c, h, w, oh, ow] {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int oy = 0; oy < oh; ++oy) {
      const T sy = std::clamp(T(oy) * T(0.5) - T(0.25), T(0), T(h - 1));
      const int y0 = int(std::floor(sy));
      const int y1 = std::min(y0 + 1, h - 1);
      const T wy = sy - T(y0);
      for (int ox = 0; ox < ow; ++ox) {
        const T sx = std::clamp(T(ox) * T(0.5) - T(0.25), T(0), T(w - 1));
        const int x0 = int(std::floor(sx));
        const int x1 = std::min(x0 + 1, w - 1);
        const T wx = sx - T(x0);
        for (int ch = 0; ch < c; ++ch) {
          const T g = yn->grad[(std::size_t(ch) * oh + oy) * ow + ox];
          T* gp = xn->grad.data() + std::size_t(ch) * h * w;
          gp[std::size_t(y0) * w + x0] += g * (T(1) - wx) * (T(1) - wy);
          gp[std::size_t(y0) * w + x1] += g * wx * (T(1) - wy);
          gp[std::size_t(y1) * w + x0] += g * (T(1) - wx) * wy;
          gp[std::size_t(y1) * w + x1] += g * wx * wy;
        }
      }
    }
  });
  return y;
}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, Tensor<T>& running_mean,
                     Tensor<T>& running_var, bool training, T momentum, T eps) {
  const bool batched = x.rank() == 4;
  if (!batched && x.rank() != 3)
    throw std::invalid_argument("batch_norm: input must be [N,C,H,W] or [C,H,W]");
  const int n = batched ? x.dim(0) : 1;
  const int c = x.dim(batched ? 1 : 0);
  const int h = x.dim(-2), w = x.dim(-1);
  if (gamma.numel() != c || beta.numel() != c || running_mean.numel() != c ||
      running_var.numel() != c)
    throw std::invalid_argument("batch_norm: per-channel params must be [C]");

  const std::size_t plane = std::size_t(h) * w;
  const std::size_t cstride = plane;
  const std::size_t nstride = std::size_t(c) * plane;
  const T m = T(n) * T(plane);

  const T* in = x.values().data();
  const auto gv = gamma.values();
  const auto bv = beta.values();

  std::vector<T> mu(std::size_t(c), T(0));
  std::vector<T> invstd(std::size_t(c), T(0));
  if (training) {
    for (int ch = 0; ch < c; ++ch) {
      T s = T(0);
      for (int b = 0; b < n; ++b) {
        const T* p = in + b * nstride + ch * cstride;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      const T mean_c = s / m;
      T var_c = T(0);
      for (int b = 0; b < n; ++b) {
        const T* p = in + b * nstride + ch * cstride;
        for (std::size_t i = 0; i < plane; ++i) {
          const T d = p[i] - mean_c;
          var_c += d * d;
        }
      }
      var_c /= m;
      mu[std::size_t(ch)] = mean_c;
      invstd[std::size_t(ch)] = T(1) / std::sqrt(var_c + eps);
      running_mean.values_mut()[std::size_t(ch)] =
          (T(1) - momentum) * running_mean.values()[std::size_t(ch)] +
          momentum * mean_c;
      running_var.values_mut()[std::size_t(ch)] =
          (T(1) - momentum) * running_var.values()[std::size_t(ch)] +
          momentum * var_c;
    }
  } else {
    for (int ch = 0; ch < c; ++ch) {
      mu[std::size_t(ch)] = running_mean.values()[std::size_t(ch)];
      invstd[std::size_t(ch)] =
          T(1) / std::sqrt(running_var.values()[std::size_t(ch)] + eps);
    }
  }

  std::vector<T> out(x.values().size());
  for (int b = 0; b < n; ++b)
    for (int ch = 0; ch < c; ++ch) {
      const T* p = in + b * nstride + ch * cstride;
      T* o = out.data() + b * nstride + ch * cstride;
      const T mc = mu[std::size_t(ch)], is = invstd[std::size_t(ch)];
      const T gc = gv[std::size_t(ch)], bc = bv[std::size_t(ch)];
      for (std::size_t i = 0; i < plane; ++i) o[i] = gc * (p[i] - mc) * is + bc;
    }

  const bool track = detail::tracked(x) || detail::tracked(gamma) ||
                     detail::tracked(beta);
  Tensor<T> y = detail::op_result(x.shape(), std::move(out), track);
  detail::record_pull(y, [yn = y.node(), xn = x.node(), gn = gamma.node(),
                          btn = beta.node(), mu = std::move(mu),
                          invstd = std::move(invstd), n, c, plane, nstride,
                          cstride, m, training] {
    const T* in = xn->values.data();
    const T* g = yn->grad.data();
    if (btn->requires_grad) btn->ensure_grad();
    if (gn->requires_grad) gn->ensure_grad();
    if (xn->requires_grad) xn->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      const T mc = mu[std::size_t(ch)], is = invstd[std::size_t(ch)];
      const T gc = gn->values[std::size_t(ch)];
      T sum_g = T(0), sum_gx = T(0);
      for (int b = 0; b < n; ++b) {
        const T* gp = g + b * nstride + ch * cstride;
        const T* xp = in + b * nstride + ch * cstride;
        for (std::size_t i = 0; i < plane; ++i) {
          sum_g += gp[i];
          sum_gx += gp[i] * (xp[i] - mc) * is;
        }
      }
      if (btn->requires_grad) btn->grad[std::size_t(ch)] += sum_g;
      if (gn->requires_grad) gn->grad[std::size_t(ch)] += sum_gx;
      if (!xn->requires_grad) continue;
      if (training) {
        const T mean_g = sum_g / m;
        const T mean_gx = sum_gx / m;
        for (int b = 0; b < n; ++b) {
          const T* gp = g + b * nstride + ch * cstride;
          const T* xp = in + b * nstride + ch * cstride;
          T* xg = xn->grad.data() + b * nstride + ch * cstride;
          for (std::size_t i = 0; i < plane; ++i) {
            const T xhat = (xp[i] - mc) * is;
            xg[i] += gc * is * (gp[i] - mean_g - xhat * mean_gx);
          }
        }
      } else {
        for (int b = 0; b < n; ++b) {
          const T* gp = g + b * nstride + ch * cstride;
          T* xg = xn->grad.data() + b * nstride + ch * cstride;
          for (std::size_t i = 0; i < plane; ++i) xg[i] += gc * is * gp[i];
        }
      }
    }
  });
  return y;
}

#define SREG_INSTANTIATE_NN(T)                                                 \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&,             \
                               const Tensor<T>&, int, int);                    \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, int, int);  \
  template Tensor<T> avg_pool2d<T>(const Tensor<T>&, int);                     \
  template Tensor<T> grid_sample<T>(const Tensor<T>&, const Tensor<T>&);       \
  template Tensor<T> identity_coords<T>(int, int);                             \
  template Tensor<T> upsample2x_bilinear<T>(const Tensor<T>&);                 \
  template Tensor<T> batch_norm<T>(const Tensor<T>&, const Tensor<T>&,         \
                                   const Tensor<T>&, Tensor<T>&, Tensor<T>&,   \
                                   bool, T, T);

SREG_INSTANTIATE_NN(float)
SREG_INSTANTIATE_NN(double)

}  // namespace sreg
