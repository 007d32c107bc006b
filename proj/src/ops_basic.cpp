#include <cmath>
#include <cstring>

#include "searchreg/ops.hpp"

namespace sreg {
namespace {

template <typename T>
void check_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_to_string(a.shape()) + " vs " +
                                shape_to_string(b.shape()));
}

template <typename T>
void axpy(std::span<T> dst, std::span<const T> src, T factor) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += factor * src[i];
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape("add", a, b);
  const auto av = a.values(), bv = b.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  Tensor<T> y = detail::op_result(a.shape(), std::move(out),
                                  detail::tracked(a) || detail::tracked(b));
  detail::record_pull(y, [yn = y.node(), an = a.node(), bn = b.node()] {
    if (an->requires_grad) {
      an->ensure_grad();
      axpy<T>(an->grad, yn->grad, T(1));
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      axpy<T>(bn->grad, yn->grad, T(1));
    }
  });
  return y;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape("sub", a, b);
  const auto av = a.values(), bv = b.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  Tensor<T> y = detail::op_result(a.shape(), std::move(out),
                                  detail::tracked(a) || detail::tracked(b));
  detail::record_pull(y, [yn = y.node(), an = a.node(), bn = b.node()] {
    if (an->requires_grad) {
      an->ensure_grad();
      axpy<T>(an->grad, yn->grad, T(1));
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      axpy<T>(bn->grad, yn->grad, T(-1));
    }
  });
  return y;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape("mul", a, b);
  const auto av = a.values(), bv = b.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  Tensor<T> y = detail::op_result(a.shape(), std::move(out),
                                  detail::tracked(a) || detail::tracked(b));
  detail::record_pull(y, [yn = y.node(), an = a.node(), bn = b.node()] {
    const auto& g = yn->grad;
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i)
        an->grad[i] += g[i] * bn->values[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i)
        bn->grad[i] += g[i] * an->values[i];
    }
  });
  return y;
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape("div", a, b);
  const auto av = a.values(), bv = b.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] / bv[i];
  Tensor<T> y = detail::op_result(a.shape(), std::move(out),
                                  detail::tracked(a) || detail::tracked(b));
  detail::record_pull(y, [yn = y.node(), an = a.node(), bn = b.node()] {
    const auto& g = yn->grad;
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i)
        an->grad[i] += g[i] / bn->values[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const T bb = bn->values[i];
        bn->grad[i] -= g[i] * an->values[i] / (bb * bb);
      }
    }
  });
  return y;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  const auto av = a.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * av[i];
  Tensor<T> y = detail::op_result(a.shape(), std::move(out), detail::tracked(a));
  detail::record_pull(y, [yn = y.node(), an = a.node(), factor] {
    if (an->requires_grad) {
      an->ensure_grad();
      axpy<T>(an->grad, yn->grad, factor);
    }
  });
  return y;
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T value) {
  const auto av = a.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + value;
  Tensor<T> y = detail::op_result(a.shape(), std::move(out), detail::tracked(a));
  detail::record_pull(y, [yn = y.node(), an = a.node()] {
    if (an->requires_grad) {
      an->ensure_grad();
      axpy<T>(an->grad, yn->grad, T(1));
    }
  });
  return y;
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  const auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = xv[i] > T(0) ? xv[i] : slope * xv[i];
  Tensor<T> y = detail::op_result(x.shape(), std::move(out), detail::tracked(x));
  detail::record_pull(y, [yn = y.node(), xn = x.node(), slope] {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (std::size_t i = 0; i < yn->grad.size(); ++i)
      xn->grad[i] += yn->grad[i] * (xn->values[i] > T(0) ? T(1) : slope);
  });
  return y;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  const auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = T(1) / (T(1) + std::exp(-xv[i]));
  Tensor<T> y = detail::op_result(x.shape(), std::move(out), detail::tracked(x));
  detail::record_pull(y, [yn = y.node(), xn = x.node()] {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (std::size_t i = 0; i < yn->grad.size(); ++i) {
      const T s = yn->values[i];
      xn->grad[i] += yn->grad[i] * s * (T(1) - s);
    }
  });
  return y;
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  const auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(xv[i]);
  Tensor<T> y = detail::op_result(x.shape(), std::move(out), detail::tracked(x));
  detail::record_pull(y, [yn = y.node(), xn = x.node()] {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (std::size_t i = 0; i < yn->grad.size(); ++i) {
      const T t = yn->values[i];
      xn->grad[i] += yn->grad[i] * (T(1) - t * t);
    }
  });
  return y;
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& x) {
  const auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(xv[i]);
  Tensor<T> y = detail::op_result(x.shape(), std::move(out), detail::tracked(x));
  detail::record_pull(y, [yn = y.node(), xn = x.node()] {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (std::size_t i = 0; i < yn->grad.size(); ++i)
      xn->grad[i] += yn->grad[i] * T(0.5) / yn->values[i];
  });
  return y;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  const auto xv = x.values();
  T total = T(0);
  for (T v : xv) total += v;
  Tensor<T> y = detail::op_result(Shape{}, std::vector<T>{total},
                                  detail::tracked(x));
  detail::record_pull(y, [yn = y.node(), xn = x.node()] {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    const T g = yn->grad[0];
    for (auto& v : xn->grad) v += g;
  });
  return y;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.numel() == 0) throw std::invalid_argument("mean: empty tensor");
  const auto xv = x.values();
  T total = T(0);
  for (T v : xv) total += v;
  const T inv = T(1) / T(xv.size());
  Tensor<T> y = detail::op_result(Shape{}, std::vector<T>{total * inv},
                                  detail::tracked(x));
  detail::record_pull(y, [yn = y.node(), xn = x.node(), inv] {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    const T g = yn->grad[0] * inv;
    for (auto& v : xn->grad) v += g;
  });
  return y;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw std::invalid_argument("reshape: element count mismatch " +
                                shape_to_string(x.shape()) + " -> " +
                                shape_to_string(shape));
  std::vector<T> out(x.values().begin(), x.values().end());
  Tensor<T> y =
      detail::op_result(std::move(shape), std::move(out), detail::tracked(x));
  detail::record_pull(y, [yn = y.node(), xn = x.node()] {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    axpy<T>(xn->grad, yn->grad, T(1));
  });
  return y;
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
  const int h = parts[0].dim(1), w = parts[0].dim(2);
  int channels = 0;
  bool track = false;
  for (const auto& p : parts) {
    if (p.rank() != 3 || p.dim(1) != h || p.dim(2) != w)
      throw std::invalid_argument(
          "concat_channels: inputs must be [C,H,W] with matching H,W");
    channels += p.dim(0);
    track = track || detail::tracked(p);
  }
  std::vector<T> out;
  out.reserve(std::size_t(channels) * h * w);
  for (const auto& p : parts)
    out.insert(out.end(), p.values().begin(), p.values().end());
  Tensor<T> y = detail::op_result(Shape{channels, h, w}, std::move(out), track);

  std::vector<std::shared_ptr<detail::TensorNode<T>>> nodes;
  nodes.reserve(parts.size());
  for (const auto& p : parts) nodes.push_back(p.node());
  detail::record_pull(y, [yn = y.node(), nodes = std::move(nodes)] {
    std::size_t offset = 0;
    for (auto& n : nodes) {
      if (n->requires_grad) {
        n->ensure_grad();
        for (std::size_t i = 0; i < n->values.size(); ++i)
          n->grad[i] += yn->grad[offset + i];
      }
      offset += n->values.size();
    }
  });
  return y;
}

template <typename T>
Tensor<T> concat_dim0(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_dim0: no inputs");
  Shape shape = parts[0].shape();
  bool track = false;
  int dim0 = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != shape.size())
      throw std::invalid_argument("concat_dim0: rank mismatch");
    s[0] = shape[0];
    if (s != shape)
      throw std::invalid_argument("concat_dim0: trailing dims differ");
    dim0 += p.dim(0);
    track = track || detail::tracked(p);
  }
  shape[0] = dim0;
  std::vector<T> out;
  out.reserve(std::size_t(shape_numel(shape)));
  for (const auto& p : parts)
    out.insert(out.end(), p.values().begin(), p.values().end());
  Tensor<T> y = detail::op_result(std::move(shape), std::move(out), track);
  std::vector<std::shared_ptr<detail::TensorNode<T>>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  detail::record_pull(y, [yn = y.node(), nodes = std::move(nodes)] {
    std::size_t offset = 0;
    for (auto& n : nodes) {
      if (n->requires_grad) {
        n->ensure_grad();
        for (std::size_t i = 0; i < n->values.size(); ++i)
          n->grad[i] += yn->grad[offset + i];
      }
      offset += n->values.size();
    }
  });
  return y;
}

template <typename T>
Tensor<T> concat_dim1(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_dim1: no inputs");
  Shape shape = parts[0].shape();
  if (shape.size() < 2)
    throw std::invalid_argument("concat_dim1: need rank >= 2");
  const int outer = shape[0];
  std::size_t inner = 1;
  for (std::size_t i = 2; i < shape.size(); ++i) inner *= std::size_t(shape[i]);
  bool track = false;
  int dim1 = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != shape.size() || s[0] != outer)
      throw std::invalid_argument("concat_dim1: shape mismatch");
    s[1] = shape[1];
    if (s != shape)
      throw std::invalid_argument("concat_dim1: trailing dims differ");
    dim1 += p.dim(1);
    track = track || detail::tracked(p);
  }
  shape[1] = dim1;
  std::vector<T> out(std::size_t(shape_numel(shape)));
  const std::size_t row = std::size_t(dim1) * inner;
  std::size_t col_offset = 0;
  for (const auto& p : parts) {
    const std::size_t block = std::size_t(p.dim(1)) * inner;
    const auto pv = p.values();
    for (int o = 0; o < outer; ++o)
      std::memcpy(out.data() + std::size_t(o) * row + col_offset,
                  pv.data() + std::size_t(o) * block, block * sizeof(T));
    col_offset += block;
  }
  Tensor<T> y = detail::op_result(std::move(shape), std::move(out), track);
  std::vector<std::shared_ptr<detail::TensorNode<T>>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  detail::record_pull(y, [yn = y.node(), nodes = std::move(nodes), outer, row,
                          inner] {
    std::size_t col_offset = 0;
    for (auto& n : nodes) {
      const std::size_t block = n->values.size() / std::size_t(outer);
      if (n->requires_grad) {
        n->ensure_grad();
        for (int o = 0; o < outer; ++o) {
          const T* g = yn->grad.data() + std::size_t(o) * row + col_offset;
          T* dst = n->grad.data() + std::size_t(o) * block;
          for (std::size_t i = 0; i < block; ++i) dst[i] += g[i];
        }
      }
      col_offset += block;
    }
    (void)inner;
  });
  return y;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, int begin, int end) {
  if (x.rank() != 3)
    throw std::invalid_argument("slice_channels: input must be [C,H,W]");
  if (begin < 0 || end > x.dim(0) || begin >= end)
    throw std::invalid_argument("slice_channels: bad range");
  const std::size_t plane = std::size_t(x.dim(1)) * x.dim(2);
  const auto xv = x.values();
  std::vector<T> out(xv.begin() + long(begin * plane),
                     xv.begin() + long(end * plane));
  Tensor<T> y = detail::op_result(Shape{end - begin, x.dim(1), x.dim(2)},
                                  std::move(out), detail::tracked(x));
  detail::record_pull(y, [yn = y.node(), xn = x.node(), begin, plane] {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    const std::size_t offset = std::size_t(begin) * plane;
    for (std::size_t i = 0; i < yn->grad.size(); ++i)
      xn->grad[offset + i] += yn->grad[i];
  });
  return y;
}

template <typename T>
Tensor<T> crop2d(const Tensor<T>& x, int row0, int row1, int col0, int col1) {
  if (x.rank() != 2) throw std::invalid_argument("crop2d: input must be [H,W]");
  const int h = x.dim(0), w = x.dim(1);
  if (row0 < 0 || col0 < 0 || row1 > h || col1 > w || row0 >= row1 ||
      col0 >= col1)
    throw std::invalid_argument("crop2d: window out of range");
  const int oh = row1 - row0, ow = col1 - col0;
  const auto xv = x.values();
  std::vector<T> out(std::size_t(oh) * ow);
  for (int r = 0; r < oh; ++r)
    std::memcpy(out.data() + std::size_t(r) * ow,
                xv.data() + std::size_t(r + row0) * w + col0, sizeof(T) * ow);
  Tensor<T> y =
      detail::op_result(Shape{oh, ow}, std::move(out), detail::tracked(x));
  detail::record_pull(y, [yn = y.node(), xn = x.node(), row0, col0, w, oh, ow] {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int r = 0; r < oh; ++r)
      for (int c = 0; c < ow; ++c)
        xn->grad[std::size_t(r + row0) * w + (c + col0)] +=
            yn->grad[std::size_t(r) * ow + c];
  });
  return y;
}

template <typename T>
bool all_finite(const Tensor<T>& x) {
  for (T v : x.values())
    if (!std::isfinite(v)) return false;
  return true;
}

#define SREG_INSTANTIATE_BASIC(T)                                           \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> div<T>(const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                         \
  template Tensor<T> add_scalar<T>(const Tensor<T>&, T);                    \
  template Tensor<T> leaky_relu<T>(const Tensor<T>&, T);                    \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                          \
  template Tensor<T> tanh<T>(const Tensor<T>&);                             \
  template Tensor<T> sqrt<T>(const Tensor<T>&);                             \
  template Tensor<T> sum<T>(const Tensor<T>&);                              \
  template Tensor<T> mean<T>(const Tensor<T>&);                             \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                   \
  template Tensor<T> concat_channels<T>(const std::vector<Tensor<T>>&);     \
  template Tensor<T> concat_dim0<T>(const std::vector<Tensor<T>>&);         \
  template Tensor<T> concat_dim1<T>(const std::vector<Tensor<T>>&);         \
  template Tensor<T> slice_channels<T>(const Tensor<T>&, int, int);         \
  template Tensor<T> crop2d<T>(const Tensor<T>&, int, int, int, int);       \
  template bool all_finite<T>(const Tensor<T>&);

SREG_INSTANTIATE_BASIC(float)
SREG_INSTANTIATE_BASIC(double)

}  // namespace sreg
