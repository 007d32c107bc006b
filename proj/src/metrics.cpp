#include "searchreg/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <stdexcept>

namespace sreg {

double dice(const LabelMask& a, const LabelMask& b, std::int32_t label) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw std::invalid_argument("dice: mask sizes differ");
  std::int64_t na = 0, nb = 0, overlap = 0;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    const bool in_a = a.labels[i] == label;
    const bool in_b = b.labels[i] == label;
    na += in_a;
    nb += in_b;
    overlap += in_a && in_b;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * double(overlap) / double(na + nb);
}

std::vector<std::int32_t> label_set(const LabelMask& a, const LabelMask& b) {
  std::set<std::int32_t> s;
  for (auto v : a.labels)
    if (v != 0) s.insert(v);
  for (auto v : b.labels)
    if (v != 0) s.insert(v);
  return {s.begin(), s.end()};
}

double mean_dice(const LabelMask& a, const LabelMask& b) {
  const auto labels = label_set(a, b);
  if (labels.empty()) return 1.0;
  double total = 0;
  for (auto l : labels) total += dice(a, b, l);
  return total / double(labels.size());
}

namespace {

template <typename T>
double folding_ratio_impl(const DeformationField<T>& field) {
  if (field.resolution != FieldResolution::full)
    throw std::invalid_argument("folding_ratio: field must be full resolution");
  const int h = field.rows(), w = field.cols();
  if (h < 2 || w < 2) return 0.0;
  const auto fx = field.fx.values();
  const auto fy = field.fy.values();
  std::int64_t folded = 0;
  for (int r = 0; r < h - 1; ++r)
    for (int c = 0; c < w - 1; ++c) {
      const std::size_t i = std::size_t(r) * w + c;
      const T dfx_dx = fx[i + 1] - fx[i];
      const T dfx_dy = fx[i + std::size_t(w)] - fx[i];
      const T dfy_dx = fy[i + 1] - fy[i];
      const T dfy_dy = fy[i + std::size_t(w)] - fy[i];
      const T det = (T(1) + dfx_dx) * (T(1) + dfy_dy) - dfx_dy * dfy_dx;
      if (det <= T(0)) ++folded;
    }
  return double(folded) / (double(h - 1) * double(w - 1));
}

}  // namespace

double folding_ratio(const DeformationField<float>& field) {
  return folding_ratio_impl(field);
}
double folding_ratio(const DeformationField<double>& field) {
  return folding_ratio_impl(field);
}

template <typename T>
double endpoint_error(const DeformationField<T>& predicted,
                      const DeformationField<T>& truth) {
  if (predicted.fx.shape() != truth.fx.shape())
    throw std::invalid_argument("endpoint_error: field sizes differ");
  const auto px = predicted.fx.values(), py = predicted.fy.values();
  const auto tx = truth.fx.values(), ty = truth.fy.values();
  double total = 0;
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double dx = double(px[i]) - double(tx[i]);
    const double dy = double(py[i]) - double(ty[i]);
    total += std::sqrt(dx * dx + dy * dy);
  }
  return total / double(px.size());
}

template <typename T>
double field_magnitude(const DeformationField<T>& field) {
  const auto fx = field.fx.values(), fy = field.fy.values();
  double total = 0;
  for (std::size_t i = 0; i < fx.size(); ++i)
    total += std::sqrt(double(fx[i]) * fx[i] + double(fy[i]) * fy[i]);
  return total / double(fx.size());
}

LabelMask warp_mask_nearest(const LabelMask& mask,
                            const DeformationField<float>& field) {
  if (field.rows() != mask.rows || field.cols() != mask.cols)
    throw std::invalid_argument("warp_mask_nearest: size mismatch");
  const auto fx = field.fx.values(), fy = field.fy.values();
  LabelMask out;
  out.rows = mask.rows;
  out.cols = mask.cols;
  out.labels.resize(mask.labels.size());
  for (int r = 0; r < mask.rows; ++r)
    for (int c = 0; c < mask.cols; ++c) {
      const std::size_t i = std::size_t(r) * mask.cols + c;
      const int sc = std::clamp(int(std::lround(double(c) + fx[i])), 0, mask.cols - 1);
      const int sr = std::clamp(int(std::lround(double(r) + fy[i])), 0, mask.rows - 1);
      out.labels[i] = mask.at(sr, sc);
    }
  return out;
}

double time_pair(const std::function<void()>& run) {
  const auto t0 = std::chrono::steady_clock::now();
  run();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

template double endpoint_error<float>(const DeformationField<float>&,
                                      const DeformationField<float>&);
template double endpoint_error<double>(const DeformationField<double>&,
                                       const DeformationField<double>&);
template double field_magnitude<float>(const DeformationField<float>&);
template double field_magnitude<double>(const DeformationField<double>&);

}  // namespace sreg
