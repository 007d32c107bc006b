#include "searchreg/field_iterator.hpp"

namespace sreg {

template <typename T>
DeformationField<T> zero_field(int rows, int cols, FieldResolution res) {
  return DeformationField<T>{Tensor<T>::zeros({rows, cols}),
                             Tensor<T>::zeros({rows, cols}), res};
}

template <typename T>
IterateResult<T> iterate(const FeatureMaps<T>& fm,
                         const CorrelationPyramid<T>& pyramid,
                         const GruParams<T>& gru_params,
                         const FlowHeadParams<T>& head_params,
                         const RegistrationConfig& cfg) {
  if (cfg.num_iters < 1)
    throw std::invalid_argument("iterate: num_iters must be >= 1");
  if (cfg.radius < 1) throw std::invalid_argument("iterate: radius must be >= 1");

  const int h = pyramid.rows(), w = pyramid.cols();
  if (fm.context.dim(1) != h || fm.context.dim(2) != w)
    throw std::invalid_argument("iterate: context/pyramid size mismatch");

  IterateResult<T> result;
  Tensor<T> fx = Tensor<T>::zeros({h, w});
  Tensor<T> fy = Tensor<T>::zeros({h, w});
  Tensor<T> hidden = Tensor<T>::zeros({gru_params.hidden_channels(), h, w});

  for (int step = 0; step < cfg.num_iters; ++step) {
    Tensor<T> search_map = search_lookup(pyramid, fx, fy, cfg.radius);
    ++result.lookup_count;
    std::vector<Tensor<T>> gru_in{search_map, fm.context};
    if (cfg.gru_field_input) {
      gru_in.push_back(reshape(fx, {1, h, w}));
      gru_in.push_back(reshape(fy, {1, h, w}));
    }
    hidden = gru_cell(concat_channels(gru_in), hidden, gru_params);
    Tensor<T> delta = flow_head(hidden, head_params);
    fx = add(fx, reshape(slice_channels(delta, 0, 1), {h, w}));
    fy = add(fy, reshape(slice_channels(delta, 1, 2), {h, w}));
    result.steps.push_back(DeformationField<T>{fx, fy, FieldResolution::half});
  }
  result.full = finalize(result.steps.back());
  return result;
}

template <typename T>
DeformationField<T> finalize(const DeformationField<T>& half) {
  if (half.resolution == FieldResolution::full)
    throw std::invalid_argument("finalize: field is already full resolution");
  const int h = half.rows(), w = half.cols();
  DeformationField<T> full;
  full.resolution = FieldResolution::full;
  full.fx = scale(
      reshape(upsample2x_bilinear(reshape(half.fx, {1, h, w})), {2 * h, 2 * w}),
      T(2));
  full.fy = scale(
      reshape(upsample2x_bilinear(reshape(half.fy, {1, h, w})), {2 * h, 2 * w}),
      T(2));
  return full;
}

#define SREG_INSTANTIATE_FIELD(T)                                             \
  template DeformationField<T> zero_field<T>(int, int, FieldResolution);      \
  template IterateResult<T> iterate<T>(                                       \
      const FeatureMaps<T>&, const CorrelationPyramid<T>&, const GruParams<T>&, \
      const FlowHeadParams<T>&, const RegistrationConfig&);                   \
  template DeformationField<T> finalize<T>(const DeformationField<T>&);

SREG_INSTANTIATE_FIELD(float)
SREG_INSTANTIATE_FIELD(double)

}  // namespace sreg
