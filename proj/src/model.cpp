#include "searchreg/model.hpp"

namespace sreg {

int search_map_channels_for(int radius) {
  return 4 * (2 * radius * radius + 2 * radius + 1);
}

template <typename T>
RegistrationModel<T>::RegistrationModel(const RegistrationConfig& config,
                                        std::uint64_t seed)
    : cfg(config) {
  cfg.validate();
  Rng rng(seed);
  encoder = make_encoder_params<T>(rng);
  gru = make_gru_params<T>(rng, gru_input_channels(), kHiddenChannels);
  head = make_flow_head_params<T>(rng, kHiddenChannels);
}

template <typename T>
int RegistrationModel<T>::search_map_channels() const {
  return search_map_channels_for(cfg.radius);
}

template <typename T>
int RegistrationModel<T>::gru_input_channels() const {
  return search_map_channels() + kContextChannels +
         (cfg.gru_field_input ? 2 : 0);
}

template <typename T>
FeatureMaps<T> RegistrationModel<T>::encode_pair(const Tensor<T>& moving,
                                                 const Tensor<T>& fixed,
                                                 bool training) {
  if (moving.dim(1) != cfg.image_height || moving.dim(2) != cfg.image_width)
    throw std::invalid_argument(
        "model: image is " + shape_to_string(moving.shape()) +
        " but the config expects " + std::to_string(cfg.image_height) + "x" +
        std::to_string(cfg.image_width));
  return encode(moving, fixed, encoder, training);
}

template <typename T>
IterateResult<T> RegistrationModel<T>::forward(const Tensor<T>& moving,
                                               const Tensor<T>& fixed,
                                               bool training) {
  FeatureMaps<T> fm = encode_pair(moving, fixed, training);
  CostVolume<T> cv = compute_cost_volume(fm.moving_feat, fm.fixed_feat,
                                         cfg.normalize_cost_volume);
  CorrelationPyramid<T> pyr = build_pyramid(cv);
  return iterate(fm, pyr, gru, head, cfg);
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> RegistrationModel<T>::parameters() {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  auto layer = [&out](const std::string& name, ConvBnLayer<T>& l) {
    out.emplace_back(name + ".w", l.w);
    out.emplace_back(name + ".gamma", l.gamma);
    out.emplace_back(name + ".beta", l.beta);
  };
  layer("enc.stem", encoder.stem);
  layer("enc.down1", encoder.down1);
  layer("enc.conv1", encoder.conv1);
  layer("enc.down2", encoder.down2);
  layer("enc.conv2", encoder.conv2);
  layer("enc.fuse", encoder.fuse);
  out.emplace_back("enc.feat.w", encoder.feat_w);
  out.emplace_back("enc.feat.b", encoder.feat_b);
  out.emplace_back("enc.ctx.w", encoder.ctx_w);
  out.emplace_back("enc.ctx.b", encoder.ctx_b);
  out.emplace_back("gru.wxr", gru.wxr);
  out.emplace_back("gru.whr", gru.whr);
  out.emplace_back("gru.br", gru.br);
  out.emplace_back("gru.wxz", gru.wxz);
  out.emplace_back("gru.whz", gru.whz);
  out.emplace_back("gru.bz", gru.bz);
  out.emplace_back("gru.wxh", gru.wxh);
  out.emplace_back("gru.whh", gru.whh);
  out.emplace_back("gru.bh", gru.bh);
  out.emplace_back("head.w1", head.w1);
  out.emplace_back("head.b1", head.b1);
  out.emplace_back("head.w2", head.w2);
  out.emplace_back("head.b2", head.b2);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> RegistrationModel<T>::buffers() {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  auto layer = [&out](const std::string& name, ConvBnLayer<T>& l) {
    out.emplace_back(name + ".rmean", l.running_mean);
    out.emplace_back(name + ".rvar", l.running_var);
  };
  layer("enc.stem", encoder.stem);
  layer("enc.down1", encoder.down1);
  layer("enc.conv1", encoder.conv1);
  layer("enc.down2", encoder.down2);
  layer("enc.conv2", encoder.conv2);
  layer("enc.fuse", encoder.fuse);
  return out;
}

template <typename T>
void RegistrationModel<T>::zero_flow_head() {
  for (Tensor<T>* t : {&head.w1, &head.b1, &head.w2, &head.b2}) {
    auto v = t->values_mut();
    std::fill(v.begin(), v.end(), T(0));
  }
}

template class RegistrationModel<float>;
template class RegistrationModel<double>;

}  // namespace sreg
