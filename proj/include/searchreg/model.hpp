#pragma once

#include <string>
#include <utility>
#include <vector>

#include "searchreg/config.hpp"
#include "searchreg/correlation.hpp"
#include "searchreg/encoder.hpp"
#include "searchreg/field_iterator.hpp"
#include "searchreg/gru.hpp"

namespace sreg {

// The full registration network: shared-trunk encoder, correlation pyramid
// and the recurrent field iterator. Construction draws every parameter from
// one seeded stream, so identical (config, seed) gives identical models.
template <typename T>
class RegistrationModel {
 public:
  static constexpr int kHiddenChannels = 64;
  static constexpr int kContextChannels = 32;

  RegistrationModel(const RegistrationConfig& cfg, std::uint64_t seed);

  FeatureMaps<T> encode_pair(const Tensor<T>& moving, const Tensor<T>& fixed,
                             bool training);
  IterateResult<T> forward(const Tensor<T>& moving, const Tensor<T>& fixed,
                           bool training);

  // Trainable tensors in a fixed registry order (checkpoint layout).
  std::vector<std::pair<std::string, Tensor<T>>> parameters();
  // Batch-norm running statistics.
  std::vector<std::pair<std::string, Tensor<T>>> buffers();

  void zero_flow_head();

  int search_map_channels() const;
  int gru_input_channels() const;

  RegistrationConfig cfg;
  EncoderParams<T> encoder;
  GruParams<T> gru;
  FlowHeadParams<T> head;
};

// Diamond cardinality 2r^2 + 2r + 1 stacked over the 4 pyramid levels.
int search_map_channels_for(int radius);

}  // namespace sreg
