#pragma once

#include <cstdint>
#include <string>

namespace sreg {

enum class Similarity { mse, lncc };

std::string to_string(Similarity s);
Similarity similarity_from_string(const std::string& s);

// 0.01 for MSE, 2 for LNCC.
double default_alpha(Similarity s);

// Everything a run needs: geometry, search settings, loss choice and
// optimizer settings. Defaults follow the desk preset (64x64); mr_preset()
// and echo_preset() carry the full-scale settings.
struct RegistrationConfig {
  int image_height = 64;
  int image_width = 64;
  int radius = 2;
  int num_iters = 4;
  Similarity similarity = Similarity::mse;
  double alpha = 0.01;
  int lncc_window = 9;
  double learning_rate = 1e-3;
  int batch_size = 8;
  int epochs = 1500;
  std::uint64_t seed = 42;
  bool normalize_cost_volume = false;
  bool gru_field_input = false;  // feed the current field into the GRU input
  bool lncc_signed = false;      // signed correlation instead of squared

  void validate() const;  // throws std::invalid_argument when out of range
};

RegistrationConfig desk_preset();  // 64x64, r=2, MSE
RegistrationConfig mr_preset();    // 192x160, r=3, LNCC
RegistrationConfig echo_preset();  // 160x160, r=2, MSE

// Synthetic-corpus settings that may ride along in the same config file.
struct SynthSettings {
  int count = 200;
  int test_count = 50;
  double max_disp = 6.0;  // max |displacement| in full-resolution pixels
  int smoothness = 24;    // box-blur passes applied to the raw field
};

struct ParsedConfig {
  RegistrationConfig reg;
  SynthSettings synth;
};

// Flat `key = value` text with `#` comments. A `preset` key is applied
// first; unknown keys raise DataError. alpha defaults per similarity unless
// given explicitly.
ParsedConfig parse_config(const std::string& text);
ParsedConfig load_config_file(const std::string& path);

std::string config_to_text(const RegistrationConfig& cfg);

}  // namespace sreg
