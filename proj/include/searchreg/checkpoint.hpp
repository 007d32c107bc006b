#pragma once

#include <string>
#include <utility>
#include <vector>

#include "searchreg/adam.hpp"
#include "searchreg/config.hpp"
#include "searchreg/model.hpp"
#include "searchreg/rng.hpp"
#include "searchreg/tensor.hpp"

namespace sreg {

// "SMCK" container: magic, u32 version, u32 entry count, then entries of
// (u32 name length, UTF-8 name, TNSR blob). Parameters and buffers use their
// registry names; optimizer state lives under "opt.", the RNG under "rng."
// and the config snapshot under "meta.config" (text encoded byte-per-float).
struct Checkpoint {
  std::uint32_t version = 1;
  RegistrationConfig config;
  std::vector<std::pair<std::string, Tensor<float>>> entries;

  const Tensor<float>* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint checkpoint_from(RegistrationModel<float>& model,
                           const AdamState<float>* opt = nullptr,
                           const Rng* rng = nullptr);

// Overwrites the model's parameters and buffers from checkpoint entries.
// Missing or shape-mismatched entries raise DataError.
void load_into_model(const Checkpoint& ckpt, RegistrationModel<float>& model);

// Restores optimizer moments/step recorded for `param_count` parameters.
void load_adam_state(const Checkpoint& ckpt, AdamState<float>& state,
                     std::size_t param_count);
bool load_rng_state(const Checkpoint& ckpt, Rng& rng);

}  // namespace sreg
