#include "searchreg/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "searchreg/errors.hpp"
#include "searchreg/tnsr_io.hpp"

namespace sreg {
namespace {

Tensor<float> text_to_tensor(const std::string& text) {
  std::vector<float> v(text.size());
  for (std::size_t i = 0; i < text.size(); ++i)
    v[i] = float((unsigned char)text[i]);
  return Tensor<float>::from_data({int(text.size())}, std::move(v));
}

std::string tensor_to_text(const Tensor<float>& t) {
  std::string s(std::size_t(t.numel()), '\0');
  const auto v = t.values();
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = char((unsigned char)v[i]);
  return s;
}

// u64 words split into exact-in-f32 16-bit chunks, low chunk first.
Tensor<float> u64s_to_tensor(const std::vector<std::uint64_t>& words) {
  std::vector<float> v;
  v.reserve(words.size() * 4);
  for (auto w : words)
    for (int i = 0; i < 4; ++i) v.push_back(float((w >> (16 * i)) & 0xffff));
  const int n = int(v.size());
  return Tensor<float>::from_data({n}, std::move(v));
}

std::vector<std::uint64_t> tensor_to_u64s(const Tensor<float>& t) {
  const auto v = t.values();
  if (v.size() % 4 != 0) throw DataError("checkpoint: bad u64 chunk count");
  std::vector<std::uint64_t> words(v.size() / 4);
  for (std::size_t i = 0; i < words.size(); ++i) {
    std::uint64_t w = 0;
    for (int j = 0; j < 4; ++j)
      w |= std::uint64_t((std::uint16_t)v[i * 4 + j]) << (16 * j);
    words[i] = w;
  }
  return words;
}

}  // namespace

const Tensor<float>* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : entries)
    if (n == name) return &t;
  return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + path);
  f.write("SMCK", 4);
  const std::uint32_t version = ckpt.version;
  f.write(reinterpret_cast<const char*>(&version), 4);
  const std::uint32_t count = std::uint32_t(ckpt.entries.size());
  f.write(reinterpret_cast<const char*>(&count), 4);
  for (const auto& [name, tensor] : ckpt.entries) {
    const std::uint32_t len = std::uint32_t(name.size());
    f.write(reinterpret_cast<const char*>(&len), 4);
    f.write(name.data(), std::streamsize(name.size()));
    write_tnsr(f, tensor);
  }
  if (!f) throw DataError("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "SMCK", 4) != 0)
    throw DataError("checkpoint: bad magic in " + path);
  Checkpoint ckpt;
  f.read(reinterpret_cast<char*>(&ckpt.version), 4);
  std::uint32_t count = 0;
  f.read(reinterpret_cast<char*>(&count), 4);
  if (!f) throw DataError("checkpoint: truncated header in " + path);
  ckpt.entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t len = 0;
    f.read(reinterpret_cast<char*>(&len), 4);
    if (!f || len > 4096) throw DataError("checkpoint: bad entry name length");
    std::string name(len, '\0');
    f.read(name.data(), len);
    if (!f) throw DataError("checkpoint: truncated entry name");
    ckpt.entries.emplace_back(std::move(name), read_tnsr(f));
  }
  const Tensor<float>* cfg_text = ckpt.find("meta.config");
  if (!cfg_text) throw DataError("checkpoint: missing config snapshot");
  ckpt.config = parse_config(tensor_to_text(*cfg_text)).reg;
  return ckpt;
}

Checkpoint checkpoint_from(RegistrationModel<float>& model,
                           const AdamState<float>* opt, const Rng* rng) {
  Checkpoint ckpt;
  ckpt.config = model.cfg;
  ckpt.entries.emplace_back("meta.config",
                            text_to_tensor(config_to_text(model.cfg)));
  // Deep-copy so the snapshot stays frozen while training continues.
  auto snapshot = [](const Tensor<float>& t) {
    return Tensor<float>::from_data(
        t.shape(), std::vector<float>(t.values().begin(), t.values().end()));
  };
  for (auto& [name, tensor] : model.parameters())
    ckpt.entries.emplace_back(name, snapshot(tensor));
  for (auto& [name, tensor] : model.buffers())
    ckpt.entries.emplace_back(name, snapshot(tensor));
  if (opt) {
    auto params = model.parameters();
    if (opt->m.size() != params.size())
      throw std::invalid_argument("checkpoint: optimizer/parameter mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Shape shape = params[i].second.shape();
      ckpt.entries.emplace_back(
          "opt.m." + params[i].first,
          Tensor<float>::from_data(shape, std::vector<float>(opt->m[i])));
      ckpt.entries.emplace_back(
          "opt.v." + params[i].first,
          Tensor<float>::from_data(shape, std::vector<float>(opt->v[i])));
    }
    ckpt.entries.emplace_back(
        "opt.step", u64s_to_tensor({std::uint64_t(opt->step)}));
  }
  if (rng) {
    const auto s = rng->state();
    ckpt.entries.emplace_back("rng.state",
                              u64s_to_tensor({s[0], s[1], s[2], s[3]}));
  }
  return ckpt;
}

void load_into_model(const Checkpoint& ckpt, RegistrationModel<float>& model) {
  auto restore = [&ckpt](std::vector<std::pair<std::string, Tensor<float>>> dst) {
    for (auto& [name, tensor] : dst) {
      const Tensor<float>* src = ckpt.find(name);
      if (!src) throw DataError("checkpoint: missing entry " + name);
      if (src->shape() != tensor.shape())
        throw DataError("checkpoint: entry " + name + " has shape " +
                        shape_to_string(src->shape()) + ", model expects " +
                        shape_to_string(tensor.shape()));
      auto out = tensor.values_mut();
      const auto in = src->values();
      std::copy(in.begin(), in.end(), out.begin());
    }
  };
  restore(model.parameters());
  restore(model.buffers());
}

void load_adam_state(const Checkpoint& ckpt, AdamState<float>& state,
                     std::size_t param_count) {
  state.m.clear();
  state.v.clear();
  const Tensor<float>* step = ckpt.find("opt.step");
  if (!step) throw DataError("checkpoint: no optimizer state");
  state.step = std::int64_t(tensor_to_u64s(*step)[0]);
  for (const auto& [name, tensor] : ckpt.entries) {
    if (name.rfind("opt.m.", 0) == 0)
      state.m.emplace_back(tensor.values().begin(), tensor.values().end());
    else if (name.rfind("opt.v.", 0) == 0)
      state.v.emplace_back(tensor.values().begin(), tensor.values().end());
  }
  if (state.m.size() != param_count || state.v.size() != param_count)
    throw DataError("checkpoint: optimizer state does not match parameters");
}

bool load_rng_state(const Checkpoint& ckpt, Rng& rng) {
  const Tensor<float>* t = ckpt.find("rng.state");
  if (!t) return false;
  const auto words = tensor_to_u64s(*t);
  if (words.size() != 4) throw DataError("checkpoint: bad rng state");
  rng.set_state({words[0], words[1], words[2], words[3]});
  return true;
}

}  // namespace sreg
