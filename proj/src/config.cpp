#include "searchreg/config.hpp"

#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "searchreg/errors.hpp"

namespace sreg {

std::string to_string(Similarity s) {
  return s == Similarity::mse ? "mse" : "lncc";
}

Similarity similarity_from_string(const std::string& s) {
  if (s == "mse") return Similarity::mse;
  if (s == "lncc") return Similarity::lncc;
  throw DataError("unknown similarity '" + s + "' (use mse or lncc)");
}

double default_alpha(Similarity s) {
  return s == Similarity::mse ? 0.01 : 2.0;
}

void RegistrationConfig::validate() const {
  if (image_height < 8 || image_width < 8 || image_height % 4 != 0 ||
      image_width % 4 != 0)
    throw std::invalid_argument(
        "config: image sides must be >= 8 and divisible by 4");
  if (radius < 1) throw std::invalid_argument("config: radius must be >= 1");
  if (num_iters < 1)
    throw std::invalid_argument("config: num_iters must be >= 1");
  if (alpha <= 0) throw std::invalid_argument("config: alpha must be > 0");
  if (lncc_window < 3 || lncc_window % 2 == 0)
    throw std::invalid_argument("config: lncc_window must be odd and >= 3");
  if (learning_rate <= 0)
    throw std::invalid_argument("config: learning_rate must be > 0");
  if (batch_size < 1)
    throw std::invalid_argument("config: batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
}

RegistrationConfig desk_preset() {
  RegistrationConfig cfg;
  cfg.image_height = 64;
  cfg.image_width = 64;
  cfg.radius = 2;
  cfg.similarity = Similarity::mse;
  cfg.alpha = default_alpha(Similarity::mse);
  return cfg;
}

RegistrationConfig mr_preset() {
  RegistrationConfig cfg;
  cfg.image_height = 192;
  cfg.image_width = 160;
  cfg.radius = 3;
  cfg.similarity = Similarity::lncc;
  cfg.alpha = default_alpha(Similarity::lncc);
  return cfg;
}

RegistrationConfig echo_preset() {
  RegistrationConfig cfg;
  cfg.image_height = 160;
  cfg.image_width = 160;
  cfg.radius = 2;
  cfg.similarity = Similarity::mse;
  cfg.alpha = default_alpha(Similarity::mse);
  return cfg;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  int out;
  try {
    out = std::stoi(v, &used);
  } catch (const std::exception&) {
    throw DataError("config: bad integer for " + key + ": '" + v + "'");
  }
  if (used != v.size())
    throw DataError("config: bad integer for " + key + ": '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    throw DataError("config: bad number for " + key + ": '" + v + "'");
  }
  if (used != v.size())
    throw DataError("config: bad number for " + key + ": '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw DataError("config: bad boolean for " + key + ": '" + v + "'");
}

}  // namespace

ParsedConfig parse_config(const std::string& text) {
  // Collect key/value pairs, apply the preset first, then the rest in file
  // order. alpha only falls back to the per-similarity default when absent.
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("config line " + std::to_string(lineno) +
                      ": expected 'key = value'");
    entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }

  ParsedConfig parsed;
  for (const auto& [key, value] : entries) {
    if (key != "preset") continue;
    if (value == "desk")
      parsed.reg = desk_preset();
    else if (value == "mr")
      parsed.reg = mr_preset();
    else if (value == "echo")
      parsed.reg = echo_preset();
    else
      throw DataError("config: unknown preset '" + value + "'");
  }

  std::optional<double> explicit_alpha;
  bool similarity_changed = false;
  for (const auto& [key, value] : entries) {
    if (key == "preset") {
      continue;
    } else if (key == "image_height") {
      parsed.reg.image_height = parse_int(key, value);
    } else if (key == "image_width") {
      parsed.reg.image_width = parse_int(key, value);
    } else if (key == "radius") {
      parsed.reg.radius = parse_int(key, value);
    } else if (key == "num_iters") {
      parsed.reg.num_iters = parse_int(key, value);
    } else if (key == "similarity") {
      parsed.reg.similarity = similarity_from_string(value);
      similarity_changed = true;
    } else if (key == "alpha") {
      explicit_alpha = parse_double(key, value);
    } else if (key == "lncc_window") {
      parsed.reg.lncc_window = parse_int(key, value);
    } else if (key == "learning_rate") {
      parsed.reg.learning_rate = parse_double(key, value);
    } else if (key == "batch_size") {
      parsed.reg.batch_size = parse_int(key, value);
    } else if (key == "epochs") {
      parsed.reg.epochs = parse_int(key, value);
    } else if (key == "seed") {
      parsed.reg.seed = std::uint64_t(parse_double(key, value));
    } else if (key == "normalize_cost_volume") {
      parsed.reg.normalize_cost_volume = parse_bool(key, value);
    } else if (key == "gru_field_input") {
      parsed.reg.gru_field_input = parse_bool(key, value);
    } else if (key == "lncc_signed") {
      parsed.reg.lncc_signed = parse_bool(key, value);
    } else if (key == "synth_count") {
      parsed.synth.count = parse_int(key, value);
    } else if (key == "synth_test_count") {
      parsed.synth.test_count = parse_int(key, value);
    } else if (key == "synth_max_disp") {
      parsed.synth.max_disp = parse_double(key, value);
    } else if (key == "synth_smoothness") {
      parsed.synth.smoothness = parse_int(key, value);
    } else {
      throw DataError("config: unknown key '" + key + "'");
    }
  }
  if (explicit_alpha)
    parsed.reg.alpha = *explicit_alpha;
  else if (similarity_changed)
    parsed.reg.alpha = default_alpha(parsed.reg.similarity);
  parsed.reg.validate();
  return parsed;
}

ParsedConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open config: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_text(const RegistrationConfig& cfg) {
  std::ostringstream out;
  out << "image_height = " << cfg.image_height << "\n"
      << "image_width = " << cfg.image_width << "\n"
      << "radius = " << cfg.radius << "\n"
      << "num_iters = " << cfg.num_iters << "\n"
      << "similarity = " << to_string(cfg.similarity) << "\n"
      << "alpha = " << cfg.alpha << "\n"
      << "lncc_window = " << cfg.lncc_window << "\n"
      << "learning_rate = " << cfg.learning_rate << "\n"
      << "batch_size = " << cfg.batch_size << "\n"
      << "epochs = " << cfg.epochs << "\n"
      << "seed = " << cfg.seed << "\n"
      << "normalize_cost_volume = " << (cfg.normalize_cost_volume ? "true" : "false") << "\n"
      << "gru_field_input = " << (cfg.gru_field_input ? "true" : "false") << "\n"
      << "lncc_signed = " << (cfg.lncc_signed ? "true" : "false") << "\n";
  return out.str();
}

}  // namespace sreg
