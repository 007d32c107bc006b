#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "searchreg/errors.hpp"
#include "searchreg/pgm_io.hpp"
#include "searchreg/tnsr_io.hpp"
#include "searchreg/train.hpp"

namespace fs = std::filesystem;
using namespace sreg;

namespace {

ParsedConfig config_or_default(const std::string& path) {
  if (path.empty()) return ParsedConfig{};
  return load_config_file(path);
}

int run_synth(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& out_dir, std::optional<int> count) {
  ParsedConfig parsed = config_or_default(config_path);
  SynthOptions opts;
  opts.count = count.value_or(parsed.synth.count);
  opts.rows = parsed.reg.image_height;
  opts.cols = parsed.reg.image_width;
  opts.max_disp = parsed.synth.max_disp;
  opts.smoothness = parsed.synth.smoothness;
  opts.seed = seed.value_or(parsed.reg.seed);
  write_corpus(out_dir, synth_generate(opts));
  std::cout << "wrote " << opts.count << " pairs (" << opts.rows << "x"
            << opts.cols << ", max_disp " << opts.max_disp << ") to " << out_dir
            << "\n";
  return 0;
}

int run_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& data_dir, const std::string& out_path) {
  ParsedConfig parsed = config_or_default(config_path);
  if (seed) parsed.reg.seed = *seed;
  std::vector<SynthPair> corpus = load_corpus(data_dir);

  TrainOptions opts;
  const fs::path out(out_path);
  if (out.has_parent_path() && !out.parent_path().empty())
    fs::create_directories(out.parent_path());
  opts.checkpoint_dir = out.has_parent_path() && !out.parent_path().empty()
                            ? out.parent_path().string()
                            : std::string(".");
  opts.on_epoch = [](int epoch, double loss) {
    std::cout << "epoch=" << epoch << " loss=" << loss << "\n";
  };
  TrainResult result = train(parsed.reg, corpus, opts);
  save_checkpoint(out_path, result.checkpoint);
  std::cout << "final_loss=" << result.epoch_loss.back() << " checkpoint="
            << out_path << "\n";
  return 0;
}

int run_register(const std::string& ckpt_path, const std::string& moving_path,
                 const std::string& fixed_path, const std::string& out_path,
                 const std::string& dump_field, const std::string& dump_steps,
                 const std::string& moving_mask_path,
                 const std::string& fixed_mask_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  LoadedImage moving = load_pgm(moving_path);
  LoadedImage fixed = load_pgm(fixed_path);
  if (moving.orig_rows != fixed.orig_rows || moving.orig_cols != fixed.orig_cols)
    throw DataError("register: moving and fixed image sizes differ");

  std::optional<LoadedMask> mmask, fmask;
  if (!moving_mask_path.empty()) mmask = load_mask(moving_mask_path);
  if (!fixed_mask_path.empty()) fmask = load_mask(fixed_mask_path);

  RegisterResult result = register_pair(
      ckpt, moving.image, fixed.image, mmask ? &mmask->mask : nullptr,
      fmask ? &fmask->mask : nullptr);

  if (!out_path.empty()) save_pgm(out_path, result.warped, moving.pad);
  if (!dump_field.empty()) {
    const int h = result.field.rows(), w = result.field.cols();
    std::vector<float> packed;
    packed.reserve(std::size_t(2) * h * w);
    packed.insert(packed.end(), result.field.fx.values().begin(),
                  result.field.fx.values().end());
    packed.insert(packed.end(), result.field.fy.values().begin(),
                  result.field.fy.values().end());
    save_tnsr(dump_field, Tensor<float>::from_data({2, h, w}, std::move(packed)));
  }
  if (!dump_steps.empty()) {
    fs::create_directories(dump_steps);
    for (std::size_t s = 0; s < result.steps.size(); ++s) {
      const auto& step = result.steps[s];
      const int h = step.rows(), w = step.cols();
      std::vector<float> packed;
      packed.reserve(std::size_t(2) * h * w);
      packed.insert(packed.end(), step.fx.values().begin(), step.fx.values().end());
      packed.insert(packed.end(), step.fy.values().begin(), step.fy.values().end());
      char name[32];
      std::snprintf(name, sizeof(name), "/step_%02d.tnsr", int(s));
      save_tnsr(dump_steps + name,
                Tensor<float>::from_data({2, h, w}, std::move(packed)));
    }
  }
  std::cout << "similarity=" << result.metrics.similarity
            << " folding=" << result.metrics.folding
            << " seconds=" << result.metrics.seconds;
  if (result.metrics.dice_after)
    std::cout << " dice_before=" << *result.metrics.dice_before
              << " dice_after=" << *result.metrics.dice_after;
  std::cout << "\n";
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& data_dir,
             const std::string& out_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  std::vector<SynthPair> corpus = load_corpus(data_dir);
  EvalReport report = evaluate(ckpt, corpus);
  const std::string text = report.table_text() + "\n" + report.keyvalue_text();
  if (!out_path.empty()) {
    std::ofstream f(out_path);
    if (!f) throw DataError("cannot open for writing: " + out_path);
    f << text;
  }
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Correlation-search deformable image registration"};
  app.require_subcommand(1);

  std::string config_path, out_path, data_dir, ckpt_path;
  std::string moving_path, fixed_path, dump_field, dump_steps;
  std::string moving_mask_path, fixed_mask_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> count;

  auto* synth = app.add_subcommand("synth", "generate a synthetic pair corpus");
  synth->add_option("--config", config_path, "config file");
  synth->add_option("--seed", seed, "seed override");
  synth->add_option("--out", out_path, "output directory")->required();
  synth->add_option("--count", count, "pair count override");

  auto* train_cmd = app.add_subcommand("train", "train on a corpus directory");
  train_cmd->add_option("--config", config_path, "config file");
  train_cmd->add_option("--seed", seed, "seed override");
  train_cmd->add_option("--data", data_dir, "corpus directory")->required();
  train_cmd->add_option("--out", out_path, "checkpoint path")->required();

  auto* reg = app.add_subcommand("register", "register one image pair");
  reg->add_option("--config", config_path, "config file (informational)");
  reg->add_option("--seed", seed, "unused, accepted for symmetry");
  reg->add_option("--ckpt", ckpt_path, "checkpoint")->required();
  reg->add_option("--moving", moving_path, "moving image (PGM)")->required();
  reg->add_option("--fixed", fixed_path, "fixed image (PGM)")->required();
  reg->add_option("--out", out_path, "warped output (PGM)");
  reg->add_option("--dump-field", dump_field, "write the full-res field (TNSR)");
  reg->add_option("--dump-steps", dump_steps, "directory for per-step fields");
  reg->add_option("--moving-mask", moving_mask_path, "moving label mask (PGM)");
  reg->add_option("--fixed-mask", fixed_mask_path, "fixed label mask (PGM)");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate over a corpus");
  eval_cmd->add_option("--config", config_path, "config file (informational)");
  eval_cmd->add_option("--seed", seed, "unused, accepted for symmetry");
  eval_cmd->add_option("--ckpt", ckpt_path, "checkpoint")->required();
  eval_cmd->add_option("--data", data_dir, "corpus directory")->required();
  eval_cmd->add_option("--out", out_path, "report file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return run_synth(config_path, seed, out_path, count);
    if (train_cmd->parsed())
      return run_train(config_path, seed, data_dir, out_path);
    if (reg->parsed())
      return run_register(ckpt_path, moving_path, fixed_path, out_path,
                          dump_field, dump_steps, moving_mask_path,
                          fixed_mask_path);
    if (eval_cmd->parsed()) return run_eval(ckpt_path, data_dir, out_path);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
