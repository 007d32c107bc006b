#include "searchreg/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "searchreg/errors.hpp"

namespace sreg {
namespace {

// The per-pair graphs allocate and free the same multi-megabyte buffers
// thousands of times. Keeping them on the heap instead of mmap avoids
// re-faulting the pages on every pair.
void tune_allocator() {
#if defined(__GLIBC__)
  static bool done = false;
  if (!done) {
    mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);
    done = true;
  }
#endif
}

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (int i = int(idx.size()) - 1; i > 0; --i)
    std::swap(idx[std::size_t(i)], idx[std::size_t(rng.uniform_int(0, i))]);
}

double similarity_value(const Tensor<float>& warped, const Tensor<float>& fixed,
                        const RegistrationConfig& cfg) {
  if (cfg.similarity == Similarity::mse)
    return double(mse_loss(warped, fixed).item());
  return double(
      lncc_loss(warped, fixed, cfg.lncc_window, 1e-5f, cfg.lncc_signed).item());
}

void push_stat(std::map<std::string, double>& agg, const std::string& key,
               const std::vector<double>& values) {
  if (values.empty()) return;
  const double n = double(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0;
  for (double v : values) var += (v - mean) * (v - mean);
  agg[key + "_mean"] = mean;
  agg[key + "_std"] = std::sqrt(var / n);
}

}  // namespace

TrainResult train(const RegistrationConfig& cfg,
                  const std::vector<SynthPair>& corpus,
                  const TrainOptions& opts) {
  cfg.validate();
  tune_allocator();
  if (corpus.empty()) throw DataError("train: empty corpus");
  for (const auto& pair : corpus)
    if (pair.moving.dim(1) != cfg.image_height ||
        pair.moving.dim(2) != cfg.image_width)
      throw DataError("train: corpus image size does not match the config");

  RegistrationModel<float> model(cfg, cfg.seed);
  if (opts.zero_flow_head) model.zero_flow_head();

  auto named_params = model.parameters();
  std::vector<Tensor<float>> params;
  params.reserve(named_params.size());
  for (auto& [name, tensor] : named_params) params.push_back(tensor);

  AdamState<float> adam;
  adam.learning_rate = float(cfg.learning_rate);
  Rng shuffle_rng(cfg.seed ^ 0xd6e8feb86659fd93ull);
  const LossConfig loss_cfg = loss_config_from(cfg);
  const int checkpoint_every =
      opts.checkpoint_every > 0 ? opts.checkpoint_every
                                : std::max(1, cfg.epochs / 5);

  TrainResult result;
  std::vector<int> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_indices(order, shuffle_rng);
    double epoch_total = 0;
    int epoch_batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += std::size_t(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + std::size_t(cfg.batch_size));
      const float inv_batch = 1.0f / float(stop - start);
      double batch_total = 0;
      for (std::size_t i = start; i < stop; ++i) {
        const SynthPair& pair = corpus[std::size_t(order[i])];
        GradientTape<float> tape;
        IterateResult<float> pred = model.forward(pair.moving, pair.fixed, true);
        Tensor<float> loss = total_loss(pair.moving, pair.fixed, pred.full, loss_cfg);
        batch_total += double(loss.item());
        backward(scale(loss, inv_batch));
      }
      batch_total *= double(inv_batch);
      if (!std::isfinite(batch_total))
        throw NumericalError("train: non-finite loss at epoch " +
                             std::to_string(epoch) + ", batch " +
                             std::to_string(epoch_batches));
      adam_step(adam, params);
      result.batch_loss.push_back(batch_total);
      epoch_total += batch_total;
      ++epoch_batches;
    }
    const double epoch_mean = epoch_total / double(epoch_batches);
    result.epoch_loss.push_back(epoch_mean);
    if (opts.on_epoch) opts.on_epoch(epoch, epoch_mean);
    if (!opts.checkpoint_dir.empty() && (epoch + 1) % checkpoint_every == 0) {
      Checkpoint periodic = checkpoint_from(model, &adam, &shuffle_rng);
      std::ostringstream name;
      name << opts.checkpoint_dir << "/ckpt_epoch" << (epoch + 1) << ".smck";
      save_checkpoint(name.str(), periodic);
    }
  }
  result.checkpoint = checkpoint_from(model, &adam, &shuffle_rng);
  return result;
}

RegisterResult register_with_model(RegistrationModel<float>& model,
                                   const Tensor<float>& moving,
                                   const Tensor<float>& fixed,
                                   const LabelMask* moving_mask,
                                   const LabelMask* fixed_mask) {
  if (moving.shape() != fixed.shape())
    throw DataError("register: image shapes differ");
  if (moving.dim(1) != model.cfg.image_height ||
      moving.dim(2) != model.cfg.image_width)
    throw DataError("register: image is " + shape_to_string(moving.shape()) +
                    " after padding but the checkpoint expects " +
                    std::to_string(model.cfg.image_height) + "x" +
                    std::to_string(model.cfg.image_width));

  RegisterResult out;
  out.metrics.seconds = time_pair([&] {
    IterateResult<float> pred = model.forward(moving, fixed, false);
    out.warped = warp(moving, pred.full);
    out.field = pred.full;
    out.steps = std::move(pred.steps);
    out.lookup_count = pred.lookup_count;
  });
  out.metrics.similarity = similarity_value(out.warped, fixed, model.cfg);
  out.metrics.folding = folding_ratio(out.field);
  if (moving_mask && fixed_mask) {
    out.metrics.dice_before = mean_dice(*moving_mask, *fixed_mask);
    out.metrics.dice_after =
        mean_dice(warp_mask_nearest(*moving_mask, out.field), *fixed_mask);
  }
  return out;
}

RegisterResult register_pair(const Checkpoint& ckpt,
                             const Tensor<float>& moving,
                             const Tensor<float>& fixed,
                             const LabelMask* moving_mask,
                             const LabelMask* fixed_mask) {
  RegistrationModel<float> model(ckpt.config, ckpt.config.seed);
  load_into_model(ckpt, model);
  return register_with_model(model, moving, fixed, moving_mask, fixed_mask);
}

EvalReport evaluate(const Checkpoint& ckpt,
                    const std::vector<SynthPair>& corpus) {
  if (corpus.empty()) throw DataError("evaluate: empty corpus");
  RegistrationModel<float> model(ckpt.config, ckpt.config.seed);
  load_into_model(ckpt, model);

  EvalReport report;
  for (const auto& pair : corpus) {
    RegisterResult r = register_with_model(model, pair.moving, pair.fixed,
                                           &pair.moving_mask, &pair.fixed_mask);
    PairMetrics m = r.metrics;
    if (pair.gt.fx.defined()) {
      m.epe = endpoint_error(r.field, pair.gt);
      m.epe_identity = field_magnitude(pair.gt);
    }
    report.rows.push_back(m);
  }

  std::vector<double> sim, fold, secs, db, da, epe, epe_id;
  for (const auto& m : report.rows) {
    sim.push_back(m.similarity);
    fold.push_back(m.folding);
    secs.push_back(m.seconds);
    if (m.dice_before) db.push_back(*m.dice_before);
    if (m.dice_after) da.push_back(*m.dice_after);
    if (m.epe) epe.push_back(*m.epe);
    if (m.epe_identity) epe_id.push_back(*m.epe_identity);
  }
  push_stat(report.aggregate, "similarity", sim);
  push_stat(report.aggregate, "folding", fold);
  push_stat(report.aggregate, "seconds", secs);
  push_stat(report.aggregate, "dice_before", db);
  push_stat(report.aggregate, "dice_after", da);
  push_stat(report.aggregate, "epe", epe);
  push_stat(report.aggregate, "epe_identity", epe_id);
  return report;
}

std::string EvalReport::table_text() const {
  std::ostringstream out;
  out << "pair  similarity  folding   dice_before dice_after  epe       seconds\n";
  auto opt = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    std::ostringstream s;
    s.precision(4);
    s << std::fixed << *v;
    return s.str();
  };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& m = rows[i];
    out << i << "  ";
    out.precision(6);
    out << std::fixed << m.similarity << "  " << m.folding << "  "
        << opt(m.dice_before) << "  " << opt(m.dice_after) << "  " << opt(m.epe)
        << "  " << m.seconds << "\n";
  }
  out << "aggregate";
  for (const auto& [key, value] : aggregate) out << "  " << key << "=" << value;
  out << "\n";
  return out.str();
}

std::string EvalReport::keyvalue_text() const {
  std::ostringstream out;
  auto opt = [&out](const char* key, const std::optional<double>& v) {
    if (v) out << " " << key << "=" << *v;
  };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& m = rows[i];
    out << "pair=" << i << " similarity=" << m.similarity
        << " folding=" << m.folding << " seconds=" << m.seconds;
    opt("dice_before", m.dice_before);
    opt("dice_after", m.dice_after);
    opt("epe", m.epe);
    opt("epe_identity", m.epe_identity);
    out << "\n";
  }
  out << "aggregate";
  for (const auto& [key, value] : aggregate) out << " " << key << "=" << value;
  out << "\n";
  return out.str();
}

}  // namespace sreg
