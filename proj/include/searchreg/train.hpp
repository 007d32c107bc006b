#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "searchreg/checkpoint.hpp"
#include "searchreg/metrics.hpp"
#include "searchreg/synth.hpp"
#include "searchreg/warp_loss.hpp"

namespace sreg {

struct TrainOptions {
  bool zero_flow_head = false;   // start from an identity-field network
  std::string checkpoint_dir;    // when set, periodic checkpoints land here
  int checkpoint_every = 0;      // epochs between dumps; 0 = epochs/5
  std::function<void(int epoch, double loss)> on_epoch;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> epoch_loss;  // mean batch loss per epoch
  std::vector<double> batch_loss;  // every batch in order
};

// Minibatch descent on similarity + alpha * smoothness over the corpus.
// Gradients accumulate pair by pair (mean over the batch), one optimizer
// step per batch. Aborts with NumericalError naming the batch on a
// non-finite loss.
TrainResult train(const RegistrationConfig& cfg,
                  const std::vector<SynthPair>& corpus,
                  const TrainOptions& opts = {});

struct PairMetrics {
  double similarity = 0;  // loss-style: lower is better
  double folding = 0;
  double seconds = 0;
  std::optional<double> dice_before, dice_after;
  std::optional<double> epe, epe_identity;
};

struct RegisterResult {
  Tensor<float> warped;
  DeformationField<float> field;                // full resolution
  std::vector<DeformationField<float>> steps;   // half resolution
  PairMetrics metrics;
  int lookup_count = 0;
};

RegisterResult register_pair(const Checkpoint& ckpt,
                             const Tensor<float>& moving,
                             const Tensor<float>& fixed,
                             const LabelMask* moving_mask = nullptr,
                             const LabelMask* fixed_mask = nullptr);

// Same, with a caller-owned model (avoids re-loading parameters per pair).
RegisterResult register_with_model(RegistrationModel<float>& model,
                                   const Tensor<float>& moving,
                                   const Tensor<float>& fixed,
                                   const LabelMask* moving_mask = nullptr,
                                   const LabelMask* fixed_mask = nullptr);

struct EvalReport {
  std::vector<PairMetrics> rows;
  std::map<std::string, double> aggregate;  // <metric>_mean / <metric>_std

  std::string table_text() const;
  std::string keyvalue_text() const;
};

// Registers every pair, aggregating mean and standard deviation per metric.
EvalReport evaluate(const Checkpoint& ckpt,
                    const std::vector<SynthPair>& corpus);

}  // namespace sreg
