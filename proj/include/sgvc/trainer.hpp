#pragma once

#include <torch/torch.h>

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "sgvc/dataset.hpp"
#include "sgvc/losses.hpp"
#include "sgvc/model.hpp"

namespace sgvc {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 16;
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  LossWeights weights;
  std::int64_t checkpoint_every = 0;  // steps; 0 writes only the final checkpoint
  std::int64_t max_steps = 0;         // 0 runs the full epoch budget
  bool non_saturating = false;

  void validate() const;
  /// Steps in one pass over `dataset_size` utterances.
  std::int64_t steps_per_epoch(std::size_t dataset_size) const;
  std::int64_t total_steps(std::size_t dataset_size) const;
};

struct StepReport {
  std::int64_t step = 0;
  GeneratorLossReport generator;
  double discriminator_loss = 0;
  double learning_rate = 0;
  double wall_ms = 0;
};

/// Alternating discriminator / generator updates over triplet batches.
class Trainer {
 public:
  Trainer(std::shared_ptr<VoiceConversionModel> model, TrainConfig cfg);

  /// One discriminator update on -adv * L_adv, then one generator update on
  /// the weighted objective. Throws NumericError on a non-finite loss.
  StepReport train_step(const TripletBatch& batch);

  /// The two halves of train_step. Neither advances the step counter.
  double discriminator_step(const TripletBatch& batch);
  GeneratorLossReport generator_step(const TripletBatch& batch);

  /// Generator-side loss terms for a batch without touching any parameter.
  LossTerms generator_terms(const TripletBatch& batch);

  VoiceConversionModel& model() { return *model_; }
  const TrainConfig& config() const noexcept { return cfg_; }
  torch::optim::AdamW& generator_optimizer() { return *gen_opt_; }
  torch::optim::AdamW& discriminator_optimizer() { return *dis_opt_; }
  std::int64_t step() const noexcept { return step_; }
  void set_step(std::int64_t step) noexcept { step_ = step; }

 private:
  std::shared_ptr<VoiceConversionModel> model_;
  TrainConfig cfg_;
  std::unique_ptr<torch::optim::AdamW> gen_opt_, dis_opt_;
  std::int64_t step_ = 0;
};

struct FitHooks {
  std::function<void(const StepReport&)> on_step;
  std::function<void(std::int64_t step)> on_checkpoint;
};

/// Runs train_step until the configured step budget, sampling batches from
/// `data` with `rng`.
std::vector<StepReport> fit(Trainer& trainer, const MelDataset& data,
                            const MelConfig& mel, const AugmentConfig& augment,
                            Rng& rng, const FitHooks& hooks = {});

/// Trains the style encoder alone as a speaker classifier.
class StyleClassifierTrainer {
 public:
  StyleClassifierTrainer(std::shared_ptr<VoiceConversionModel> model,
                         TrainConfig cfg);

  /// One cross-entropy step on (B, 1, n_mels, W) mels. Returns the loss.
  double train_step(const torch::Tensor& mels, const torch::Tensor& labels);

  torch::optim::AdamW& optimizer() { return *opt_; }
  VoiceConversionModel& model() { return *model_; }
  const TrainConfig& config() const noexcept { return cfg_; }
  std::int64_t step() const noexcept { return step_; }
  void set_step(std::int64_t step) noexcept { step_ = step; }

 private:
  std::shared_ptr<VoiceConversionModel> model_;
  TrainConfig cfg_;
  std::unique_ptr<torch::optim::AdamW> opt_;
  std::int64_t step_ = 0;
};

struct PretrainResult {
  std::vector<double> losses;
  double heldout_accuracy = -1;  // negative when no held-out set was given
};

/// Pretrains the style encoder. Throws ConfigError for fewer than two speakers.
PretrainResult pretrain_style_encoder(StyleClassifierTrainer& trainer,
                                      const MelDataset& train,
                                      const MelDataset* heldout,
                                      const MelConfig& mel,
                                      const AugmentConfig& augment, Rng& rng,
                                      const std::function<void(std::int64_t, double)>& on_step = {});

/// Argmax class of each (B, 1, n_mels, W) item, evaluated in eval mode.
std::vector<int> classify(VoiceConversionModel& model, const torch::Tensor& mels);

/// Fraction of utterances whose deterministic window is classified as its
/// label. Throws EmptyInputError on an empty dataset.
double classification_accuracy(VoiceConversionModel& model, const MelDataset& data,
                               const MelConfig& mel);

/// Hash of all parameter bytes, for detecting unintended updates.
std::uint64_t parameter_hash(const std::vector<torch::Tensor>& params);

}  // namespace sgvc
