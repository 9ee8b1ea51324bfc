#include "sgvc/trainer.hpp"

#include <cmath>
#include <cstring>

#include "sgvc/error.hpp"

namespace sgvc {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
  if (batch_size < 2) {
    throw ConfigError("train config: batch_size must be >= 2 for triplet sampling");
  }
  if (!(learning_rate >= 0) || !(weight_decay >= 0)) {
    throw ConfigError("train config: learning_rate and weight_decay must be >= 0");
  }
  if (checkpoint_every < 0 || max_steps < 0) {
    throw ConfigError("train config: checkpoint_every and max_steps must be >= 0");
  }
  weights.validate();
}

std::int64_t TrainConfig::steps_per_epoch(std::size_t dataset_size) const {
  const auto n = static_cast<std::int64_t>(dataset_size);
  return std::max<std::int64_t>(1, (n + batch_size - 1) / batch_size);
}

std::int64_t TrainConfig::total_steps(std::size_t dataset_size) const {
  return max_steps > 0 ? max_steps : epochs * steps_per_epoch(dataset_size);
}

namespace {

std::unique_ptr<torch::optim::AdamW> make_adamw(std::vector<torch::Tensor> params,
                                                const TrainConfig& cfg) {
  return std::make_unique<torch::optim::AdamW>(
      std::move(params),
      torch::optim::AdamWOptions(cfg.learning_rate).weight_decay(cfg.weight_decay));
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
      .count();
}

}  // namespace

Trainer::Trainer(std::shared_ptr<VoiceConversionModel> model, TrainConfig cfg)
    : model_(std::move(model)), cfg_(std::move(cfg)) {
  cfg_.validate();
  gen_opt_ = make_adamw(model_->generator_parameters(), cfg_);
  dis_opt_ = make_adamw(model_->discriminator_parameters(), cfg_);
}

LossTerms Trainer::generator_terms(const TripletBatch& b) {
  auto& m = *model_;
  LossTerms terms;
  const auto c_s = m.encode_content(b.x_s).shifted;
  const auto style_s = m.encode_style(b.x_s);
  const auto style_t1 = m.encode_style(b.x_t1);
  const auto style_t2 = m.encode_style(b.x_t2);

  const auto g_self = m.decode(c_s, style_s.style);
  const auto g1 = m.decode(c_s, style_t1.style);
  const auto g2 = m.decode(c_s, style_t2.style);

  const auto fake_logit = m.discriminate(g1, b.y_t);
  if (cfg_.non_saturating) {
    terms.adv = generator_adversarial_loss(fake_logit, /*non_saturating=*/true);
  } else {
    // The real term carries no generator gradient; it keeps the value equal
    // to the full adversarial objective.
    torch::Tensor real_logit;
    {
      torch::NoGradGuard no_grad;
      real_logit = m.discriminate(b.x_s, b.y_s);
    }
    terms.adv = adversarial_loss(real_logit, fake_logit);
  }

  const auto style_g1 = m.encode_style(g1);
  const auto content_g1 = m.encode_content(g1).shifted;
  const auto id = id_loss(style_g1.class_logits, style_s.class_logits,
                          style_t1.class_logits, style_t2.class_logits, b.y_s, b.y_t);
  terms.fake_id = id.fake_id;
  terms.trg_id = id.trg_id;
  terms.style = style_consistency_loss(style_t1.style, style_g1.style);
  terms.content = content_consistency_loss(c_s, content_g1);
  terms.ds = style_diversification_loss(g1, g2);
  terms.norm = norm_consistency_loss(b.x_s, g2);
  terms.rec = reconstruction_loss(b.x_s, g_self);
  return terms;
}

double Trainer::discriminator_step(const TripletBatch& b) {
  auto& m = *model_;
  m.train(true);
  // Ascend L_adv on detached conversions.
  torch::Tensor fake;
  {
    torch::NoGradGuard no_grad;
    const auto c_s = m.encode_content(b.x_s).shifted;
    fake = m.decode(c_s, m.encode_style(b.x_t1).style);
  }
  const auto adv = adversarial_loss(m.discriminate(b.x_s, b.y_s), m.discriminate(fake, b.y_t));
  const auto d_loss = -cfg_.weights.adv * adv;
  const double value = d_loss.item<double>();
  if (!std::isfinite(value)) {
    throw NumericError("non-finite discriminator loss at step " + std::to_string(step_ + 1));
  }
  dis_opt_->zero_grad();
  d_loss.backward();
  dis_opt_->step();
  return value;
}

GeneratorLossReport Trainer::generator_step(const TripletBatch& b) {
  model_->train(true);
  const auto terms = generator_terms(b);
  GeneratorLossReport report;
  try {
    report = total_generator_objective(terms.values(), cfg_.weights);
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " at step " + std::to_string(step_ + 1));
  }
  const auto total = terms.weighted_total(cfg_.weights);
  gen_opt_->zero_grad();
  total.backward();
  gen_opt_->step();
  // The generator pass also reaches the discriminator; drop those gradients.
  dis_opt_->zero_grad();
  return report;
}

StepReport Trainer::train_step(const TripletBatch& b) {
  const auto start = std::chrono::steady_clock::now();
  StepReport report;
  report.discriminator_loss = discriminator_step(b);
  report.generator = generator_step(b);
  report.step = ++step_;
  report.learning_rate = cfg_.learning_rate;
  report.wall_ms = elapsed_ms(start);
  return report;
}

std::vector<StepReport> fit(Trainer& trainer, const MelDataset& data,
                            const MelConfig& mel, const AugmentConfig& augment,
                            Rng& rng, const FitHooks& hooks) {
  data.validate_for_triplets();
  const auto& cfg = trainer.config();
  const auto total = cfg.total_steps(data.size());
  std::vector<StepReport> history;
  while (trainer.step() < total) {
    const auto batch = sample_batch(data, mel, augment, cfg.batch_size, true, rng);
    history.push_back(trainer.train_step(batch));
    if (hooks.on_step) hooks.on_step(history.back());
    if (hooks.on_checkpoint && cfg.checkpoint_every > 0 &&
        trainer.step() % cfg.checkpoint_every == 0 && trainer.step() != total) {
      hooks.on_checkpoint(trainer.step());
    }
  }
  if (hooks.on_checkpoint) hooks.on_checkpoint(trainer.step());
  return history;
}

StyleClassifierTrainer::StyleClassifierTrainer(std::shared_ptr<VoiceConversionModel> model,
                                               TrainConfig cfg)
    : model_(std::move(model)), cfg_(std::move(cfg)) {
  cfg_.validate();
  opt_ = make_adamw(model_->style_encoder->parameters(), cfg_);
}

double StyleClassifierTrainer::train_step(const torch::Tensor& mels,
                                          const torch::Tensor& labels) {
  model_->train(true);
  const auto loss = cross_entropy(model_->encode_style(mels).class_logits, labels);
  const double value = loss.item<double>();
  if (!std::isfinite(value)) {
    throw NumericError("non-finite classification loss at step " + std::to_string(step_ + 1));
  }
  opt_->zero_grad();
  loss.backward();
  opt_->step();
  ++step_;
  return value;
}

PretrainResult pretrain_style_encoder(StyleClassifierTrainer& trainer,
                                      const MelDataset& train,
                                      const MelDataset* heldout,
                                      const MelConfig& mel,
                                      const AugmentConfig& augment, Rng& rng,
                                      const std::function<void(std::int64_t, double)>& on_step) {
  if (train.num_speakers() < 2) {
    throw ConfigError("style pretraining needs at least two speakers");
  }
  if (train.size() == 0) throw DataError("style pretraining set is empty");
  const auto& cfg = trainer.config();
  const auto total = cfg.total_steps(train.size());
  PretrainResult result;
  while (trainer.step() < total) {
    std::vector<torch::Tensor> windows;
    std::vector<int64_t> labels;
    for (int i = 0; i < cfg.batch_size; ++i) {
      const auto& u = train.utterances()[rng.uniform_index(train.size())];
      windows.push_back(make_window(u.mel, mel, augment, true, rng));
      labels.push_back(u.label);
    }
    const double loss =
        trainer.train_step(torch::stack(windows), torch::tensor(labels, torch::kLong));
    result.losses.push_back(loss);
    if (on_step) on_step(trainer.step(), loss);
  }
  if (heldout != nullptr && heldout->size() > 0) {
    result.heldout_accuracy = classification_accuracy(trainer.model(), *heldout, mel);
  }
  return result;
}

std::vector<int> classify(VoiceConversionModel& model, const torch::Tensor& mels) {
  torch::NoGradGuard no_grad;
  const bool was_training = model.is_training();
  model.train(false);
  std::vector<int> out;
  constexpr int64_t kChunk = 16;
  for (int64_t i = 0; i < mels.size(0); i += kChunk) {
    const auto part = mels.narrow(0, i, std::min(kChunk, mels.size(0) - i));
    const auto pred = model.encode_style(part).class_logits.argmax(1).contiguous();
    for (int64_t j = 0; j < pred.size(0); ++j) out.push_back(static_cast<int>(pred[j].item<int64_t>()));
  }
  model.train(was_training);
  return out;
}

double classification_accuracy(VoiceConversionModel& model, const MelDataset& data,
                               const MelConfig& mel) {
  if (data.size() == 0) throw EmptyInputError("no utterances to classify");
  Rng unused(0);
  std::vector<torch::Tensor> windows;
  for (const auto& u : data.utterances())
    windows.push_back(make_window(u.mel, mel, AugmentConfig{}, false, unused));
  const auto pred = classify(model, torch::stack(windows));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    hits += pred[i] == data.utterances()[i].label;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

std::uint64_t parameter_hash(const std::vector<torch::Tensor>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params) {
    const auto c = p.detach().to(torch::kFloat32).contiguous();
    const auto* bytes = static_cast<const unsigned char*>(c.data_ptr());
    const auto n = static_cast<std::size_t>(c.numel()) * sizeof(float);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace sgvc
