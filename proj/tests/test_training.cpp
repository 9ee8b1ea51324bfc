#include "support/doctest_torch.hpp"

#include <filesystem>

#include "sgvc/checkpoint.hpp"
#include "sgvc/error.hpp"
#include "sgvc/trainer.hpp"
#include "support/synth.hpp"

using namespace sgvc;
using namespace sgvc::testing;
namespace fs = std::filesystem;

namespace {

MelDataset random_dataset(int speakers, int per_speaker, uint64_t seed, bool same_distribution = false) {
  torch::manual_seed(seed);
  std::vector<Utterance> utts;
  std::vector<std::string> names;
  for (int s = 0; s < speakers; ++s) {
    names.push_back("s" + std::to_string(s));
    for (int i = 0; i < per_speaker; ++i) {
      Utterance u;
      u.id = names.back() + "_" + std::to_string(i);
      u.label = s;
      const double shift = same_distribution ? 0.0 : 2.0 * s;
      u.mel = MelSpectrogram(torch::randn({80, 230}) - 5 + shift);
      utts.push_back(std::move(u));
    }
  }
  return MelDataset(std::move(utts), names);
}

TrainConfig small_train(double lr = 1e-4) {
  TrainConfig tc;
  tc.batch_size = 2;
  tc.learning_rate = lr;
  tc.seed = 3;
  return tc;
}

std::vector<double> run_steps(int steps, uint64_t seed) {
  torch::manual_seed(seed);
  auto model = std::make_shared<VoiceConversionModel>(ModelConfig::compact(2));
  Trainer trainer(model, small_train());
  const auto data = random_dataset(2, 3, 1);
  Rng rng(seed);
  std::vector<double> out;
  for (int i = 0; i < steps; ++i) {
    const auto r = trainer.train_step(sample_batch(data, MelConfig{}, AugmentConfig{}, 2, true, rng));
    out.push_back(r.generator.total);
    out.push_back(r.discriminator_loss);
  }
  return out;
}

}  // namespace

TEST_CASE("zero learning rate leaves parameters bit-identical") {
  torch::manual_seed(1);
  auto model = std::make_shared<VoiceConversionModel>(ModelConfig::compact(2));
  Trainer trainer(model, small_train(0.0));
  const auto gen = parameter_hash(model->generator_parameters());
  const auto dis = parameter_hash(model->discriminator_parameters());
  Rng rng(1);
  const auto data = random_dataset(2, 2, 2);
  const auto r = trainer.train_step(sample_batch(data, MelConfig{}, AugmentConfig{}, 2, true, rng));
  CHECK(std::isfinite(r.generator.total));
  CHECK(parameter_hash(model->generator_parameters()) == gen);
  CHECK(parameter_hash(model->discriminator_parameters()) == dis);
  CHECK(trainer.step() == 1);
}

TEST_CASE("each half-step updates only its own network") {
  torch::manual_seed(2);
  auto model = std::make_shared<VoiceConversionModel>(ModelConfig::compact(2));
  Trainer trainer(model, small_train(1e-3));
  Rng rng(2);
  const auto data = random_dataset(2, 2, 3);
  const auto batch = sample_batch(data, MelConfig{}, AugmentConfig{}, 2, true, rng);

  auto gen = parameter_hash(model->generator_parameters());
  auto dis = parameter_hash(model->discriminator_parameters());
  trainer.discriminator_step(batch);
  CHECK(parameter_hash(model->generator_parameters()) == gen);
  CHECK(parameter_hash(model->discriminator_parameters()) != dis);

  gen = parameter_hash(model->generator_parameters());
  dis = parameter_hash(model->discriminator_parameters());
  trainer.generator_step(batch);
  CHECK(parameter_hash(model->generator_parameters()) != gen);
  CHECK(parameter_hash(model->discriminator_parameters()) == dis);
}

TEST_CASE("identical seeds give identical loss sequences") {
  const auto a = run_steps(3, 5);
  const auto b = run_steps(3, 5);
  CHECK(a == b);
  for (double v : a) CHECK(std::isfinite(v));
}

TEST_CASE("generator loss report matches its weighted sum") {
  torch::manual_seed(4);
  auto model = std::make_shared<VoiceConversionModel>(ModelConfig::compact(2));
  Trainer trainer(model, small_train());
  Rng rng(4);
  const auto data = random_dataset(2, 2, 4);
  const auto r = trainer.train_step(sample_batch(data, MelConfig{}, AugmentConfig{}, 2, true, rng)).generator;
  const LossWeights w;
  const double sum = w.adv * r.adv + w.id * (r.fake_id + r.trg_id) + w.style * r.style +
                     w.content * r.content + w.ds * r.ds + w.norm * r.norm + w.rec * r.rec;
  CHECK(std::abs(r.total - sum) < 1e-6);
  CHECK(r.adv <= 0);
  CHECK(r.ds <= 0);
}

TEST_CASE("train config validation and step budget") {
  TrainConfig tc;
  CHECK(tc.steps_per_epoch(100) == 7);
  CHECK(tc.total_steps(100) == 700);
  tc.max_steps = 5;
  CHECK(tc.total_steps(100) == 5);
  tc.batch_size = 1;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
  tc = {};
  tc.epochs = 0;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
}

TEST_CASE("style pretraining needs two speakers") {
  auto model = std::make_shared<VoiceConversionModel>(ModelConfig::compact(1));
  StyleClassifierTrainer trainer(model, small_train());
  Rng rng(1);
  const auto one = random_dataset(1, 4, 5);
  CHECK_THROWS_AS(pretrain_style_encoder(trainer, one, nullptr, MelConfig{}, AugmentConfig{}, rng),
                  ConfigError);
}

TEST_CASE("indistinguishable speakers classify at chance") {
  torch::manual_seed(6);
  auto model = std::make_shared<VoiceConversionModel>(ModelConfig::compact(2));
  auto tc = small_train(1e-3);
  tc.batch_size = 8;
  tc.max_steps = 20;
  StyleClassifierTrainer trainer(model, tc);
  Rng rng(6);
  const auto train = random_dataset(2, 10, 7, true);
  const auto heldout = random_dataset(2, 100, 8, true);
  const auto r = pretrain_style_encoder(trainer, train, &heldout, MelConfig{}, AugmentConfig{}, rng);
  MESSAGE("held-out accuracy on identical classes: " << r.heldout_accuracy);
  // Balanced classes: any decision rule scores 0.5 in expectation.
  CHECK(r.heldout_accuracy >= 0.5 - 3 * 0.0354);
  CHECK(r.heldout_accuracy <= 0.5 + 3 * 0.0354);
}

TEST_CASE("resumed style pretraining continues from the saved loss") {
  const auto dir = fs::temp_directory_path() / "sgvc_pretrain_resume";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto data = random_dataset(2, 6, 9);
  const MelConfig mel;
  AugmentConfig aug;
  aug.enabled = false;
  auto tc = small_train(1e-3);
  tc.batch_size = 4;

  torch::manual_seed(9);
  auto model = std::make_shared<VoiceConversionModel>(ModelConfig::compact(2));
  tc.max_steps = 10;
  StyleClassifierTrainer first(model, tc);
  Rng rng(9);
  pretrain_style_encoder(first, data, nullptr, mel, aug, rng);

  CheckpointMeta meta;
  meta.stage = "pretrain-style";
  meta.step = first.step();
  meta.model = model->config();
  meta.speakers = data.speakers();
  save_checkpoint(dir / "style", *model, meta, {{"style", &first.optimizer()}});

  // Continue the original and the restored run on identical batches.
  tc.max_steps = 15;
  StyleClassifierTrainer original(model, tc);
  original.optimizer().state() = std::move(first.optimizer().state());
  original.set_step(first.step());
  auto loaded = load_checkpoint(dir / "style");
  StyleClassifierTrainer resumed(loaded.model, tc);
  load_optimizer_state(dir / "style", "style", resumed.optimizer());
  resumed.set_step(loaded.meta.step);
  CHECK(resumed.step() == 10);

  Rng ra(10), rb(10);
  torch::manual_seed(10);
  const auto a = pretrain_style_encoder(original, data, nullptr, mel, aug, ra);
  torch::manual_seed(10);
  const auto b = pretrain_style_encoder(resumed, data, nullptr, mel, aug, rb);
  REQUIRE(a.losses.size() == 5);
  REQUIRE(b.losses.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(b.losses[i] - a.losses[i]) <= 0.05 * a.losses[i]);
}
