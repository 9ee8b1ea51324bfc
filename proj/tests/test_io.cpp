#include "support/doctest_torch.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "sgvc/blob.hpp"
#include "sgvc/checkpoint.hpp"
#include "sgvc/config.hpp"
#include "sgvc/dataset.hpp"
#include "sgvc/error.hpp"
#include "sgvc/manifest.hpp"
#include "sgvc/trainer.hpp"
#include "support/synth.hpp"

using namespace sgvc;
using namespace sgvc::testing;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("sgvc_io_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

MelDataset toy_dataset(int speakers, int per_speaker, int64_t width = 240) {
  std::vector<Utterance> utts;
  std::vector<std::string> names;
  for (int s = 0; s < speakers; ++s) {
    names.push_back("s" + std::to_string(s));
    for (int i = 0; i < per_speaker; ++i) {
      Utterance u;
      u.id = names.back() + "_" + std::to_string(i);
      u.label = s;
      u.mel = MelSpectrogram(torch::full({80, width}, static_cast<float>(s * 100 + i)));
      utts.push_back(std::move(u));
    }
  }
  return MelDataset(std::move(utts), names);
}

}  // namespace

TEST_CASE("mel blob round trip and integrity") {
  const auto dir = fresh_dir("blob");
  const auto mel = MelSpectrogram(torch::randn({80, 37}));
  write_mel_blob(dir / "a.mel", mel);
  CHECK(fs::file_size(dir / "a.mel") == 16 + 80 * 37 * 4);
  CHECK(torch::equal(read_mel_blob(dir / "a.mel").values(), mel.values()));
  CHECK_FALSE(fs::exists(dir / "a.mel.tmp"));

  fs::resize_file(dir / "a.mel", fs::file_size(dir / "a.mel") - 4);
  CHECK_THROWS_AS(read_mel_blob(dir / "a.mel"), IntegrityError);
  std::ofstream(dir / "bad.mel") << "NOPE1234567890123456";
  CHECK_THROWS_AS(read_mel_blob(dir / "bad.mel"), SchemaError);
  CHECK_THROWS_AS(read_mel_blob(dir / "none.mel"), IoError);
}

TEST_CASE("tensor archive checksum") {
  const auto dir = fresh_dir("archive");
  NamedTensors t = {{"w", torch::randn({3, 4})}, {"b", torch::randn({4})}};
  write_tensor_archive(dir / "t.bin", t);
  const auto back = read_tensor_archive(dir / "t.bin");
  REQUIRE(back.size() == 2);
  CHECK(back[0].first == "w");
  CHECK(torch::equal(back[0].second, t[0].second));
  {
    std::fstream f(dir / "t.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(-2, std::ios::end);
    f.put('\x7f');
  }
  CHECK_THROWS_AS(read_tensor_archive(dir / "t.bin"), IntegrityError);
}

TEST_CASE("manifest parsing, speakers and validation") {
  const auto dir = fresh_dir("manifest");
  std::ofstream(dir / "m.csv") << "utterance_id,speaker_id,path,split\n"
                                  "u1,bob,a/u1.wav,train\n"
                                  "u2,\"al,ice\",/abs/u2.wav,test\n"
                                  "u3,bob,a/u3.wav,train\n";
  const auto m = read_manifest(dir / "m.csv");
  REQUIRE(m.size() == 3);
  CHECK(m.entries()[0].path == dir / "a/u1.wav");
  CHECK(m.entries()[1].path == fs::path("/abs/u2.wav"));
  CHECK((m.speakers() == std::vector<std::string>{"al,ice", "bob"}));
  CHECK(m.speaker_index("bob") == 1);
  CHECK(m.speaker_index("carol") == -1);
  CHECK(m.filter_split("train").size() == 2);
  CHECK_THROWS_AS(m.validate(2), DataError);
  CHECK_NOTHROW(m.filter_split("train").validate(2));

  write_manifest(dir / "out.csv", m);
  const auto back = read_manifest(dir / "out.csv");
  CHECK(back.entries()[1].speaker_id == "al,ice");
  CHECK(back.entries()[2].path == m.entries()[2].path);
}

TEST_CASE("triplet sampling is reproducible and valid") {
  const auto data = toy_dataset(2, 2);
  MelConfig cfg;
  AugmentConfig aug;
  Rng a(1), b(1);
  for (int i = 0; i < 20; ++i) {
    const auto x = sample_triplet(data, cfg, aug, true, a);
    const auto y = sample_triplet(data, cfg, aug, true, b);
    CHECK(x.source_id == y.source_id);
    CHECK(x.target1_id == y.target1_id);
    CHECK(torch::equal(x.x_s, y.x_s));
    CHECK(x.x_s.sizes() == torch::IntArrayRef({1, 80, 224}));
  }
}

TEST_CASE("a speaker with one utterance is rejected") {
  std::vector<Utterance> u(3);
  for (int i = 0; i < 3; ++i) {
    u[i].id = "u" + std::to_string(i);
    u[i].label = i == 2 ? 1 : 0;
    u[i].mel = MelSpectrogram(torch::zeros({80, 230}));
  }
  MelDataset d(u, {"a", "b"});
  CHECK_THROWS_AS(d.validate_for_triplets(), DataError);
}

TEST_CASE("target speakers are uniform (chi-square, 10 speakers)") {
  const auto data = toy_dataset(10, 3, 224);
  MelConfig cfg;
  AugmentConfig aug;
  aug.enabled = false;
  Rng rng(42);
  std::vector<int> counts(10, 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[sample_triplet(data, cfg, aug, false, rng).y_t];
  double chi2 = 0;
  for (int c : counts) {
    CHECK(std::abs(c - draws / 10.0) <= 0.1 * draws / 10.0);
    chi2 += (c - draws / 10.0) * (c - draws / 10.0) / (draws / 10.0);
  }
  CHECK(chi2 < 27.88);  // 99.9% quantile, 9 degrees of freedom
}

TEST_CASE("target utterances always differ over 100000 draws") {
  const auto data = toy_dataset(3, 2, 224);
  MelConfig cfg;
  AugmentConfig aug;
  aug.enabled = false;
  Rng rng(7);
  for (int i = 0; i < 100000; ++i) {
    const auto t = sample_triplet(data, cfg, aug, false, rng);
    if (t.target1_id == t.target2_id) FAIL("identical target utterances at draw " << i);
  }
}

TEST_CASE("batch collation shapes") {
  const auto data = toy_dataset(2, 3);
  Rng rng(3);
  const auto b = sample_batch(data, MelConfig{}, AugmentConfig{}, 4, true, rng);
  CHECK(b.x_s.sizes() == torch::IntArrayRef({4, 1, 80, 224}));
  CHECK(b.y_t.sizes() == torch::IntArrayRef({4}));
  CHECK(b.y_t.dtype() == torch::kLong);
}

TEST_CASE("config JSON round trip and overrides") {
  RunConfig cfg;
  apply_override(cfg, "epochs=1");
  apply_override(cfg, "model.num_subbands=2");
  apply_override(cfg, "train.weights.rec=7.5");
  apply_override(cfg, "learning_rate=0.002");
  CHECK(cfg.train.epochs == 1);
  CHECK(cfg.model.num_subbands == 2);
  CHECK(cfg.train.weights.rec == 7.5);
  CHECK(cfg.train.learning_rate == 0.002);
  CHECK_THROWS_AS(apply_override(cfg, "no_such_key=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "epochs"), ConfigError);

  const auto back = run_config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
  auto j = to_json(cfg);
  j["model"]["bogus"] = 3;
  CHECK_THROWS_AS(run_config_from_json(j), ConfigError);

  RunConfig bad;
  bad.train.batch_size = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.model.num_subbands = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("checkpoint round trip is bit exact") {
  const auto dir = fresh_dir("ckpt");
  torch::manual_seed(11);
  auto model = std::make_shared<VoiceConversionModel>(ModelConfig::compact(2));
  TrainConfig tc;
  tc.batch_size = 2;
  Trainer trainer(model, tc);
  Rng rng(1);
  const auto data = toy_dataset(2, 2);
  trainer.train_step(sample_batch(data, MelConfig{}, AugmentConfig{}, 2, true, rng));

  CheckpointMeta meta;
  meta.stage = "train";
  meta.step = trainer.step();
  meta.model = model->config();
  meta.speakers = {"s0", "s1"};
  save_checkpoint(dir / "c", *model, meta,
                  {{"generator", &trainer.generator_optimizer()},
                   {"discriminator", &trainer.discriminator_optimizer()}});
  CHECK_FALSE(fs::exists(dir / "c.partial"));

  const auto loaded = load_checkpoint(dir / "c");
  CHECK(loaded.meta.step == 1);
  CHECK(loaded.meta.speakers == meta.speakers);
  const auto a = module_tensors(*model->decoder), b = module_tensors(*loaded.model->decoder);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(torch::equal(a[i].second, b[i].second));
  for (const auto& [name, net] : model->networks()) {
    const auto x = module_tensors(*net);
    for (const auto& [lname, lnet] : loaded.model->networks()) {
      if (lname != name) continue;
      const auto y = module_tensors(*lnet);
      for (std::size_t i = 0; i < x.size(); ++i) CHECK(torch::equal(x[i].second, y[i].second));
    }
  }

  model->train(false);
  loaded.model->train(false);
  torch::NoGradGuard no_grad;
  const auto xin = torch::randn({1, 1, 80, 224});
  CHECK(torch::equal(model->convert(xin, xin), loaded.model->convert(xin, xin)));

  Trainer resumed(loaded.model, tc);
  load_optimizer_state(dir / "c", "generator", resumed.generator_optimizer());
  const auto& st = resumed.generator_optimizer().state();
  CHECK(st.size() == trainer.generator_optimizer().state().size());

  auto other = ModelConfig::compact(3);
  try {
    load_checkpoint(dir / "c", &other);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("num_speakers") != std::string::npos);
  }

  auto j = nlohmann::json::parse(std::ifstream(dir / "c" / "meta.json"));
  j["schema_version"] = 99;
  std::ofstream(dir / "c" / "meta.json") << j.dump();
  CHECK_THROWS_AS(read_checkpoint_meta(dir / "c"), SchemaError);
}
