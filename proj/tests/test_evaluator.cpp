#include "support/doctest_torch.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "sgvc/error.hpp"
#include "sgvc/evaluator.hpp"
#include "sgvc/inference.hpp"
#include "support/synth.hpp"

using namespace sgvc;
using namespace sgvc::testing;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("sgvc_eval_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("F0 difference basics") {
  MelConfig cfg;
  const auto a = harmonic_tone(180, timbre(0), 1.0);
  const std::vector<Waveform> self{a};
  const auto same = compute_f0_diff(a, self, cfg);
  CHECK(same.valid);
  CHECK(same.value == 0.0);

  const std::vector<Waveform> ref{sine(330, 1.0)};
  const auto d = compute_f0_diff(sine(220, 1.0), ref, cfg);
  CHECK(std::abs(d.value - 110.0) <= 3.0);
  const std::vector<Waveform> swapped_ref{sine(220, 1.0)};
  CHECK(compute_f0_diff(sine(330, 1.0), swapped_ref, cfg).value == doctest::Approx(d.value));

  Waveform silence;
  silence.samples.assign(22050, 0.0f);
  CHECK_FALSE(compute_f0_diff(silence, ref, cfg).valid);
  CHECK_THROWS_AS(compute_f0_diff(a, {}, cfg), EmptyInputError);
}

TEST_CASE("F0 report over records: per speaker, mean, invalid count") {
  const auto dir = fresh_dir("report");
  MelConfig cfg;
  std::vector<ConversionRecord> records;
  std::vector<double> expected;
  for (int s = 0; s < 3; ++s) {
    const auto ref = dir / ("ref" + std::to_string(s) + ".wav");
    write_wav(ref, sine(150 + 50 * s, 0.8));
    for (int k = 0; k < 2; ++k) {
      const double f = 140 + 30 * s + 17 * k;
      const auto conv = dir / ("c" + std::to_string(s) + std::to_string(k) + ".wav");
      write_wav(conv, sine(f, 0.8));
      records.push_back({"u" + std::to_string(s * 2 + k), "spk" + std::to_string(s), conv, {ref}, ""});
    }
  }
  Waveform silence;
  silence.samples.assign(20000, 0.0f);
  write_wav(dir / "silent.wav", silence);
  records.push_back({"dead", "spk0", dir / "silent.wav", {dir / "ref0.wav"}, ""});

  const auto rep = f0_report(records, cfg);
  CHECK(rep.invalid_count == 1);
  REQUIRE(rep.per_record.size() == 6);
  double sum = 0;
  for (double v : rep.per_record) sum += v;
  CHECK(std::abs(rep.m_f0_diff - sum / 6) < 1e-9);
  REQUIRE(rep.per_speaker.size() == 3);
  CHECK(rep.per_speaker[0].invalid == 1);
  CHECK(rep.per_speaker[0].f0_diff == doctest::Approx((rep.per_record[0] + rep.per_record[1]) / 2));
  for (const auto& s : rep.per_speaker) CHECK(s.f0_diff >= 0);

  write_evaluation_report(dir / "report.json", rep, 0.75, {{"spk1", "F"}});
  const auto j = nlohmann::json::parse(std::ifstream(dir / "report.json"));
  CHECK(j["records_invalid"] == 1);
  CHECK(j["cls"] == 0.75);
  CHECK(j["per_speaker"][1]["gender"] == "F");
  CHECK_FALSE(j["per_speaker"][0].contains("gender"));
}

TEST_CASE("mF0_diff is the arithmetic mean of per-pair values") {
  Rng rng(3);
  std::vector<double> v;
  double sum = 0;
  for (int i = 0; i < 10; ++i) {
    v.push_back(rng.uniform() * 40);
    sum += v.back();
  }
  CHECK(std::abs(mean_f0_diff(v) - sum / 10) < 1e-9);
}

TEST_CASE("external manifest export and round trip") {
  const auto dir = fresh_dir("export");
  fs::create_directories(dir / "conv");
  std::vector<ConversionRecord> records = {
      {"a", "spk0", dir / "conv" / "a.wav", {dir / "r1.wav", dir / "r2.wav"}, ""},
      {"b", "spk1", dir / "conv" / "b.wav", {dir / "r3.wav"}, "hello, world"},
      {"c", "spk0", dir / "conv" / "c.wav", {dir / "r1.wav"}, ""}};
  export_external_manifest(records, dir / "out" / "ext.csv");
  std::ifstream in(dir / "out" / "ext.csv");
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  REQUIRE(lines.size() == 4);
  CHECK(lines[1].find("../conv/a.wav") != std::string::npos);
  CHECK(lines[1].find(dir.string()) == std::string::npos);

  const auto back = read_external_manifest(dir / "out" / "ext.csv");
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].source_id == records[i].source_id);
    CHECK(back[i].target_speaker == records[i].target_speaker);
    CHECK(back[i].transcript == records[i].transcript);
    CHECK(fs::weakly_canonical(back[i].converted_wave_path) ==
          fs::weakly_canonical(records[i].converted_wave_path));
    REQUIRE(back[i].target_reference_paths.size() == records[i].target_reference_paths.size());
  }
  CHECK_THROWS_AS(export_external_manifest(records, "/proc/forbidden/ext.csv"), IoError);
}

TEST_CASE("CLS: empty input, unknown speaker, chance on noise, permutation") {
  const auto dir = fresh_dir("cls");
  MelConfig cfg;
  torch::manual_seed(5);
  VoiceConversionModel clf(ModelConfig::compact(4));
  const std::vector<std::string> speakers = {"a", "b", "c", "d"};
  CHECK_THROWS_AS(compute_cls({}, clf, speakers, cfg), EmptyInputError);

  std::vector<ConversionRecord> records;
  for (int i = 0; i < 200; ++i) {
    const auto p = dir / ("n" + std::to_string(i) + ".wav");
    write_wav(p, white_noise(0.3, 100 + i));
    records.push_back({"n" + std::to_string(i), speakers[i % 4], p, {}, ""});
  }
  auto bad = records;
  bad[3].target_speaker = "zed";
  CHECK_THROWS_AS(compute_cls(bad, clf, speakers, cfg), SchemaError);

  const double acc = compute_cls(records, clf, speakers, cfg);
  MESSAGE("CLS on noise with 4 classes: " << acc);
  const double sigma = std::sqrt(0.25 * 0.75 / 200);
  CHECK(std::abs(acc - 0.25) <= 3 * sigma);

  auto shuffled = records;
  std::reverse(shuffled.begin(), shuffled.end());
  CHECK(compute_cls(shuffled, clf, speakers, cfg) == acc);
}

TEST_CASE("reconstruction is conversion with the source's own style") {
  torch::manual_seed(6);
  VoiceConversionModel m(ModelConfig::compact(2));
  MelConfig cfg;
  const auto src = mel_spectrogram(harmonic_tone(150, timbre(1), 3.2), cfg);
  const auto rec = reconstruct_mel(m, src, cfg);
  const auto conv = convert_mel(m, src, reference_style(m, {src}, cfg), cfg);
  CHECK(rec.width() == src.width());
  CHECK(rec.rows() == 80);
  CHECK(torch::equal(rec.values(), conv.values()));
  CHECK_THROWS_AS(reference_style(m, {}, cfg), EmptyInputError);
}
