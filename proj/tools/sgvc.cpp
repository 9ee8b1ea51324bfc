// Command-line entry point: preprocess, pretrain-style, train, convert,
// reconstruct, evaluate, invert.

#include <torch/torch.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "sgvc/blob.hpp"
#include "sgvc/checkpoint.hpp"
#include "sgvc/config.hpp"
#include "sgvc/error.hpp"
#include "sgvc/evaluator.hpp"
#include "sgvc/inference.hpp"
#include "sgvc/manifest.hpp"
#include "sgvc/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sgvc;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool deterministic = false;
  std::string runs_dir = "runs";
  std::string run_dir;
};

RunConfig resolve_config(const Common& c) {
  RunConfig cfg;
  if (!c.config_path.empty()) cfg = load_run_config(c.config_path);
  for (const auto& o : c.overrides) apply_override(cfg, o);
  if (c.seed_given) cfg.train.seed = c.seed;
  cfg.validate();
  return cfg;
}

void seed_everything(const Common& c, std::uint64_t seed) {
  torch::manual_seed(seed);
  if (c.deterministic) {
    at::globalContext().setDeterministicAlgorithms(true, false);
    torch::set_num_threads(1);
  }
}

fs::path make_run_dir(const Common& c, std::uint64_t seed) {
  fs::path dir;
  if (!c.run_dir.empty()) {
    dir = c.run_dir;
  } else {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    localtime_r(&t, &tm);
    std::ostringstream name;
    name << std::put_time(&tm, "%Y%m%d-%H%M%S") << "_seed" << seed;
    dir = fs::path(c.runs_dir) / name.str();
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create run directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

class JsonlLog {
 public:
  explicit JsonlLog(const fs::path& path) : os_(path) {
    if (!os_) throw IoError("cannot write " + path.string());
  }
  void write(const json& j) {
    os_ << j.dump() << '\n';
    os_.flush();
  }

 private:
  std::ofstream os_;
};

fs::path cache_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("SGVC_CACHE_DIR"); env && *env) return env;
  return "cache";
}

// Picks the "train" split when the manifest has one, else every entry.
DatasetManifest split_or_all(const DatasetManifest& m, const std::string& split) {
  auto sub = m.filter_split(split);
  return sub.size() > 0 ? sub : m;
}

// --- preprocess ------------------------------------------------------------

int cmd_preprocess(const Common& c, const std::string& manifest_path, const std::string& cache_flag,
                   int jobs) {
  const auto cfg = resolve_config(c);
  const auto manifest = read_manifest(manifest_path);
  if (manifest.size() == 0) throw EmptyInputError("manifest has no entries");
  const auto root = cache_root(cache_flag) / fs::path(manifest_path).stem();
  fs::create_directories(root / "mels");

  std::vector<ManifestEntry> out(manifest.entries());
  const std::size_t n = out.size();
  const int workers = std::max(1, jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency()));
  std::vector<std::future<void>> tasks;
  for (int w = 0; w < workers; ++w) {
    tasks.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < n; i += workers) {
        auto& e = out[i];
        const auto wave = load_and_resample(e.path, cfg.mel.sample_rate);
        const auto mel = mel_spectrogram(wave, cfg.mel);
        const auto dest = root / "mels" / (e.speaker_id + "__" + e.utterance_id + ".mel");
        write_mel_blob(dest, mel);
        e.path = dest;
      }
    }));
  }
  for (auto& t : tasks) t.get();
  write_manifest(root / "manifest.csv", DatasetManifest(out));
  write_json(root / "mel_config.json", to_json(cfg.mel));
  std::cout << "wrote " << n << " mel entries and " << (root / "manifest.csv").string() << '\n';
  return 0;
}

// --- pretrain-style --------------------------------------------------------

int cmd_pretrain(const Common& c, const std::string& manifest_path, const std::string& train_split,
                 const std::string& heldout_split) {
  auto cfg = resolve_config(c);
  const auto manifest = read_manifest(manifest_path);
  auto speakers = manifest.speakers();
  cfg.model.num_speakers = static_cast<int>(speakers.size());
  cfg.validate();
  seed_everything(c, cfg.train.seed);

  const auto train = MelDataset::load(split_or_all(manifest, train_split), cfg.mel, speakers);
  std::optional<MelDataset> heldout;
  if (!heldout_split.empty()) {
    const auto sub = manifest.filter_split(heldout_split);
    if (sub.size() > 0) heldout = MelDataset::load(sub, cfg.mel, speakers);
  }

  const auto run = make_run_dir(c, cfg.train.seed);
  write_json(run / "config.json", to_json(cfg));
  auto model = std::make_shared<VoiceConversionModel>(cfg.model);
  StyleClassifierTrainer trainer(model, cfg.train);
  Rng rng(cfg.train.seed);
  JsonlLog log(run / "pretrain_log.jsonl");
  const auto result = pretrain_style_encoder(
      trainer, train, heldout ? &*heldout : nullptr, cfg.mel, cfg.augment, rng,
      [&](std::int64_t step, double loss) {
        log.write({{"step", step}, {"id", loss}, {"lr", cfg.train.learning_rate}});
      });

  CheckpointMeta meta;
  meta.stage = "pretrain-style";
  meta.step = trainer.step();
  meta.model = cfg.model;
  meta.mel = cfg.mel;
  meta.speakers = speakers;
  if (result.heldout_accuracy >= 0) meta.extra["heldout_accuracy"] = result.heldout_accuracy;
  save_checkpoint(run / "style", *model, meta, {{"style", &trainer.optimizer()}});
  if (result.heldout_accuracy >= 0)
    std::cout << "held-out accuracy " << result.heldout_accuracy << '\n';
  std::cout << "checkpoint " << (run / "style").string() << '\n';
  return 0;
}

// --- train -----------------------------------------------------------------

int cmd_train(const Common& c, const std::string& manifest_path, const std::string& train_split,
              const std::string& init_style, const std::string& resume) {
  auto cfg = resolve_config(c);
  const auto manifest = read_manifest(manifest_path);
  auto speakers = manifest.speakers();
  cfg.model.num_speakers = static_cast<int>(speakers.size());
  cfg.validate();
  seed_everything(c, cfg.train.seed);

  const auto data = MelDataset::load(split_or_all(manifest, train_split), cfg.mel, speakers);
  data.validate_for_triplets();

  std::shared_ptr<VoiceConversionModel> model;
  std::int64_t start_step = 0;
  if (!resume.empty()) {
    auto loaded = load_checkpoint(resume, &cfg.model);
    if (loaded.meta.speakers != speakers)
      throw SchemaError("resume checkpoint was trained on a different speaker table");
    model = loaded.model;
    start_step = loaded.meta.step;
  } else {
    model = std::make_shared<VoiceConversionModel>(cfg.model);
    if (!init_style.empty()) {
      auto style = load_checkpoint(init_style, &cfg.model);
      if (style.meta.speakers != speakers)
        throw SchemaError("style checkpoint was trained on a different speaker table");
      torch::NoGradGuard no_grad;
      auto src = module_tensors(*style.model->style_encoder);
      auto dst = module_tensors(*model->style_encoder);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i].second.copy_(src[i].second);
    }
  }

  Trainer trainer(model, cfg.train);
  if (!resume.empty()) {
    load_optimizer_state(resume, "generator", trainer.generator_optimizer());
    load_optimizer_state(resume, "discriminator", trainer.discriminator_optimizer());
    trainer.set_step(start_step);
  }

  const auto run = make_run_dir(c, cfg.train.seed);
  write_json(run / "config.json", to_json(cfg));
  JsonlLog log(run / "train_log.jsonl");
  // Resumed runs continue a distinct but reproducible sample stream.
  Rng rng(cfg.train.seed + static_cast<std::uint64_t>(start_step));

  FitHooks hooks;
  hooks.on_step = [&](const StepReport& r) {
    const auto& g = r.generator;
    log.write({{"step", r.step},
               {"adv", g.adv},
               {"fake_id", g.fake_id},
               {"trg_id", g.trg_id},
               {"style", g.style},
               {"content", g.content},
               {"ds", g.ds},
               {"norm", g.norm},
               {"rec", g.rec},
               {"total", g.total},
               {"d_loss", r.discriminator_loss},
               {"lr", r.learning_rate},
               {"wall_ms", c.deterministic ? 0.0 : r.wall_ms}});
  };
  hooks.on_checkpoint = [&](std::int64_t step) {
    CheckpointMeta meta;
    meta.stage = "train";
    meta.step = step;
    meta.model = cfg.model;
    meta.mel = cfg.mel;
    meta.speakers = speakers;
    std::ostringstream name;
    name << "step_" << std::setw(7) << std::setfill('0') << step;
    const auto dir = run / "checkpoints" / name.str();
    fs::create_directories(dir.parent_path());
    save_checkpoint(dir, *model, meta,
                    {{"generator", &trainer.generator_optimizer()},
                     {"discriminator", &trainer.discriminator_optimizer()}});
    std::cout << "checkpoint " << dir.string() << '\n';
  };
  fit(trainer, data, cfg.mel, cfg.augment, rng, hooks);
  return 0;
}

// --- convert / reconstruct / invert ----------------------------------------

void write_output_wave(const fs::path& out, const MelSpectrogram& mel, const MelConfig& cfg,
                       int iters, std::uint64_t seed) {
  const auto result = griffin_lim_invert(mel, cfg, iters, seed);
  write_wav(out, result.wave);
  std::cout << "wrote " << out.string() << '\n';
}

int cmd_convert(const Common& c, const std::string& ckpt, const std::string& source,
                const std::string& target_speaker, const std::vector<std::string>& target_wavs,
                const std::string& manifest_path, int max_refs, const std::string& output,
                const std::string& mel_output, int iters) {
  const auto loaded = load_checkpoint(ckpt);
  const auto& mel_cfg = loaded.meta.mel;
  auto& model = *loaded.model;
  const std::uint64_t seed = c.seed_given ? c.seed : 0;
  seed_everything(c, seed);

  std::vector<MelSpectrogram> refs;
  for (const auto& p : target_wavs)
    refs.push_back(mel_spectrogram(load_and_resample(p, mel_cfg.sample_rate), mel_cfg));
  if (!target_speaker.empty()) {
    if (manifest_path.empty())
      throw ConfigError("--target-speaker needs --manifest to find reference utterances");
    const auto manifest = read_manifest(manifest_path);
    std::vector<ManifestEntry> mine;
    for (const auto& e : manifest.entries())
      if (e.speaker_id == target_speaker) mine.push_back(e);
    if (mine.empty()) throw DataError("speaker '" + target_speaker + "' has no utterance in the manifest");
    if (max_refs > 0 && static_cast<int>(mine.size()) > max_refs) mine.resize(max_refs);
    const auto ds = MelDataset::load(DatasetManifest(mine), mel_cfg);
    for (const auto& u : ds.utterances()) refs.push_back(u.mel);
  }
  if (refs.empty()) throw ConfigError("give --target-speaker or --target-wav");

  const auto src = mel_spectrogram(load_and_resample(source, mel_cfg.sample_rate), mel_cfg);
  const auto out = convert_mel(model, src, reference_style(model, refs, mel_cfg), mel_cfg);
  if (!mel_output.empty()) write_mel_blob(mel_output, out);
  write_output_wave(output, out, mel_cfg, iters, seed);
  return 0;
}

int cmd_reconstruct(const Common& c, const std::string& ckpt, const std::string& source,
                    const std::string& output, const std::string& mel_output, int iters) {
  const auto loaded = load_checkpoint(ckpt);
  const auto& mel_cfg = loaded.meta.mel;
  const std::uint64_t seed = c.seed_given ? c.seed : 0;
  seed_everything(c, seed);
  const auto src = mel_spectrogram(load_and_resample(source, mel_cfg.sample_rate), mel_cfg);
  const auto out = reconstruct_mel(*loaded.model, src, mel_cfg);
  if (!mel_output.empty()) write_mel_blob(mel_output, out);
  write_output_wave(output, out, mel_cfg, iters, seed);
  return 0;
}

int cmd_invert(const Common& c, const std::string& mel_path, const std::string& output, int iters) {
  const auto cfg = resolve_config(c);
  const auto mel = read_mel_blob(mel_path);
  if (mel.rows() != cfg.mel.n_mels)
    throw DataError("mel has " + std::to_string(mel.rows()) + " rows, config expects " +
                    std::to_string(cfg.mel.n_mels));
  write_output_wave(output, mel, cfg.mel, iters, cfg.train.seed);
  return 0;
}

// --- evaluate --------------------------------------------------------------

std::map<std::string, std::string> read_genders(const std::string& path) {
  std::map<std::string, std::string> out;
  if (path.empty()) return out;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    const auto f = split_csv_line(line);
    if (f.size() >= 2) out[f[0]] = f[1];
  }
  return out;
}

int cmd_evaluate(const Common& c, const std::string& records_path, const std::string& classifier,
                 const std::string& report_path, const std::string& export_path,
                 const std::string& genders_path) {
  const auto cfg = resolve_config(c);
  const auto records = read_records(records_path);
  if (records.empty()) throw EmptyInputError("no conversion records in " + records_path);
  if (!export_path.empty()) export_external_manifest(records, export_path);

  MelConfig mel_cfg = cfg.mel;
  std::optional<double> cls;
  if (!classifier.empty()) {
    auto loaded = load_checkpoint(classifier);
    mel_cfg = loaded.meta.mel;
    cls = compute_cls(records, *loaded.model, loaded.meta.speakers, mel_cfg);
  }
  const auto report = f0_report(records, mel_cfg);
  write_evaluation_report(report_path, report, cls, read_genders(genders_path));
  std::cout << "mF0_diff " << report.m_f0_diff << " Hz";
  if (cls) std::cout << ", CLS " << *cls;
  std::cout << ", invalid " << report.invalid_count << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subband GAN voice conversion"};
  app.require_subcommand(1);
  Common common;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "JSON run configuration");
    sub->add_option("--override", common.overrides, "key=value, repeatable");
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& s) { common.seed = s, common.seed_given = true; },
        "Random seed");
    sub->add_flag("--deterministic", common.deterministic,
                  "Deterministic kernels, one thread, zero wall-clock fields in logs");
  };
  auto add_run = [&](CLI::App* sub) {
    sub->add_option("--runs-dir", common.runs_dir, "Parent of timestamped run directories");
    sub->add_option("--run-dir", common.run_dir, "Exact run directory");
  };

  std::string manifest, cache_dir, train_split = "train", heldout_split = "test";
  std::string init_style, resume, checkpoint, source, target_speaker, output, mel_output;
  std::string mel_path, records, classifier, report = "evaluation.json", export_path, genders;
  std::vector<std::string> target_wavs;
  int jobs = 0, iters = 60, max_refs = 8;

  auto* pre = app.add_subcommand("preprocess", "Audio to mel cache plus cache manifest");
  add_common(pre);
  pre->add_option("--manifest", manifest, "Audio manifest CSV")->required();
  pre->add_option("--cache-dir", cache_dir, "Cache root (default $SGVC_CACHE_DIR or ./cache)");
  pre->add_option("--jobs", jobs, "Worker threads");

  auto* pt = app.add_subcommand("pretrain-style", "Pretrain the style encoder as a classifier");
  add_common(pt);
  add_run(pt);
  pt->add_option("--manifest", manifest, "Manifest CSV")->required();
  pt->add_option("--train-split", train_split);
  pt->add_option("--heldout-split", heldout_split);

  auto* tr = app.add_subcommand("train", "Train generator and discriminator");
  add_common(tr);
  add_run(tr);
  tr->add_option("--manifest", manifest, "Manifest CSV")->required();
  tr->add_option("--train-split", train_split);
  tr->add_option("--init-style", init_style, "Pretrained style checkpoint");
  tr->add_option("--resume", resume, "Training checkpoint to continue from");

  auto* cv = app.add_subcommand("convert", "Convert a wav to a target speaker");
  add_common(cv);
  cv->add_option("--checkpoint", checkpoint)->required();
  cv->add_option("--source", source, "Source wav")->required();
  cv->add_option("--target-speaker", target_speaker);
  cv->add_option("--target-wav", target_wavs, "Reference wav, repeatable");
  cv->add_option("--manifest", manifest, "Manifest holding the target speaker's utterances");
  cv->add_option("--max-refs", max_refs);
  cv->add_option("--output", output)->required();
  cv->add_option("--mel-output", mel_output);
  cv->add_option("--iters", iters, "Griffin-Lim iterations");

  auto* rc = app.add_subcommand("reconstruct", "Self-reconstruct a wav");
  add_common(rc);
  rc->add_option("--checkpoint", checkpoint)->required();
  rc->add_option("--source", source)->required();
  rc->add_option("--output", output)->required();
  rc->add_option("--mel-output", mel_output);
  rc->add_option("--iters", iters);

  auto* ev = app.add_subcommand("evaluate", "F0 difference and classification metrics");
  add_common(ev);
  ev->add_option("--records", records, "Conversion records CSV")->required();
  ev->add_option("--classifier", classifier, "Pretrained style checkpoint for CLS");
  ev->add_option("--report", report);
  ev->add_option("--export-manifest", export_path, "Manifest for external scoring tools");
  ev->add_option("--genders", genders, "CSV speaker,gender");

  auto* inv = app.add_subcommand("invert", "Griffin-Lim round trip of a cached mel");
  add_common(inv);
  inv->add_option("--mel", mel_path)->required();
  inv->add_option("--output", output)->required();
  inv->add_option("--iters", iters);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return exit_code(ErrorKind::kConfig);
  }

  try {
    if (*pre) return cmd_preprocess(common, manifest, cache_dir, jobs);
    if (*pt) return cmd_pretrain(common, manifest, train_split, heldout_split);
    if (*tr) return cmd_train(common, manifest, train_split, init_style, resume);
    if (*cv)
      return cmd_convert(common, checkpoint, source, target_speaker, target_wavs, manifest,
                         max_refs, output, mel_output, iters);
    if (*rc) return cmd_reconstruct(common, checkpoint, source, output, mel_output, iters);
    if (*ev) return cmd_evaluate(common, records, classifier, report, export_path, genders);
    if (*inv) return cmd_invert(common, mel_path, output, iters);
  } catch (const Error& e) {
    std::cerr << "sgvc: " << to_string(e.kind()) << " error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "sgvc: internal error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
