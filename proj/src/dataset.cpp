#include "sgvc/dataset.hpp"

#include <algorithm>

#include "sgvc/blob.hpp"
#include "sgvc/error.hpp"

namespace sgvc {

MelDataset::MelDataset(std::vector<Utterance> utterances,
                       std::vector<std::string> speakers)
    : utterances_(std::move(utterances)), speakers_(std::move(speakers)) {
  by_speaker_.resize(speakers_.size());
  for (std::size_t i = 0; i < utterances_.size(); ++i) {
    const int label = utterances_[i].label;
    if (label < 0 || label >= num_speakers()) {
      throw LabelError("utterance '" + utterances_[i].id + "' has label " +
                       std::to_string(label) + " outside the speaker table");
    }
    by_speaker_[static_cast<std::size_t>(label)].push_back(i);
  }
}

MelDataset MelDataset::load(const DatasetManifest& manifest, const MelConfig& cfg,
                            std::vector<std::string> speakers) {
  if (speakers.empty()) speakers = manifest.speakers();
  std::vector<Utterance> utts;
  utts.reserve(manifest.size());
  for (const auto& e : manifest.entries()) {
    Utterance u;
    u.id = e.utterance_id;
    const auto it = std::find(speakers.begin(), speakers.end(), e.speaker_id);
    if (it == speakers.end()) {
      throw DataError("speaker '" + e.speaker_id + "' is not in the speaker table");
    }
    u.label = static_cast<int>(it - speakers.begin());
    if (e.path.extension() == ".mel") {
      u.mel = read_mel_blob(e.path);
      if (u.mel.rows() != cfg.n_mels) {
        throw DataError("cached mel " + e.path.string() + " has " +
                        std::to_string(u.mel.rows()) + " rows");
      }
    } else {
      u.mel = mel_spectrogram(load_and_resample(e.path, cfg.sample_rate), cfg);
    }
    utts.push_back(std::move(u));
  }
  return MelDataset(std::move(utts), std::move(speakers));
}

void MelDataset::validate_for_triplets() const {
  if (utterances_.empty()) throw DataError("dataset is empty");
  for (std::size_t s = 0; s < by_speaker_.size(); ++s) {
    if (by_speaker_[s].size() < 2) {
      throw DataError("speaker '" + speakers_[s] + "' has " +
                      std::to_string(by_speaker_[s].size()) +
                      " utterance(s); triplet sampling needs at least 2");
    }
  }
}

torch::Tensor make_window(const MelSpectrogram& mel, const MelConfig& cfg,
                          const AugmentConfig& augment, bool training, Rng& rng) {
  auto window = fit_width(mel, cfg.target_width, cfg.pad_value(),
                          training ? CropMode::kRandom : CropMode::kDeterministic, &rng);
  if (training && augment.enabled) {
    if (rng.uniform() < augment.time_warp_prob)
      window = sgvc::augment(window, AugmentMode::kTimeWarp, augment.params, rng);
    if (rng.uniform() < augment.freq_mask_prob)
      window = sgvc::augment(window, AugmentMode::kFreqMask, augment.params, rng);
  }
  return window.values().unsqueeze(0);
}

Triplet sample_triplet(const MelDataset& data, const MelConfig& cfg,
                       const AugmentConfig& augment, bool training, Rng& rng) {
  const auto& utts = data.utterances();
  const auto& pool = data.by_speaker();
  Triplet t;
  const auto& src = utts[rng.uniform_index(utts.size())];
  t.y_t = static_cast<int>(rng.uniform_index(pool.size()));
  const auto& candidates = pool[static_cast<std::size_t>(t.y_t)];
  if (candidates.size() < 2) {
    throw DataError("speaker '" + data.speakers()[static_cast<std::size_t>(t.y_t)] +
                    "' has fewer than 2 utterances");
  }
  const auto first = rng.uniform_index(candidates.size());
  auto second = rng.uniform_index(candidates.size() - 1);
  if (second >= first) ++second;
  const auto& t1 = utts[candidates[first]];
  const auto& t2 = utts[candidates[second]];

  t.y_s = src.label;
  t.source_id = src.id;
  t.target1_id = t1.id;
  t.target2_id = t2.id;
  t.x_s = make_window(src.mel, cfg, augment, training, rng);
  t.x_t1 = make_window(t1.mel, cfg, augment, training, rng);
  t.x_t2 = make_window(t2.mel, cfg, augment, training, rng);
  return t;
}

TripletBatch collate(const std::vector<Triplet>& triplets) {
  std::vector<torch::Tensor> s, t1, t2;
  std::vector<int64_t> ys, yt;
  for (const auto& t : triplets) {
    s.push_back(t.x_s);
    t1.push_back(t.x_t1);
    t2.push_back(t.x_t2);
    ys.push_back(t.y_s);
    yt.push_back(t.y_t);
  }
  TripletBatch b;
  b.x_s = torch::stack(s);
  b.x_t1 = torch::stack(t1);
  b.x_t2 = torch::stack(t2);
  b.y_s = torch::tensor(ys, torch::kLong);
  b.y_t = torch::tensor(yt, torch::kLong);
  return b;
}

TripletBatch sample_batch(const MelDataset& data, const MelConfig& cfg,
                          const AugmentConfig& augment, int batch_size,
                          bool training, Rng& rng) {
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i)
    triplets.push_back(sample_triplet(data, cfg, augment, training, rng));
  return collate(triplets);
}

}  // namespace sgvc
