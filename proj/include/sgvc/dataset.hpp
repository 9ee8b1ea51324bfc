#pragma once

#include <torch/torch.h>

#include <string>
#include <vector>

#include "sgvc/dsp.hpp"
#include "sgvc/manifest.hpp"
#include "sgvc/rng.hpp"

namespace sgvc {

struct Utterance {
  std::string id;
  int label = 0;
  MelSpectrogram mel;  // full length, not yet cropped
};

/// Augmentation applied when drawing training windows.
struct AugmentConfig {
  bool enabled = true;
  double time_warp_prob = 0.5;
  double freq_mask_prob = 0.5;
  AugmentParams params;
};

/// In-memory mel corpus with a fixed speaker table.
class MelDataset {
 public:
  MelDataset(std::vector<Utterance> utterances, std::vector<std::string> speakers);

  /// Loads every manifest entry: ".mel" paths are read as cache blobs, anything
  /// else is decoded as audio and analyzed. Labels come from `speakers`; pass
  /// an empty table to use the manifest's own.
  static MelDataset load(const DatasetManifest& manifest, const MelConfig& cfg,
                         std::vector<std::string> speakers = {});

  const std::vector<Utterance>& utterances() const noexcept { return utterances_; }
  const std::vector<std::string>& speakers() const noexcept { return speakers_; }
  int num_speakers() const noexcept { return static_cast<int>(speakers_.size()); }
  std::size_t size() const noexcept { return utterances_.size(); }
  /// Utterance indices per label.
  const std::vector<std::vector<std::size_t>>& by_speaker() const noexcept {
    return by_speaker_;
  }

  /// Throws DataError if a speaker has fewer than two utterances.
  void validate_for_triplets() const;

 private:
  std::vector<Utterance> utterances_;
  std::vector<std::string> speakers_;
  std::vector<std::vector<std::size_t>> by_speaker_;
};

/// Fixed-width training window: random crop and augmentation when
/// `training`, frame-0 crop otherwise. Returns (1, rows, width).
torch::Tensor make_window(const MelSpectrogram& mel, const MelConfig& cfg,
                          const AugmentConfig& augment, bool training, Rng& rng);

struct Triplet {
  torch::Tensor x_s, x_t1, x_t2;  // (1, n_mels, width)
  int y_s = 0, y_t = 0;
  std::string source_id, target1_id, target2_id;
};

/// Uniform source utterance, uniform target speaker, two distinct target
/// utterances.
Triplet sample_triplet(const MelDataset& data, const MelConfig& cfg,
                       const AugmentConfig& augment, bool training, Rng& rng);

struct TripletBatch {
  torch::Tensor x_s, x_t1, x_t2;  // (B, 1, n_mels, width)
  torch::Tensor y_s, y_t;         // (B) int64
};

TripletBatch collate(const std::vector<Triplet>& triplets);

TripletBatch sample_batch(const MelDataset& data, const MelConfig& cfg,
                          const AugmentConfig& augment, int batch_size,
                          bool training, Rng& rng);

}  // namespace sgvc
