#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

#include "sgvc/rng.hpp"
#include "sgvc/wav.hpp"

namespace sgvc {

struct MelConfig {
  int fft_size = 1024;
  int hop_size = 256;
  int n_mels = 80;
  int target_width = 224;
  int sample_rate = 22050;
  double log_floor = 1e-5;
  /// Pad short spectrograms with literal 0 instead of the silence value.
  bool literal_zero_pad = false;

  /// Value of a cell with no energy: log(log_floor).
  double silence_value() const;
  /// Value used by fit_width when padding.
  double pad_value() const;

  /// Throws ConfigError when the invariants do not hold.
  void validate(int num_subbands = 1) const;
};

/// Log-mel spectrogram, n_mels x width, row 0 is the lowest mel band.
class MelSpectrogram {
 public:
  MelSpectrogram() = default;
  /// Takes a 2-D float tensor (rows x frames).
  explicit MelSpectrogram(torch::Tensor values);

  const torch::Tensor& values() const noexcept { return values_; }
  std::int64_t rows() const { return values_.size(0); }
  std::int64_t width() const { return values_.size(1); }
  float at(std::int64_t row, std::int64_t frame) const;

  /// (1, 1, rows, width) view for the networks.
  torch::Tensor as_batch() const;

 private:
  torch::Tensor values_;
};

/// Frequency (Hz) to HTK mel and back.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular filterbank, shape (n_mels, fft_size / 2 + 1).
/// The outermost filters are flat-shouldered so every bin has weight.
torch::Tensor mel_filterbank(const MelConfig& cfg);

/// Number of frames produced for a signal of `length` samples:
/// 1 + floor(length / hop) with fft_size / 2 reflect padding at both ends.
std::int64_t frame_count(std::int64_t length, const MelConfig& cfg);

/// Centered STFT magnitude squared, shape (fft_size / 2 + 1, frames).
torch::Tensor power_spectrogram(const Waveform& wave, const MelConfig& cfg);

/// log(max(mel_power, log_floor)). Throws DataError if the waveform is
/// shorter than fft_size or the sample rate does not match.
MelSpectrogram mel_spectrogram(const Waveform& wave, const MelConfig& cfg);

enum class CropMode { kDeterministic, kRandom };

/// Crops or pads to `target` frames. Random mode draws a uniform onset.
MelSpectrogram fit_width(const MelSpectrogram& mel, std::int64_t target,
                         double pad_value, CropMode mode = CropMode::kDeterministic,
                         Rng* rng = nullptr);

/// Absolute column sums. Works on any tensor whose last two dims are
/// (rows, frames); rows are reduced. Differentiable.
torch::Tensor column_norm(const torch::Tensor& mel);
std::vector<float> column_norm(const MelSpectrogram& mel);

enum class AugmentMode { kTimeWarp, kFreqMask };

struct AugmentParams {
  int max_freq_mask = 15;   // widest masked band, rows
  int max_time_warp = 20;   // largest anchor displacement, frames
  double mask_value = 0.0;
};

/// Replaces rows [start, start + width) with `value`.
MelSpectrogram frequency_mask(const MelSpectrogram& mel, std::int64_t start,
                              std::int64_t width, double value);

/// Moves frame `anchor` to `anchor + distance`, piecewise-linearly remapping
/// the frames on each side; linear interpolation between source frames.
MelSpectrogram time_warp(const MelSpectrogram& mel, std::int64_t anchor,
                         std::int64_t distance);

/// Random augmentation with the given mode. Throws ParameterError if
/// max_freq_mask >= rows or max_time_warp >= width / 2.
MelSpectrogram augment(const MelSpectrogram& mel, AugmentMode mode,
                       const AugmentParams& params, Rng& rng);

struct F0Track {
  std::vector<float> f0_hz;  // 0 where unvoiced
  std::vector<bool> voiced;

  std::size_t voiced_count() const;
  double voiced_fraction() const;
  /// Mean over voiced frames, 0 when none are voiced.
  double mean_voiced_f0() const;
};

struct F0Params {
  double min_hz = 50.0;
  double max_hz = 600.0;
  double voicing_threshold = 0.5;  // minimum normalized autocorrelation peak
  double silence_rms = 1e-4;
};

/// Normalized-autocorrelation pitch tracker with parabolic peak refinement.
/// Frames are centered at multiples of hop_size, window fft_size.
F0Track estimate_f0(const Waveform& wave, const MelConfig& cfg,
                    const F0Params& params = {});

struct GriffinLimResult {
  Waveform wave;
  std::vector<double> spectral_convergence;  // one entry per iteration
};

/// Inverts a log-mel spectrogram: non-negative least-squares power spectrum
/// through the filterbank, then Griffin-Lim phase recovery from a seeded
/// random phase.
GriffinLimResult griffin_lim_invert(const MelSpectrogram& mel,
                                    const MelConfig& cfg, int iterations,
                                    std::uint64_t seed = 0,
                                    double momentum = 0.0);

/// Interface for neural vocoders plugged in instead of Griffin-Lim.
class Vocoder {
 public:
  virtual ~Vocoder() = default;
  virtual Waveform synthesize(const MelSpectrogram& mel,
                              const MelConfig& cfg) = 0;
};

class GriffinLimVocoder : public Vocoder {
 public:
  explicit GriffinLimVocoder(int iterations = 60, std::uint64_t seed = 0)
      : iterations_(iterations), seed_(seed) {}
  Waveform synthesize(const MelSpectrogram& mel, const MelConfig& cfg) override;

 private:
  int iterations_;
  std::uint64_t seed_;
};

}  // namespace sgvc
