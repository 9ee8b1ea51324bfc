#pragma once

#include <filesystem>
#include <vector>

namespace sgvc {

/// Mono audio signal.
struct Waveform {
  std::vector<float> samples;  // nominally in [-1, 1]
  int sample_rate = 22050;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// Decoded WAV file before channel mixing.
struct WavData {
  int sample_rate = 0;
  int channels = 0;
  std::vector<float> interleaved;
};

/// Reads PCM WAV: 8/16/24/32-bit integer or 32-bit float, any channel count.
/// Throws IoError on unreadable or malformed files.
WavData read_wav_file(const std::filesystem::path& path);

/// Writes a mono 16-bit PCM WAV. Samples are clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, const Waveform& wave);

/// Writes interleaved samples as 32-bit float WAV (used by tests and tools
/// that need exact round trips).
void write_wav_float(const std::filesystem::path& path, const WavData& data);

/// Averages channels to mono.
Waveform to_mono(const WavData& data);

/// Band-limited resampling with a Kaiser-windowed sinc kernel.
Waveform resample(const Waveform& wave, int target_rate);

/// Reads a WAV file, mixes to mono and resamples to target_rate.
/// Throws EmptyInputError for zero-length audio.
Waveform load_and_resample(const std::filesystem::path& path, int target_rate);

}  // namespace sgvc
