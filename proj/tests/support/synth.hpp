#pragma once

// Synthetic audio and corpora for tests.

#include <torch/torch.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "sgvc/manifest.hpp"
#include "sgvc/rng.hpp"
#include "sgvc/wav.hpp"

namespace sgvc::testing {

inline constexpr double kPi = 3.14159265358979323846;

inline Waveform sine(double hz, double seconds, int rate = 22050, double amp = 0.5,
                     double phase = 0.0) {
  Waveform w;
  w.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::lround(seconds * rate));
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    w.samples[i] = static_cast<float>(amp * std::sin(2 * kPi * hz * i / rate + phase));
  return w;
}

/// Harmonic tone with a slow vibrato; `harmonics[k]` is the amplitude of
/// partial k+1. Peak amplitude is normalized to `peak`.
inline Waveform harmonic_tone(double f0, const std::vector<double>& harmonics, double seconds,
                              int rate = 22050, double vibrato_hz = 5.0,
                              double vibrato_depth = 0.01, double peak = 0.5) {
  Waveform w;
  w.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::lround(seconds * rate));
  w.samples.assign(n, 0.0f);
  double phase = 0.0;
  double max_abs = 1e-12;
  std::vector<double> acc(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double f = f0 * (1.0 + vibrato_depth * std::sin(2 * kPi * vibrato_hz * t));
    phase += 2 * kPi * f / rate;
    double v = 0.0;
    for (std::size_t k = 0; k < harmonics.size(); ++k) {
      if (f * (k + 1) >= rate / 2.0) break;
      v += harmonics[k] * std::sin(phase * (k + 1));
    }
    acc[i] = v;
    max_abs = std::max(max_abs, std::abs(v));
  }
  for (std::size_t i = 0; i < n; ++i) w.samples[i] = static_cast<float>(peak * acc[i] / max_abs);
  return w;
}

inline Waveform white_noise(double seconds, std::uint64_t seed, int rate = 22050,
                            double amp = 0.3) {
  Rng rng(seed);
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(static_cast<std::size_t>(std::lround(seconds * rate)));
  for (auto& s : w.samples) s = static_cast<float>(amp * (2.0 * rng.uniform() - 1.0));
  return w;
}

/// Harmonic amplitude profile of a synthetic "speaker": a spectral tilt
/// plus one formant-like bump.
inline std::vector<double> timbre(int speaker) {
  static const double tilts[] = {0.9, 0.45, 0.7, 0.3, 0.8, 0.55};
  static const int formants[] = {2, 6, 10, 4, 8, 12};
  std::vector<double> h(24);
  for (int k = 0; k < 24; ++k) {
    const double tilt = std::pow(tilts[speaker % 6], k);
    const double bump = std::exp(-0.5 * std::pow((k - formants[speaker % 6]) / 1.5, 2.0));
    h[k] = tilt + 0.8 * bump;
  }
  return h;
}

struct CorpusSpec {
  int speakers = 2;
  int clips_per_speaker = 10;
  double seconds = 2.7;
  std::vector<double> base_f0 = {120.0, 210.0, 160.0, 260.0, 140.0, 190.0};
  double f0_jitter = 0.08;          // relative spread of f0 across clips
  int heldout_per_speaker = 0;      // extra clips tagged split=test
  std::uint64_t seed = 7;
};

/// Writes one wav per clip plus manifest.csv under `dir` and returns the
/// manifest path.
inline std::filesystem::path write_corpus(const std::filesystem::path& dir, const CorpusSpec& spec) {
  std::filesystem::create_directories(dir);
  Rng rng(spec.seed);
  std::vector<ManifestEntry> entries;
  for (int s = 0; s < spec.speakers; ++s) {
    const auto h = timbre(s);
    for (int c = 0; c < spec.clips_per_speaker + spec.heldout_per_speaker; ++c) {
      const double f0 = spec.base_f0[s % spec.base_f0.size()] *
                        (1.0 + spec.f0_jitter * (2.0 * rng.uniform() - 1.0));
      const auto wave = harmonic_tone(f0, h, spec.seconds, 22050, 4.0 + rng.uniform() * 2.0);
      const std::string spk = "spk" + std::to_string(s);
      const std::string id = spk + "_" + std::to_string(c);
      const auto path = dir / (id + ".wav");
      write_wav(path, wave);
      entries.push_back({id, spk, path, c < spec.clips_per_speaker ? "train" : "test"});
    }
  }
  const auto manifest = dir / "manifest.csv";
  write_manifest(manifest, DatasetManifest(entries));
  return manifest;
}

/// Central finite-difference gradient of a scalar function of `x`
/// (double precision).
template <class F>
torch::Tensor numeric_gradient(F&& f, torch::Tensor x, double h = 1e-6) {
  torch::NoGradGuard no_grad;
  auto flat = x.view(-1);
  auto grad = torch::zeros_like(flat);
  for (int64_t i = 0; i < flat.numel(); ++i) {
    const double orig = flat[i].item<double>();
    flat[i] = orig + h;
    const double up = f(x).template item<double>();
    flat[i] = orig - h;
    const double down = f(x).template item<double>();
    flat[i] = orig;
    grad[i] = (up - down) / (2 * h);
  }
  return grad.view(x.sizes());
}

/// max |a - n| / max |n|.
inline double gradient_error(const torch::Tensor& analytic, const torch::Tensor& numeric) {
  const double scale = std::max(1e-12, numeric.abs().max().item<double>());
  return (analytic - numeric).abs().max().item<double>() / scale;
}

}  // namespace sgvc::testing
