#include "sgvc/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sgvc/error.hpp"

namespace sgvc {

double MelConfig::silence_value() const { return std::log(log_floor); }

double MelConfig::pad_value() const {
  return literal_zero_pad ? 0.0 : silence_value();
}

void MelConfig::validate(int num_subbands) const {
  if (fft_size <= 0 || hop_size <= 0 || n_mels <= 0 || target_width <= 0 ||
      sample_rate <= 0) {
    throw ConfigError("mel config values must be positive");
  }
  if (fft_size < hop_size) throw ConfigError("fft_size must be >= hop_size");
  if (!(log_floor > 0.0)) throw ConfigError("log_floor must be positive");
  if (num_subbands <= 0 || n_mels < num_subbands || n_mels % num_subbands != 0) {
    throw ConfigError("n_mels must be a positive multiple of num_subbands");
  }
}

MelSpectrogram::MelSpectrogram(torch::Tensor values) {
  if (values.dim() != 2) {
    throw ShapeError("mel spectrogram must be 2-D, got " +
                     std::to_string(values.dim()) + " dims");
  }
  values_ = values.to(torch::kFloat32).contiguous();
}

float MelSpectrogram::at(std::int64_t row, std::int64_t frame) const {
  return values_.accessor<float, 2>()[row][frame];
}

torch::Tensor MelSpectrogram::as_batch() const {
  return values_.unsqueeze(0).unsqueeze(0);
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

torch::Tensor mel_filterbank(const MelConfig& cfg) {
  const int bins = cfg.fft_size / 2 + 1;
  const double nyquist = cfg.sample_rate / 2.0;
  const double mel_hi = hz_to_mel(nyquist);
  std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_hi * static_cast<double>(i) /
                         static_cast<double>(cfg.n_mels + 1));
  }
  auto fb = torch::zeros({cfg.n_mels, bins}, torch::kFloat64);
  auto acc = fb.accessor<double, 2>();
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.fft_size;
      double rise = (f - lo) / (center - lo);
      double fall = (hi - f) / (hi - center);
      if (m == 0 && f <= center) rise = 1.0;
      if (m == cfg.n_mels - 1 && f >= center) fall = 1.0;
      acc[m][k] = std::max(0.0, std::min(rise, fall));
    }
  }
  return fb;
}

std::int64_t frame_count(std::int64_t length, const MelConfig& cfg) {
  return 1 + length / cfg.hop_size;
}

namespace {

torch::Tensor hann(const MelConfig& cfg) {
  return torch::hann_window(cfg.fft_size,
                            torch::TensorOptions().dtype(torch::kFloat64));
}

torch::Tensor stft_complex(const torch::Tensor& signal, const MelConfig& cfg) {
  return torch::stft(signal, cfg.fft_size, cfg.hop_size, cfg.fft_size,
                     hann(cfg), /*center=*/true, "reflect",
                     /*normalized=*/false, /*onesided=*/true,
                     /*return_complex=*/true);
}

torch::Tensor istft_real(const torch::Tensor& spec, const MelConfig& cfg,
                         std::int64_t length) {
  return torch::istft(spec, cfg.fft_size, cfg.hop_size, cfg.fft_size,
                      hann(cfg), /*center=*/true, /*normalized=*/false,
                      /*onesided=*/true, length, /*return_complex=*/false);
}

torch::Tensor to_tensor(const Waveform& wave) {
  return torch::from_blob(const_cast<float*>(wave.samples.data()),
                          {static_cast<std::int64_t>(wave.samples.size())},
                          torch::kFloat32)
      .to(torch::kFloat64);
}

}  // namespace

torch::Tensor power_spectrogram(const Waveform& wave, const MelConfig& cfg) {
  if (wave.sample_rate != cfg.sample_rate) {
    throw DataError("sample rate " + std::to_string(wave.sample_rate) +
                    " does not match config rate " +
                    std::to_string(cfg.sample_rate));
  }
  if (static_cast<std::int64_t>(wave.size()) < cfg.fft_size) {
    throw DataError("waveform of " + std::to_string(wave.size()) +
                    " samples is shorter than fft_size " +
                    std::to_string(cfg.fft_size));
  }
  torch::NoGradGuard no_grad;
  return stft_complex(to_tensor(wave), cfg).abs().square();
}

MelSpectrogram mel_spectrogram(const Waveform& wave, const MelConfig& cfg) {
  torch::NoGradGuard no_grad;
  const auto power = power_spectrogram(wave, cfg);
  const auto mel_power = torch::matmul(mel_filterbank(cfg), power);
  return MelSpectrogram(torch::log(torch::clamp_min(mel_power, cfg.log_floor)));
}

MelSpectrogram fit_width(const MelSpectrogram& mel, std::int64_t target,
                         double pad_value, CropMode mode, Rng* rng) {
  if (target <= 0) throw ParameterError("target width must be positive");
  const std::int64_t width = mel.width();
  if (width == target) return mel;
  if (width > target) {
    std::int64_t onset = 0;
    if (mode == CropMode::kRandom) {
      if (rng == nullptr) throw ParameterError("random crop requires an rng");
      onset = rng->uniform_int(0, width - target);
    }
    return MelSpectrogram(mel.values().narrow(1, onset, target).clone());
  }
  auto out = torch::full({mel.rows(), target}, pad_value, torch::kFloat32);
  out.narrow(1, 0, width).copy_(mel.values());
  return MelSpectrogram(out);
}

torch::Tensor column_norm(const torch::Tensor& mel) {
  return mel.abs().sum(-2);
}

std::vector<float> column_norm(const MelSpectrogram& mel) {
  const auto norms = column_norm(mel.values()).contiguous();
  return {norms.data_ptr<float>(), norms.data_ptr<float>() + norms.numel()};
}

MelSpectrogram frequency_mask(const MelSpectrogram& mel, std::int64_t start,
                              std::int64_t width, double value) {
  if (start < 0 || width < 0 || start + width > mel.rows()) {
    throw ParameterError("frequency mask band out of range");
  }
  auto out = mel.values().clone();
  out.narrow(0, start, width).fill_(value);
  return MelSpectrogram(out);
}

MelSpectrogram time_warp(const MelSpectrogram& mel, std::int64_t anchor,
                         std::int64_t distance) {
  const std::int64_t width = mel.width();
  if (distance == 0 || width < 3) return mel;
  const std::int64_t last = width - 1;
  const std::int64_t moved = anchor + distance;
  if (anchor <= 0 || anchor >= last || moved <= 0 || moved >= last) {
    throw ParameterError("time warp anchor or destination out of range");
  }
  const auto src = mel.values().accessor<float, 2>();
  auto out = torch::empty_like(mel.values());
  auto dst = out.accessor<float, 2>();
  for (std::int64_t t = 0; t < width; ++t) {
    // Piecewise-linear map sending moved -> anchor, endpoints fixed.
    double pos;
    if (t <= moved) {
      pos = static_cast<double>(t) * anchor / moved;
    } else {
      pos = anchor + static_cast<double>(t - moved) * (last - anchor) /
                         static_cast<double>(last - moved);
    }
    const auto i0 = std::min<std::int64_t>(static_cast<std::int64_t>(pos), last);
    const auto i1 = std::min<std::int64_t>(i0 + 1, last);
    const double frac = pos - static_cast<double>(i0);
    for (std::int64_t r = 0; r < mel.rows(); ++r) {
      dst[r][t] = frac == 0.0
                      ? src[r][i0]
                      : static_cast<float>((1.0 - frac) * src[r][i0] +
                                           frac * src[r][i1]);
    }
  }
  return MelSpectrogram(out);
}

MelSpectrogram augment(const MelSpectrogram& mel, AugmentMode mode,
                       const AugmentParams& params, Rng& rng) {
  if (params.max_freq_mask < 0 || params.max_freq_mask >= mel.rows()) {
    throw ParameterError("frequency mask width must be in [0, rows)");
  }
  if (params.max_time_warp < 0 ||
      2 * static_cast<std::int64_t>(params.max_time_warp) >= mel.width()) {
    throw ParameterError("time warp distance must be in [0, width / 2)");
  }
  if (mode == AugmentMode::kFreqMask) {
    const auto width = rng.uniform_int(0, params.max_freq_mask);
    const auto start = rng.uniform_int(0, mel.rows() - width);
    return frequency_mask(mel, start, width, params.mask_value);
  }
  const std::int64_t last = mel.width() - 1;
  if (last < 2 || params.max_time_warp == 0) return mel;
  const auto anchor = rng.uniform_int(1, last - 1);
  const auto lo = std::max<std::int64_t>(-params.max_time_warp, 1 - anchor);
  const auto hi = std::min<std::int64_t>(params.max_time_warp, last - 1 - anchor);
  return time_warp(mel, anchor, rng.uniform_int(lo, hi));
}

std::size_t F0Track::voiced_count() const {
  return static_cast<std::size_t>(std::count(voiced.begin(), voiced.end(), true));
}

double F0Track::voiced_fraction() const {
  return voiced.empty() ? 0.0
                        : static_cast<double>(voiced_count()) / voiced.size();
}

double F0Track::mean_voiced_f0() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < f0_hz.size(); ++i) {
    if (voiced[i]) {
      sum += f0_hz[i];
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

F0Track estimate_f0(const Waveform& wave, const MelConfig& cfg,
                    const F0Params& params) {
  F0Track track;
  if (wave.empty()) return track;
  const double rate = wave.sample_rate;
  const int window = cfg.fft_size;
  const int half = window / 2;
  const int min_lag = std::max(2, static_cast<int>(std::floor(rate / params.max_hz)));
  const int max_lag = std::min(window - 2, static_cast<int>(std::ceil(rate / params.min_hz)));
  const auto length = static_cast<std::int64_t>(wave.size());
  const std::int64_t frames = frame_count(length, cfg);

  std::vector<double> x(static_cast<std::size_t>(window));
  std::vector<double> energy(static_cast<std::size_t>(window) + 1);
  std::vector<double> nccf(static_cast<std::size_t>(max_lag) + 2, 0.0);
  track.f0_hz.assign(static_cast<std::size_t>(frames), 0.0f);
  track.voiced.assign(static_cast<std::size_t>(frames), false);

  for (std::int64_t f = 0; f < frames; ++f) {
    const std::int64_t begin = f * cfg.hop_size - half;
    double sumsq = 0.0;
    for (int n = 0; n < window; ++n) {
      const std::int64_t i = begin + n;
      x[n] = (i >= 0 && i < length) ? wave.samples[static_cast<std::size_t>(i)] : 0.0;
      sumsq += x[n] * x[n];
      energy[n + 1] = energy[n] + x[n] * x[n];
    }
    if (std::sqrt(sumsq / window) < params.silence_rms) continue;

    double best = 0.0;
    for (int lag = min_lag - 1; lag <= max_lag + 1; ++lag) {
      const int span = window - lag;
      double cross = 0.0;
      for (int n = 0; n < span; ++n) cross += x[n] * x[n + lag];
      const double e0 = energy[span];
      const double e1 = energy[window] - energy[lag];
      const double denom = std::sqrt(e0 * e1);
      const double r = denom > 0.0 ? cross / denom : 0.0;
      nccf[static_cast<std::size_t>(lag)] = r;
      if (lag >= min_lag && lag <= max_lag) best = std::max(best, r);
    }
    if (best < params.voicing_threshold) continue;

    // Smallest-lag peak near the global maximum avoids octave-down errors.
    for (int lag = min_lag; lag <= max_lag; ++lag) {
      const double r = nccf[lag];
      if (r < 0.9 * best || r < nccf[lag - 1] || r < nccf[lag + 1]) continue;
      const double a = nccf[lag - 1], c = nccf[lag + 1];
      const double curvature = a - 2.0 * r + c;
      const double delta = curvature < 0.0 ? 0.5 * (a - c) / curvature : 0.0;
      const double hz = rate / (lag + delta);
      if (hz >= params.min_hz && hz <= params.max_hz) {
        track.f0_hz[static_cast<std::size_t>(f)] = static_cast<float>(hz);
        track.voiced[static_cast<std::size_t>(f)] = true;
      }
      break;
    }
  }
  return track;
}

constexpr int kPowerRefineIterations = 200;

GriffinLimResult griffin_lim_invert(const MelSpectrogram& mel,
                                    const MelConfig& cfg, int iterations,
                                    std::uint64_t seed, double momentum) {
  if (iterations < 1) throw ParameterError("iterations must be >= 1");
  if (mel.rows() != cfg.n_mels) {
    throw ShapeError("mel has " + std::to_string(mel.rows()) +
                     " rows, config expects " + std::to_string(cfg.n_mels));
  }
  torch::NoGradGuard no_grad;
  const auto fb = mel_filterbank(cfg);
  const auto mel_power = torch::relu(
      torch::exp(mel.values().to(torch::kFloat64)) - cfg.log_floor * (1.0 + 1e-4));
  // Least-squares power spectrum under a non-negativity constraint:
  // pseudo-inverse start, then multiplicative updates, which keep zeros at
  // zero and sharpen the minimum-norm solution towards the true spectrum.
  auto power = torch::relu(torch::matmul(torch::linalg_pinv(fb), mel_power)) + 1e-10;
  power = torch::where(mel_power.sum(0, /*keepdim=*/true) > 0, power, torch::zeros_like(power));
  const auto numer = torch::matmul(fb.t(), mel_power);
  const auto gram = torch::matmul(fb.t(), fb);
  for (int i = 0; i < kPowerRefineIterations; ++i)
    power = power * numer / (torch::matmul(gram, power) + 1e-12);
  const auto magnitude = torch::sqrt(power);
  const std::int64_t length = (mel.width() - 1) * cfg.hop_size;

  Rng rng(seed);
  auto phase = torch::empty_like(magnitude);
  {
    auto p = phase.accessor<double, 2>();
    for (std::int64_t i = 0; i < phase.size(0); ++i)
      for (std::int64_t j = 0; j < phase.size(1); ++j)
        p[i][j] = 2.0 * std::numbers::pi * rng.uniform();
  }
  auto angles = torch::polar(torch::ones_like(magnitude), phase);
  auto previous = torch::zeros_like(angles);
  const double mag_norm = magnitude.norm().item<double>();

  GriffinLimResult result;
  result.wave.sample_rate = cfg.sample_rate;
  for (int it = 0; it < iterations; ++it) {
    const auto signal = istft_real(magnitude * angles, cfg, length);
    const auto rebuilt = stft_complex(signal, cfg);
    const double err = (magnitude - rebuilt.abs()).norm().item<double>();
    result.spectral_convergence.push_back(mag_norm > 0.0 ? err / mag_norm : 0.0);
    auto next = rebuilt - (momentum / (1.0 + momentum)) * previous;
    previous = rebuilt;
    angles = next / (next.abs() + 1e-16);
    angles = torch::where(next.abs() > 0, angles, torch::ones_like(angles));
  }
  const auto signal =
      istft_real(magnitude * angles, cfg, length).to(torch::kFloat32).contiguous();
  result.wave.samples.assign(signal.data_ptr<float>(),
                             signal.data_ptr<float>() + signal.numel());
  return result;
}

Waveform GriffinLimVocoder::synthesize(const MelSpectrogram& mel,
                                       const MelConfig& cfg) {
  return griffin_lim_invert(mel, cfg, iterations_, seed_).wave;
}

}  // namespace sgvc
