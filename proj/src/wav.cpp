#include "sgvc/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

#include "sgvc/error.hpp"

namespace sgvc {
namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {char(v & 0xff), char((v >> 8) & 0xff),
                     char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
  os.write(b, 4);
}

void put_u16(std::ostream& os, std::uint16_t v) {
  const char b[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
  os.write(b, 2);
}

void write_header(std::ostream& os, int channels, int rate, int bits,
                  std::uint16_t format, std::uint32_t data_bytes) {
  os.write("RIFF", 4);
  put_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put_u32(os, 16);
  put_u16(os, format);
  put_u16(os, static_cast<std::uint16_t>(channels));
  put_u32(os, static_cast<std::uint32_t>(rate));
  put_u32(os, static_cast<std::uint32_t>(rate * channels * bits / 8));
  put_u16(os, static_cast<std::uint16_t>(channels * bits / 8));
  put_u16(os, static_cast<std::uint16_t>(bits));
  os.write("data", 4);
  put_u32(os, data_bytes);
}

double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= q / (double(k) * k);
    sum += term;
    if (term < 1e-12 * sum) break;
  }
  return sum;
}

}  // namespace

WavData read_wav_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw IoError("not a RIFF/WAVE file: " + path.string());
  }

  int format = -1, channels = 0, rate = 0, bits = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw IoError("truncated fmt chunk: " + path.string());
      format = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      rate = static_cast<int>(read_u32(chunk + 12));
      bits = read_u16(chunk + 22);
      if (format == 0xFFFE && avail >= 26) format = read_u16(chunk + 32);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = avail;
    }
    pos = body + size + (size & 1);
  }
  if (format < 0 || data == nullptr) {
    throw IoError("missing fmt or data chunk: " + path.string());
  }
  if (channels <= 0 || rate <= 0) {
    throw IoError("invalid channel count or rate: " + path.string());
  }

  const bool is_float = format == 3;
  if (!(format == 1 || is_float) ||
      (is_float && bits != 32 && bits != 64) ||
      (!is_float && bits != 8 && bits != 16 && bits != 24 && bits != 32)) {
    throw IoError("unsupported WAV encoding in " + path.string());
  }

  const std::size_t width = static_cast<std::size_t>(bits / 8);
  const std::size_t count = data_size / width;
  WavData out;
  out.sample_rate = rate;
  out.channels = channels;
  out.interleaved.resize(count - count % static_cast<std::size_t>(channels));
  for (std::size_t i = 0; i < out.interleaved.size(); ++i) {
    const unsigned char* p = data + i * width;
    float v = 0.0f;
    if (is_float && bits == 32) {
      std::uint32_t u = read_u32(p);
      std::memcpy(&v, &u, 4);
    } else if (is_float) {
      std::uint64_t u = std::uint64_t(read_u32(p)) |
                        (std::uint64_t(read_u32(p + 4)) << 32);
      double d;
      std::memcpy(&d, &u, 8);
      v = static_cast<float>(d);
    } else if (bits == 8) {
      v = (static_cast<int>(p[0]) - 128) / 128.0f;
    } else if (bits == 16) {
      v = static_cast<std::int16_t>(read_u16(p)) / 32768.0f;
    } else if (bits == 24) {
      std::int32_t s = p[0] | (p[1] << 8) | (p[2] << 16);
      if (s & 0x800000) s |= ~0xFFFFFF;
      v = static_cast<float>(s / 8388608.0);
    } else {
      v = static_cast<float>(static_cast<std::int32_t>(read_u32(p)) /
                             2147483648.0);
    }
    out.interleaved[i] = v;
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  const auto n = static_cast<std::uint32_t>(wave.samples.size());
  write_header(os, 1, wave.sample_rate, 16, 1, n * 2);
  for (float s : wave.samples) {
    const float c = std::clamp(s, -1.0f, 1.0f);
    put_u16(os, static_cast<std::uint16_t>(
                    static_cast<std::int16_t>(std::lround(c * 32767.0f))));
  }
  if (!os) throw IoError("write failed: " + path.string());
}

void write_wav_float(const std::filesystem::path& path, const WavData& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  const auto n = static_cast<std::uint32_t>(data.interleaved.size());
  write_header(os, data.channels, data.sample_rate, 32, 3, n * 4);
  for (float s : data.interleaved) {
    std::uint32_t u;
    std::memcpy(&u, &s, 4);
    put_u32(os, u);
  }
  if (!os) throw IoError("write failed: " + path.string());
}

Waveform to_mono(const WavData& data) {
  Waveform w;
  w.sample_rate = data.sample_rate;
  const auto ch = static_cast<std::size_t>(data.channels);
  const std::size_t frames = data.interleaved.size() / ch;
  w.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < ch; ++c) acc += data.interleaved[i * ch + c];
    w.samples[i] = static_cast<float>(acc / static_cast<double>(ch));
  }
  return w;
}

Waveform resample(const Waveform& wave, int target_rate) {
  if (target_rate <= 0) throw ParameterError("target rate must be positive");
  if (wave.sample_rate == target_rate) return wave;

  constexpr int kZeroCrossings = 16;
  constexpr double kBeta = 8.6;
  const double ratio = static_cast<double>(target_rate) / wave.sample_rate;
  // Cutoff relative to the input Nyquist, slightly below the lower rate.
  const double cutoff = std::min(1.0, ratio) * 0.95;
  const double half_width = kZeroCrossings / cutoff;
  const double i0_beta = bessel_i0(kBeta);

  const auto n_in = static_cast<std::int64_t>(wave.samples.size());
  const std::int64_t n_out =
      (n_in * target_rate + wave.sample_rate - 1) / wave.sample_rate;
  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(n_out));
  for (std::int64_t n = 0; n < n_out; ++n) {
    const double t = static_cast<double>(n) / ratio;
    const auto lo = std::max<std::int64_t>(0, std::int64_t(std::ceil(t - half_width)));
    const auto hi = std::min<std::int64_t>(n_in - 1, std::int64_t(std::floor(t + half_width)));
    double acc = 0.0;
    for (std::int64_t k = lo; k <= hi; ++k) {
      const double x = static_cast<double>(k) - t;
      const double r = x / half_width;
      const double window = bessel_i0(kBeta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
      const double arg = std::numbers::pi * cutoff * x;
      const double sinc = std::abs(arg) < 1e-12 ? 1.0 : std::sin(arg) / arg;
      acc += wave.samples[static_cast<std::size_t>(k)] * cutoff * sinc * window;
    }
    out.samples[static_cast<std::size_t>(n)] = static_cast<float>(acc);
  }
  return out;
}

Waveform load_and_resample(const std::filesystem::path& path, int target_rate) {
  const WavData data = read_wav_file(path);
  if (data.interleaved.empty()) {
    throw EmptyInputError("zero-length audio: " + path.string());
  }
  return resample(to_mono(data), target_rate);
}

}  // namespace sgvc
