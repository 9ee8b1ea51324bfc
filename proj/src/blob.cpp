#include "sgvc/blob.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sgvc/error.hpp"

namespace sgvc {
namespace {

constexpr char kMagic[4] = {'S', 'G', 'V', 'C'};
constexpr std::uint32_t kMelVersion = 1;
constexpr std::uint32_t kArchiveVersion = 2;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(char((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(char((v >> (8 * i)) & 0xff));
  }
  void floats(const torch::Tensor& t) {
    const auto c = t.detach().to(torch::kCPU).to(torch::kFloat32).contiguous();
    const float* p = c.data_ptr<float>();
    for (std::int64_t i = 0; i < c.numel(); ++i) {
      std::uint32_t u;
      std::memcpy(&u, p + i, 4);
      u32(u);
    }
  }
  std::vector<char>& data() { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(const std::vector<char>& buf, std::size_t pos, std::string what)
      : buf_(buf), pos_(pos), what_(std::move(what)) {}

  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw IntegrityError("truncated " + what_);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= std::uint32_t(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    return lo | (std::uint64_t(u32()) << 32);
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  torch::Tensor floats(const std::vector<std::int64_t>& shape) {
    std::int64_t count = 1;
    for (auto d : shape) count *= d;
    need(static_cast<std::size_t>(count) * 4);
    auto t = torch::empty(shape, torch::kFloat32);
    float* p = t.data_ptr<float>();
    for (std::int64_t i = 0; i < count; ++i) {
      const std::uint32_t u = u32();
      std::memcpy(p + i, &u, 4);
    }
    return t;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<char>& buf_;
  std::size_t pos_;
  std::string what_;
};

std::vector<char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void atomic_write(const std::filesystem::path& path, const std::vector<char>& data) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + tmp.string());
    os.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!os) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename into " + path.string() + ": " + ec.message());
}

std::uint64_t fnv1a(const char* p, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(p[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

void check_magic(const std::vector<char>& buf, const std::filesystem::path& path) {
  if (buf.size() < 8) throw IntegrityError("truncated header in " + path.string());
  if (std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw SchemaError("bad magic in " + path.string());
  }
}

}  // namespace

void write_mel_blob(const std::filesystem::path& path, const MelSpectrogram& mel) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kMelVersion);
  w.u32(static_cast<std::uint32_t>(mel.rows()));
  w.u32(static_cast<std::uint32_t>(mel.width()));
  w.floats(mel.values());
  atomic_write(path, w.data());
}

MelSpectrogram read_mel_blob(const std::filesystem::path& path) {
  const auto buf = slurp(path);
  check_magic(buf, path);
  Reader r(buf, 4, path.string());
  const auto version = r.u32();
  if (version != kMelVersion) {
    throw SchemaError("unsupported mel blob version " + std::to_string(version) +
                      " in " + path.string());
  }
  const auto rows = static_cast<std::int64_t>(r.u32());
  const auto cols = static_cast<std::int64_t>(r.u32());
  const auto expected = 16 + static_cast<std::size_t>(rows * cols) * 4;
  if (buf.size() != expected) {
    throw IntegrityError("mel blob " + path.string() + " has " +
                         std::to_string(buf.size()) + " bytes, expected " +
                         std::to_string(expected));
  }
  return MelSpectrogram(r.floats({rows, cols}));
}

void write_tensor_archive(const std::filesystem::path& path,
                          const NamedTensors& tensors) {
  Writer payload;
  for (const auto& [name, tensor] : tensors) {
    payload.u32(static_cast<std::uint32_t>(name.size()));
    payload.bytes(name.data(), name.size());
    payload.u32(static_cast<std::uint32_t>(tensor.dim()));
    for (auto d : tensor.sizes()) payload.u32(static_cast<std::uint32_t>(d));
    payload.floats(tensor);
  }
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kArchiveVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  w.u64(payload.data().size());
  w.u64(fnv1a(payload.data().data(), payload.data().size()));
  w.bytes(payload.data().data(), payload.data().size());
  atomic_write(path, w.data());
}

NamedTensors read_tensor_archive(const std::filesystem::path& path) {
  const auto buf = slurp(path);
  check_magic(buf, path);
  Reader r(buf, 4, path.string());
  const auto version = r.u32();
  if (version != kArchiveVersion) {
    throw SchemaError("unsupported tensor archive version " +
                      std::to_string(version) + " in " + path.string());
  }
  const auto count = r.u32();
  const auto payload_bytes = r.u64();
  const auto checksum = r.u64();
  if (buf.size() - r.pos() != payload_bytes) {
    throw IntegrityError("tensor archive " + path.string() + " payload is " +
                         std::to_string(buf.size() - r.pos()) +
                         " bytes, header says " + std::to_string(payload_bytes));
  }
  if (fnv1a(buf.data() + r.pos(), payload_bytes) != checksum) {
    throw IntegrityError("checksum mismatch in " + path.string());
  }
  NamedTensors out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str(r.u32());
    const auto ndim = r.u32();
    std::vector<std::int64_t> shape(ndim);
    for (auto& d : shape) d = r.u32();
    out.emplace_back(std::move(name), r.floats(shape));
  }
  if (r.pos() != buf.size()) {
    throw IntegrityError("trailing bytes in " + path.string());
  }
  return out;
}

}  // namespace sgvc
