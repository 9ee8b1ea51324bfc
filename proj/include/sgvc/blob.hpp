#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sgvc/dsp.hpp"

namespace sgvc {

/// Mel cache blob: "SGVC", u32 version (1), u32 rows, u32 cols, then
/// row-major float32, all little-endian.
void write_mel_blob(const std::filesystem::path& path, const MelSpectrogram& mel);
MelSpectrogram read_mel_blob(const std::filesystem::path& path);

using NamedTensors = std::vector<std::pair<std::string, torch::Tensor>>;

/// Tensor archive in the same shape-prefixed float32 layout:
///   "SGVC", u32 version (2), u32 count, u64 payload bytes, u64 FNV-1a of payload
///   per entry: u32 name length, name, u32 ndim, u32 dims[ndim], float32 data
/// Non-float tensors are stored as float32 and cast back by the reader's
/// caller. Writes go to a temporary file that is renamed into place.
void write_tensor_archive(const std::filesystem::path& path,
                          const NamedTensors& tensors);

/// Throws IntegrityError on a length or checksum mismatch, SchemaError on an
/// unknown magic/version.
NamedTensors read_tensor_archive(const std::filesystem::path& path);

}  // namespace sgvc
