#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgvc/dsp.hpp"
#include "sgvc/model.hpp"

namespace sgvc {

inline constexpr int kCheckpointSchemaVersion = 1;

struct CheckpointMeta {
  int schema_version = kCheckpointSchemaVersion;
  std::string stage;  // "pretrain-style" or "train"
  std::int64_t step = 0;
  ModelConfig model;
  MelConfig mel;
  std::vector<std::string> speakers;
  nlohmann::json extra = nlohmann::json::object();
};

using NamedOptimizer = std::pair<std::string, torch::optim::AdamW*>;

/// Writes <dir>/meta.json, one tensor archive per sub-network
/// (<name>.bin: parameters and buffers) and one per optimizer
/// (optim_<name>.bin). The directory is assembled under a temporary name
/// and renamed into place.
void save_checkpoint(const std::filesystem::path& dir, VoiceConversionModel& model,
                     const CheckpointMeta& meta,
                     const std::vector<NamedOptimizer>& optimizers = {});

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& dir);

struct LoadedCheckpoint {
  CheckpointMeta meta;
  std::shared_ptr<VoiceConversionModel> model;
};

/// Rebuilds the model from meta.json and restores every tensor bit-exactly.
/// With `expected`, any differing model field raises SchemaError naming it.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir,
                                 const ModelConfig* expected = nullptr);

/// Restores AdamW moments and step counts saved under `name`.
void load_optimizer_state(const std::filesystem::path& dir, const std::string& name,
                          torch::optim::AdamW& optimizer);

/// Parameters and buffers of a module in a stable order.
std::vector<std::pair<std::string, torch::Tensor>> module_tensors(torch::nn::Module& module);

}  // namespace sgvc
