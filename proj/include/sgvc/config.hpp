#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgvc/dataset.hpp"
#include "sgvc/dsp.hpp"
#include "sgvc/model.hpp"
#include "sgvc/trainer.hpp"

namespace sgvc {

/// Everything a run needs, mirrored by the JSON config file:
///   {"mel": {...}, "model": {...}, "train": {...}, "augment": {...}}
struct RunConfig {
  MelConfig mel;
  ModelConfig model;
  TrainConfig train;
  AugmentConfig augment;

  /// Throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const MelConfig& c);
nlohmann::json to_json(const ModelConfig& c);
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const AugmentConfig& c);
nlohmann::json to_json(const RunConfig& c);

/// The readers start from the defaults and reject unknown keys.
MelConfig mel_config_from_json(const nlohmann::json& j);
ModelConfig model_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);
AugmentConfig augment_config_from_json(const nlohmann::json& j);
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);

/// Applies "key=value". The key is "section.field" or a bare field name that
/// is unique across sections ("epochs=1"). Values are parsed as JSON, falling
/// back to a plain string. Throws ConfigError for unknown keys.
void apply_override(RunConfig& cfg, const std::string& assignment);

/// Names of the fields in which two model configs differ.
std::vector<std::string> model_config_diff(const ModelConfig& a, const ModelConfig& b);

}  // namespace sgvc
