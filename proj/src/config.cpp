#include "sgvc/config.hpp"

#include <fstream>

#include "sgvc/error.hpp"

using nlohmann::json;

namespace sgvc {

namespace {

/// Reads known keys from an object and complains about anything else.
class FieldReader {
 public:
  FieldReader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw ConfigError(section_ + " must be a JSON object");
  }
  template <typename T>
  FieldReader& get(const char* key, T& out) {
    seen_.push_back(key);
    if (j_.contains(key)) {
      try {
        out = j_.at(key).get<T>();
      } catch (const json::exception& e) {
        throw ConfigError(section_ + "." + key + ": " + e.what());
      }
    }
    return *this;
  }
  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) {
        throw ConfigError("unknown config key '" + section_ + "." + key + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string section_;
  std::vector<std::string> seen_;
};

json weights_json(const LossWeights& w) {
  return {{"adv", w.adv},   {"id", w.id},     {"style", w.style}, {"content", w.content},
          {"ds", w.ds},     {"norm", w.norm}, {"rec", w.rec}};
}

LossWeights weights_from_json(const json& j) {
  LossWeights w;
  FieldReader(j, "train.weights")
      .get("adv", w.adv).get("id", w.id).get("style", w.style).get("content", w.content)
      .get("ds", w.ds).get("norm", w.norm).get("rec", w.rec)
      .finish();
  return w;
}

}  // namespace

void RunConfig::validate() const {
  mel.validate(model.num_subbands);
  model.validate();
  train.validate();
  if (mel.n_mels != model.n_mels) throw ConfigError("mel.n_mels and model.n_mels differ");
  if (mel.target_width != model.frames) {
    throw ConfigError("mel.target_width and model.frames differ");
  }
}

json to_json(const MelConfig& c) {
  return {{"fft_size", c.fft_size},         {"hop_size", c.hop_size},
          {"n_mels", c.n_mels},             {"target_width", c.target_width},
          {"sample_rate", c.sample_rate},   {"log_floor", c.log_floor},
          {"literal_zero_pad", c.literal_zero_pad}};
}

json to_json(const ModelConfig& c) {
  return {{"num_subbands", c.num_subbands},
          {"num_speakers", c.num_speakers},
          {"n_mels", c.n_mels},
          {"frames", c.frames},
          {"style_dim", c.style_dim},
          {"content_channels", c.content_channels},
          {"base_channels", c.base_channels},
          {"max_shift_rows", c.max_shift_rows},
          {"dropout_p", c.dropout_p},
          {"backbone_width", c.backbone_width},
          {"backbone_blocks", c.backbone_blocks},
          {"upsample_block", c.upsample_block},
          {"disc_max_channels", c.disc_max_channels},
          {"mel_center", c.mel_center},
          {"mel_scale", c.mel_scale}};
}

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"seed", c.seed},
          {"weights", weights_json(c.weights)},
          {"checkpoint_every", c.checkpoint_every},
          {"max_steps", c.max_steps},
          {"non_saturating", c.non_saturating}};
}

json to_json(const AugmentConfig& c) {
  return {{"enabled", c.enabled},
          {"time_warp_prob", c.time_warp_prob},
          {"freq_mask_prob", c.freq_mask_prob},
          {"max_freq_mask", c.params.max_freq_mask},
          {"max_time_warp", c.params.max_time_warp},
          {"mask_value", c.params.mask_value}};
}

json to_json(const RunConfig& c) {
  return {{"mel", to_json(c.mel)},
          {"model", to_json(c.model)},
          {"train", to_json(c.train)},
          {"augment", to_json(c.augment)}};
}

MelConfig mel_config_from_json(const json& j) {
  MelConfig c;
  FieldReader(j, "mel")
      .get("fft_size", c.fft_size).get("hop_size", c.hop_size).get("n_mels", c.n_mels)
      .get("target_width", c.target_width).get("sample_rate", c.sample_rate)
      .get("log_floor", c.log_floor).get("literal_zero_pad", c.literal_zero_pad)
      .finish();
  return c;
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  FieldReader(j, "model")
      .get("num_subbands", c.num_subbands).get("num_speakers", c.num_speakers)
      .get("n_mels", c.n_mels).get("frames", c.frames).get("style_dim", c.style_dim)
      .get("content_channels", c.content_channels).get("base_channels", c.base_channels)
      .get("max_shift_rows", c.max_shift_rows).get("dropout_p", c.dropout_p)
      .get("backbone_width", c.backbone_width).get("backbone_blocks", c.backbone_blocks)
      .get("upsample_block", c.upsample_block).get("disc_max_channels", c.disc_max_channels)
      .get("mel_center", c.mel_center).get("mel_scale", c.mel_scale)
      .finish();
  return c;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  json weights = json::object();
  FieldReader(j, "train")
      .get("epochs", c.epochs).get("batch_size", c.batch_size)
      .get("learning_rate", c.learning_rate).get("weight_decay", c.weight_decay)
      .get("seed", c.seed).get("weights", weights)
      .get("checkpoint_every", c.checkpoint_every).get("max_steps", c.max_steps)
      .get("non_saturating", c.non_saturating)
      .finish();
  c.weights = weights_from_json(weights);
  return c;
}

AugmentConfig augment_config_from_json(const json& j) {
  AugmentConfig c;
  FieldReader(j, "augment")
      .get("enabled", c.enabled).get("time_warp_prob", c.time_warp_prob)
      .get("freq_mask_prob", c.freq_mask_prob).get("max_freq_mask", c.params.max_freq_mask)
      .get("max_time_warp", c.params.max_time_warp).get("mask_value", c.params.mask_value)
      .finish();
  return c;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  json mel = json::object(), model = json::object(), train = json::object(),
       augment = json::object();
  FieldReader(j, "config")
      .get("mel", mel).get("model", model).get("train", train).get("augment", augment)
      .finish();
  c.mel = mel_config_from_json(mel);
  c.model = model_config_from_json(model);
  c.train = train_config_from_json(train);
  c.augment = augment_config_from_json(augment);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  try {
    return run_config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }

  json whole = to_json(cfg);
  // Resolve the key to a JSON pointer inside the config tree.
  std::string pointer;
  if (key.find('.') != std::string::npos) {
    pointer = "/" + key;
    for (auto& ch : pointer)
      if (ch == '.') ch = '/';
    if (!whole.contains(json::json_pointer(pointer))) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  } else {
    std::vector<std::string> hits;
    for (const auto& [section, fields] : whole.items()) {
      if (fields.contains(key)) hits.push_back("/" + section + "/" + key);
    }
    if (whole["train"]["weights"].contains(key)) hits.push_back("/train/weights/" + key);
    if (hits.empty()) throw ConfigError("unknown config key '" + key + "'");
    if (hits.size() > 1) {
      throw ConfigError("config key '" + key + "' is ambiguous; qualify it with a section");
    }
    pointer = hits.front();
  }
  whole[json::json_pointer(pointer)] = value;
  cfg = run_config_from_json(whole);
}

std::vector<std::string> model_config_diff(const ModelConfig& a, const ModelConfig& b) {
  std::vector<std::string> fields;
  const json ja = to_json(a), jb = to_json(b);
  for (const auto& [key, value] : ja.items()) {
    if (jb.at(key) != value) fields.push_back(key);
  }
  return fields;
}

}  // namespace sgvc
