#include "sgvc/checkpoint.hpp"

#include <fstream>
#include <map>

#include "sgvc/blob.hpp"
#include "sgvc/config.hpp"
#include "sgvc/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace sgvc {

std::vector<std::pair<std::string, torch::Tensor>> module_tensors(torch::nn::Module& module) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& item : module.named_parameters()) out.emplace_back(item.key(), item.value());
  for (const auto& item : module.named_buffers()) out.emplace_back(item.key(), item.value());
  return out;
}

namespace {

NamedTensors optimizer_tensors(torch::optim::AdamW& opt) {
  NamedTensors out;
  std::size_t index = 0;
  for (auto& group : opt.param_groups()) {
    for (auto& p : group.params()) {
      const std::string prefix = "p" + std::to_string(index++) + ".";
      auto it = opt.state().find(p.unsafeGetTensorImpl());
      if (it == opt.state().end()) continue;
      auto& st = static_cast<torch::optim::AdamWParamState&>(*it->second);
      out.emplace_back(prefix + "step", torch::tensor({static_cast<float>(st.step())}));
      out.emplace_back(prefix + "exp_avg", st.exp_avg());
      out.emplace_back(prefix + "exp_avg_sq", st.exp_avg_sq());
      if (st.max_exp_avg_sq().defined()) {
        out.emplace_back(prefix + "max_exp_avg_sq", st.max_exp_avg_sq());
      }
    }
  }
  return out;
}

void write_meta(const fs::path& path, const CheckpointMeta& meta) {
  const json j = {{"schema_version", meta.schema_version},
                  {"stage", meta.stage},
                  {"step", meta.step},
                  {"model", to_json(meta.model)},
                  {"mel", to_json(meta.mel)},
                  {"speakers", meta.speakers},
                  {"extra", meta.extra}};
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace

void save_checkpoint(const fs::path& dir, VoiceConversionModel& model,
                     const CheckpointMeta& meta,
                     const std::vector<NamedOptimizer>& optimizers) {
  fs::path tmp = dir;
  tmp += ".partial";
  std::error_code ec;
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp, ec);
  if (ec) throw IoError("cannot create " + tmp.string() + ": " + ec.message());

  write_meta(tmp / "meta.json", meta);
  for (auto& [name, net] : model.networks()) {
    write_tensor_archive(tmp / (name + ".bin"), module_tensors(*net));
  }
  for (const auto& [name, opt] : optimizers) {
    write_tensor_archive(tmp / ("optim_" + name + ".bin"), optimizer_tensors(*opt));
  }

  fs::path old = dir;
  old += ".old";
  fs::remove_all(old, ec);
  if (fs::exists(dir)) fs::rename(dir, old);
  fs::rename(tmp, dir, ec);
  if (ec) throw IoError("cannot move checkpoint into " + dir.string() + ": " + ec.message());
  fs::remove_all(old, ec);
}

CheckpointMeta read_checkpoint_meta(const fs::path& dir) {
  const auto path = dir / "meta.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint metadata " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw IntegrityError("corrupt checkpoint metadata " + path.string() + ": " + e.what());
  }
  CheckpointMeta meta;
  meta.schema_version = j.value("schema_version", -1);
  if (meta.schema_version != kCheckpointSchemaVersion) {
    throw SchemaError("checkpoint schema_version " + std::to_string(meta.schema_version) +
                      " is not supported (expected " +
                      std::to_string(kCheckpointSchemaVersion) + ")");
  }
  try {
    meta.stage = j.at("stage").get<std::string>();
    meta.step = j.at("step").get<std::int64_t>();
    meta.model = model_config_from_json(j.at("model"));
    meta.mel = mel_config_from_json(j.at("mel"));
    meta.speakers = j.at("speakers").get<std::vector<std::string>>();
    meta.extra = j.value("extra", json::object());
  } catch (const json::exception& e) {
    throw SchemaError("checkpoint metadata " + path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw SchemaError(std::string("checkpoint metadata: ") + e.what());
  }
  if (static_cast<int>(meta.speakers.size()) != meta.model.num_speakers) {
    throw SchemaError("checkpoint speaker table has " + std::to_string(meta.speakers.size()) +
                      " entries but num_speakers is " + std::to_string(meta.model.num_speakers));
  }
  return meta;
}

LoadedCheckpoint load_checkpoint(const fs::path& dir, const ModelConfig* expected) {
  LoadedCheckpoint out;
  out.meta = read_checkpoint_meta(dir);
  if (expected != nullptr) {
    const auto diff = model_config_diff(*expected, out.meta.model);
    if (!diff.empty()) {
      std::string fields;
      for (const auto& f : diff) fields += (fields.empty() ? "" : ", ") + f;
      throw SchemaError("checkpoint model config differs in: " + fields);
    }
  }
  out.model = std::make_shared<VoiceConversionModel>(out.meta.model);
  torch::NoGradGuard no_grad;
  for (auto& [name, net] : out.model->networks()) {
    const auto stored = read_tensor_archive(dir / (name + ".bin"));
    std::map<std::string, torch::Tensor> by_name(stored.begin(), stored.end());
    const auto targets = module_tensors(*net);
    if (by_name.size() != targets.size()) {
      throw SchemaError(name + ".bin holds " + std::to_string(by_name.size()) +
                        " tensors, model expects " + std::to_string(targets.size()));
    }
    for (const auto& [key, target] : targets) {
      const auto it = by_name.find(key);
      if (it == by_name.end()) throw SchemaError(name + ".bin lacks tensor '" + key + "'");
      if (!it->second.sizes().equals(target.sizes())) {
        throw SchemaError(name + ".bin tensor '" + key + "' has the wrong shape");
      }
      auto t = target;
      t.copy_(it->second.to(target.dtype()));
    }
  }
  return out;
}

void load_optimizer_state(const fs::path& dir, const std::string& name,
                          torch::optim::AdamW& optimizer) {
  const auto stored = read_tensor_archive(dir / ("optim_" + name + ".bin"));
  std::map<std::string, torch::Tensor> by_name(stored.begin(), stored.end());
  std::size_t index = 0;
  for (auto& group : optimizer.param_groups()) {
    for (auto& p : group.params()) {
      const std::string prefix = "p" + std::to_string(index++) + ".";
      const auto step = by_name.find(prefix + "step");
      if (step == by_name.end()) continue;
      auto st = std::make_unique<torch::optim::AdamWParamState>();
      st->step(static_cast<int64_t>(step->second.item<float>()));
      const auto avg = by_name.find(prefix + "exp_avg");
      const auto avg_sq = by_name.find(prefix + "exp_avg_sq");
      if (avg == by_name.end() || avg_sq == by_name.end() ||
          !avg->second.sizes().equals(p.sizes())) {
        throw SchemaError("optimizer state '" + name + "' does not match parameter " +
                          std::to_string(index - 1));
      }
      st->exp_avg(avg->second.clone());
      st->exp_avg_sq(avg_sq->second.clone());
      const auto max_sq = by_name.find(prefix + "max_exp_avg_sq");
      if (max_sq != by_name.end()) st->max_exp_avg_sq(max_sq->second.clone());
      optimizer.state()[p.unsafeGetTensorImpl()] = std::move(st);
    }
  }
}

}  // namespace sgvc
