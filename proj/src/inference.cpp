#include "sgvc/inference.hpp"

#include "sgvc/error.hpp"

namespace sgvc {

namespace {

// Restores the previous train/eval mode on scope exit.
class EvalScope {
 public:
  explicit EvalScope(VoiceConversionModel& m) : model_(m), was_training_(m.is_training()) {
    model_.train(false);
  }
  ~EvalScope() { model_.train(was_training_); }

 private:
  VoiceConversionModel& model_;
  bool was_training_;
};

}  // namespace

torch::Tensor reference_style(VoiceConversionModel& model,
                              const std::vector<MelSpectrogram>& references,
                              const MelConfig& cfg) {
  if (references.empty()) throw EmptyInputError("no reference utterance for the target style");
  EvalScope eval(model);
  torch::NoGradGuard no_grad;
  std::vector<torch::Tensor> windows;
  for (const auto& ref : references)
    windows.push_back(fit_width(ref, cfg.target_width, cfg.pad_value()).as_batch());
  return model.encode_style(torch::cat(windows, 0)).style.mean(0, /*keepdim=*/true);
}

MelSpectrogram convert_mel(VoiceConversionModel& model, const MelSpectrogram& source,
                           const torch::Tensor& style, const MelConfig& cfg) {
  if (source.width() == 0) throw EmptyInputError("source mel has no frames");
  EvalScope eval(model);
  torch::NoGradGuard no_grad;
  const std::int64_t w = cfg.target_width;
  const std::int64_t n = (source.width() + w - 1) / w;
  auto padded = torch::full({source.rows(), n * w}, cfg.pad_value(), torch::kFloat32);
  padded.narrow(1, 0, source.width()).copy_(source.values());
  // (n, 1, rows, w) windows
  auto windows = padded.view({source.rows(), n, w}).permute({1, 0, 2}).unsqueeze(1).contiguous();
  const auto content = model.encode_content(windows).shifted;
  const auto out = model.decode(content, style.expand({n, style.size(1), style.size(2)}));
  auto joined = out.squeeze(1).permute({1, 0, 2}).reshape({source.rows(), n * w});
  return MelSpectrogram(joined.narrow(1, 0, source.width()).contiguous());
}

MelSpectrogram reconstruct_mel(VoiceConversionModel& model, const MelSpectrogram& source,
                               const MelConfig& cfg) {
  return convert_mel(model, source, reference_style(model, {source}, cfg), cfg);
}

}  // namespace sgvc
