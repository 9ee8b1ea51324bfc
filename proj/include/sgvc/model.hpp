#pragma once

#include <torch/torch.h>

#include <string>
#include <vector>

#include "sgvc/layers.hpp"

namespace sgvc {

struct ModelConfig {
  int num_subbands = 4;
  int num_speakers = 2;
  int n_mels = 80;
  int frames = 224;
  int style_dim = 256;
  int content_channels = 256;
  int base_channels = 64;
  int max_shift_rows = 4;
  double dropout_p = 0.1;
  /// ResNet bottleneck width of the first stage; output channels are 32x this.
  int backbone_width = 64;
  std::vector<int> backbone_blocks = {3, 4, 6, 3};
  /// Index of the decoder block that upsamples time 112 -> 224.
  int upsample_block = 3;
  int disc_max_channels = 512;
  /// Networks see (mel - mel_center) / mel_scale; the decoder output is mapped
  /// back to log-mel with the inverse affine.
  double mel_center = -4.0;
  double mel_scale = 4.0;

  /// Throws ConfigError.
  void validate() const;

  int content_rows() const { return n_mels / 4; }
  int content_frames() const { return frames / 2; }
  int backbone_channels() const { return backbone_width * 32; }
  /// Decoder channel schedule, seven entries: block i maps [i] -> [i + 1].
  std::vector<int> decoder_channels() const;

  /// Width-reduced configuration used for CPU-scale training runs.
  static ModelConfig compact(int num_speakers, int num_subbands = 4);
};

/// (B, 1, n_mels, frames) -> (B, content_channels, n_mels / 4, frames / 2).
class ContentEncoderImpl : public torch::nn::Module {
 public:
  explicit ContentEncoderImpl(const ModelConfig& cfg);
  torch::Tensor forward(const torch::Tensor& mel);

 private:
  ModelConfig cfg_;
  torch::nn::Conv2d conv_in_{nullptr};
  torch::nn::ModuleList blocks_{nullptr};
};
TORCH_MODULE(ContentEncoder);

/// Five [5x5 conv, instance norm, LeakyReLU] stages, a zero-initialized 1x1
/// conv, mean over rows, Tanh: (B, C, H, T) -> (B, T) in (-1, 1).
class PitchShiftImpl : public torch::nn::Module {
 public:
  explicit PitchShiftImpl(const ModelConfig& cfg);
  torch::Tensor forward(const torch::Tensor& content);

 private:
  torch::nn::Sequential body_{nullptr};
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(PitchShift);

class BottleneckImpl : public torch::nn::Module {
 public:
  BottleneckImpl(int in_channels, int planes, int stride);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, conv3_{nullptr};
  torch::nn::BatchNorm2d bn1_{nullptr}, bn2_{nullptr}, bn3_{nullptr};
  torch::nn::Sequential downsample_{nullptr};
};
TORCH_MODULE(Bottleneck);

struct StyleOutput {
  torch::Tensor style;        // (B, P, style_dim)
  torch::Tensor class_logits; // (B, num_speakers)
  torch::Tensor backbone;     // (B, 32w, H', W')
  torch::Tensor style_map;    // (B, 32w, P, W')
  torch::Tensor joint;        // (B, P, 64w), local ++ global
};

/// One-channel ResNet-50 style backbone without the last downsampling,
/// per-subband pooling, and the style MLP and classifier heads.
class StyleEncoderImpl : public torch::nn::Module {
 public:
  explicit StyleEncoderImpl(const ModelConfig& cfg);
  StyleOutput forward(const torch::Tensor& mel);

 private:
  ModelConfig cfg_;
  torch::nn::Sequential stem_{nullptr};
  torch::nn::Sequential layers_{nullptr};
  torch::nn::Linear fc1_{nullptr}, fc2_{nullptr}, fc3_{nullptr};
  FeatureNorm norm1_{nullptr}, norm2_{nullptr}, norm3_{nullptr};
  torch::nn::Dropout dropout_{nullptr};
  torch::nn::Linear classifier_{nullptr};
};
TORCH_MODULE(StyleEncoder);

/// Chain of six AdaIN residual blocks driven by one style part. Emits
/// (B, base_channels, n_mels / P, frames).
class SubbandPathImpl : public torch::nn::Module {
 public:
  explicit SubbandPathImpl(const ModelConfig& cfg);
  torch::Tensor forward(const torch::Tensor& content, const torch::Tensor& style);

 private:
  int rows_out_;
  torch::nn::ModuleList blocks_{nullptr};
};
TORCH_MODULE(SubbandPath);

/// One independent path per subband; outputs are stacked low to high
/// frequency and fused by two 3x3 convolutions.
class DecoderImpl : public torch::nn::Module {
 public:
  explicit DecoderImpl(const ModelConfig& cfg);
  torch::Tensor forward(const torch::Tensor& content, const torch::Tensor& style);
  /// Pre-fusion outputs, one per subband.
  std::vector<torch::Tensor> paths(const torch::Tensor& content,
                                   const torch::Tensor& style);
  torch::Tensor fuse(const std::vector<torch::Tensor>& path_outputs);

 private:
  ModelConfig cfg_;
  torch::nn::ModuleList paths_{nullptr};
  torch::nn::Conv2d fuse1_{nullptr}, fuse2_{nullptr};
};
TORCH_MODULE(Decoder);

/// Class-conditional discriminator returning one realness logit per class.
class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(const ModelConfig& cfg);
  /// (B, num_speakers) logits.
  torch::Tensor logits(const torch::Tensor& mel);
  /// Logit of class labels[b] for each item. Throws LabelError.
  torch::Tensor forward(const torch::Tensor& mel, const torch::Tensor& labels);

 private:
  int num_speakers_;
  torch::nn::Conv2d conv_in_{nullptr};
  torch::nn::ModuleList blocks_{nullptr};
  torch::nn::Conv2d conv5_{nullptr}, head_{nullptr};
};
TORCH_MODULE(Discriminator);

struct ContentOutput {
  torch::Tensor raw;      // encoder output before the shift
  torch::Tensor offsets;  // (B, T)
  torch::Tensor shifted;  // shifted, then dropout in training mode
};

/// All sub-networks of the voice-conversion model.
class VoiceConversionModel {
 public:
  explicit VoiceConversionModel(const ModelConfig& cfg);

  const ModelConfig& config() const noexcept { return cfg_; }

  /// Throws ShapeError unless mel is (B, 1, n_mels, frames).
  void check_input(const torch::Tensor& mel) const;
  torch::Tensor standardize(const torch::Tensor& mel) const;

  ContentOutput encode_content(const torch::Tensor& mel);
  StyleOutput encode_style(const torch::Tensor& mel);
  torch::Tensor decode(const torch::Tensor& content, const torch::Tensor& style);
  torch::Tensor discriminate(const torch::Tensor& mel, const torch::Tensor& labels);

  /// Convert source mel using the style of a reference mel.
  torch::Tensor convert(const torch::Tensor& source, const torch::Tensor& reference);

  void train(bool on = true);
  bool is_training() const;

  std::vector<torch::Tensor> generator_parameters();
  std::vector<torch::Tensor> discriminator_parameters();

  /// Sub-networks by checkpoint name.
  std::vector<std::pair<std::string, std::shared_ptr<torch::nn::Module>>>
  networks();

  ContentEncoder content_encoder{nullptr};
  PitchShift pitch_shift{nullptr};
  StyleEncoder style_encoder{nullptr};
  Decoder decoder{nullptr};
  Discriminator discriminator{nullptr};
  torch::nn::Dropout content_dropout{nullptr};

 private:
  ModelConfig cfg_;
};

}  // namespace sgvc
