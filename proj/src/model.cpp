#include "sgvc/model.hpp"

#include <cmath>

#include "sgvc/error.hpp"

namespace F = torch::nn::functional;

namespace sgvc {

namespace {

torch::nn::Conv2dOptions conv(int in, int out, int k, int stride = 1, int pad = -1) {
  return torch::nn::Conv2dOptions(in, out, k).stride(stride).padding(pad < 0 ? k / 2 : pad);
}

const auto kLeaky = F::LeakyReLUFuncOptions().negative_slope(0.2);

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("model config: " + m); };
  if (num_subbands < 1) fail("num_subbands must be >= 1");
  if (n_mels % 4 != 0) fail("n_mels must be divisible by 4");
  if (n_mels % num_subbands != 0) {
    fail("n_mels (" + std::to_string(n_mels) + ") must be divisible by num_subbands (" +
         std::to_string(num_subbands) + ")");
  }
  if (frames < 2 || frames % 2 != 0) fail("frames must be a positive even number");
  if (num_speakers < 1) fail("num_speakers must be >= 1");
  if (style_dim < 1 || content_channels < 1 || base_channels < 1 ||
      backbone_width < 1 || disc_max_channels < 1) {
    fail("channel counts must be positive");
  }
  if (max_shift_rows < 0 || max_shift_rows >= content_rows()) {
    fail("max_shift_rows must be in [0, " + std::to_string(content_rows()) + ")");
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) fail("dropout_p must be in [0, 1)");
  if (!std::isfinite(mel_center)) fail("mel_center must be finite");
  if (!(mel_scale > 0.0 && std::isfinite(mel_scale))) fail("mel_scale must be positive");
  if (backbone_blocks.size() != 4) fail("backbone_blocks needs four stages");
  for (int b : backbone_blocks)
    if (b < 1) fail("backbone stages need at least one block");
  if (upsample_block < 0 || upsample_block > 5) fail("upsample_block must be in [0, 5]");
}

std::vector<int> ModelConfig::decoder_channels() const {
  const int mid = static_cast<int>(std::lround(
      std::sqrt(static_cast<double>(content_channels) * base_channels)));
  return {content_channels, content_channels, content_channels, mid, mid,
          base_channels, base_channels};
}

ModelConfig ModelConfig::compact(int num_speakers, int num_subbands) {
  ModelConfig cfg;
  cfg.num_speakers = num_speakers;
  cfg.num_subbands = num_subbands;
  cfg.style_dim = 32;
  cfg.content_channels = 32;
  cfg.base_channels = 16;
  cfg.backbone_width = 8;
  cfg.backbone_blocks = {1, 1, 1, 1};
  cfg.disc_max_channels = 64;
  return cfg;
}

// Content encoder

ContentEncoderImpl::ContentEncoderImpl(const ModelConfig& cfg) : cfg_(cfg) {
  const int base = cfg.base_channels;
  const int out = cfg.content_channels;
  const int mid = std::min(2 * base, out);
  conv_in_ = register_module("conv_in", torch::nn::Conv2d(conv(1, base, 3)));
  blocks_ = register_module("blocks", torch::nn::ModuleList());
  blocks_->push_back(ResBlock(base, mid, NormKind::kInstance, std::make_pair(2, 1)));
  blocks_->push_back(ResBlock(mid, out, NormKind::kInstance, std::make_pair(2, 1)));
  blocks_->push_back(ResBlock(out, out, NormKind::kInstance, std::make_pair(1, 2)));
  for (int i = 0; i < 3; ++i) blocks_->push_back(ResBlock(out, out, NormKind::kInstance));
}

torch::Tensor ContentEncoderImpl::forward(const torch::Tensor& mel) {
  auto h = conv_in_(mel);
  for (const auto& block : *blocks_) h = block->as<ResBlock>()->forward(h);
  return h;
}

// Pitch shift

PitchShiftImpl::PitchShiftImpl(const ModelConfig& cfg) {
  body_ = register_module("body", torch::nn::Sequential());
  int in = cfg.content_channels;
  for (int i = 0; i < 5; ++i) {
    body_->push_back(torch::nn::Conv2d(conv(in, cfg.base_channels, 5)));
    body_->push_back(torch::nn::InstanceNorm2d(
        torch::nn::InstanceNorm2dOptions(cfg.base_channels).affine(true)));
    body_->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)));
    in = cfg.base_channels;
  }
  head_ = register_module("head", torch::nn::Conv2d(conv(in, 1, 1)));
  torch::NoGradGuard no_grad;
  head_->weight.zero_();
  head_->bias.zero_();
}

torch::Tensor PitchShiftImpl::forward(const torch::Tensor& content) {
  // (B, 1, H, T) -> mean over rows -> (B, T)
  return torch::tanh(head_(body_->forward(content)).mean(2).squeeze(1));
}

// Style encoder

BottleneckImpl::BottleneckImpl(int in_channels, int planes, int stride) {
  const int out = planes * 4;
  conv1_ = register_module("conv1", torch::nn::Conv2d(conv(in_channels, planes, 1).bias(false)));
  bn1_ = register_module("bn1", torch::nn::BatchNorm2d(planes));
  conv2_ = register_module("conv2", torch::nn::Conv2d(conv(planes, planes, 3, stride).bias(false)));
  bn2_ = register_module("bn2", torch::nn::BatchNorm2d(planes));
  conv3_ = register_module("conv3", torch::nn::Conv2d(conv(planes, out, 1).bias(false)));
  bn3_ = register_module("bn3", torch::nn::BatchNorm2d(out));
  if (stride != 1 || in_channels != out) {
    downsample_ = register_module(
        "downsample",
        torch::nn::Sequential(torch::nn::Conv2d(conv(in_channels, out, 1, stride).bias(false)),
                              torch::nn::BatchNorm2d(out)));
  }
}

torch::Tensor BottleneckImpl::forward(const torch::Tensor& x) {
  auto h = torch::relu(bn1_(conv1_(x)));
  h = torch::relu(bn2_(conv2_(h)));
  h = bn3_(conv3_(h));
  return torch::relu(h + (downsample_ ? downsample_->forward(x) : x));
}

StyleEncoderImpl::StyleEncoderImpl(const ModelConfig& cfg) : cfg_(cfg) {
  const int w = cfg.backbone_width;
  stem_ = register_module(
      "stem", torch::nn::Sequential(
                  torch::nn::Conv2d(conv(1, w, 7, 2, 3).bias(false)),
                  torch::nn::BatchNorm2d(w), torch::nn::ReLU(),
                  torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(3).stride(2).padding(1))));
  layers_ = register_module("layers", torch::nn::Sequential());
  int in = w;
  // The fourth stage keeps stride 1: its downsampling is removed.
  const int strides[4] = {1, 2, 2, 1};
  for (int stage = 0; stage < 4; ++stage) {
    const int planes = w << stage;
    for (int b = 0; b < cfg.backbone_blocks[stage]; ++b) {
      layers_->push_back(Bottleneck(in, planes, b == 0 ? strides[stage] : 1));
      in = planes * 4;
    }
  }
  const int joint = 2 * cfg.backbone_channels();
  const int h1 = std::max(cfg.style_dim, joint / 4);
  const int h2 = std::max(cfg.style_dim, joint / 8);
  fc1_ = register_module("fc1", torch::nn::Linear(joint, h1));
  norm1_ = register_module("norm1", FeatureNorm(h1));
  fc2_ = register_module("fc2", torch::nn::Linear(h1, h2));
  norm2_ = register_module("norm2", FeatureNorm(h2));
  fc3_ = register_module("fc3", torch::nn::Linear(h2, cfg.style_dim));
  norm3_ = register_module("norm3", FeatureNorm(cfg.style_dim));
  dropout_ = register_module("dropout", torch::nn::Dropout(cfg.dropout_p));
  classifier_ = register_module("classifier", torch::nn::Linear(joint, cfg.num_speakers));
}

StyleOutput StyleEncoderImpl::forward(const torch::Tensor& mel) {
  StyleOutput out;
  out.backbone = layers_->forward(stem_->forward(mel));
  const auto parts = cfg_.num_subbands;
  out.style_map = F::adaptive_avg_pool2d(
      out.backbone, F::AdaptiveAvgPool2dFuncOptions({parts, out.backbone.size(3)}));
  const auto local = out.style_map.mean(3).transpose(1, 2);           // (B, P, C)
  const auto global = out.backbone.mean({2, 3}).unsqueeze(1).expand_as(local);
  out.joint = torch::cat({local, global}, 2);                        // (B, P, 2C)

  auto h = torch::relu(norm1_(fc1_(out.joint)));
  h = torch::relu(norm2_(fc2_(h)));
  out.style = torch::relu(norm3_(fc3_(h)));
  out.class_logits = classifier_(dropout_(out.joint)).mean(1);
  return out;
}

// Decoder

SubbandPathImpl::SubbandPathImpl(const ModelConfig& cfg)
    : rows_out_(cfg.n_mels / cfg.num_subbands) {
  blocks_ = register_module("blocks", torch::nn::ModuleList());
  const auto ch = cfg.decoder_channels();
  for (int i = 0; i < 6; ++i) {
    blocks_->push_back(AdainResBlock(ch[i], ch[i + 1], cfg.style_dim, i == cfg.upsample_block));
  }
}

torch::Tensor SubbandPathImpl::forward(const torch::Tensor& content,
                                       const torch::Tensor& style) {
  auto h = content;
  if (h.size(2) != rows_out_) {
    h = F::interpolate(h, F::InterpolateFuncOptions()
                              .size(std::vector<int64_t>{rows_out_, h.size(3)})
                              .mode(torch::kBilinear)
                              .align_corners(false));
  }
  for (const auto& block : *blocks_) h = block->as<AdainResBlock>()->forward(h, style);
  return h;
}

DecoderImpl::DecoderImpl(const ModelConfig& cfg) : cfg_(cfg) {
  paths_ = register_module("paths", torch::nn::ModuleList());
  for (int k = 0; k < cfg.num_subbands; ++k) paths_->push_back(SubbandPath(cfg));
  fuse1_ = register_module("fuse1", torch::nn::Conv2d(conv(cfg.base_channels, cfg.base_channels, 3)));
  fuse2_ = register_module("fuse2", torch::nn::Conv2d(conv(cfg.base_channels, 1, 3)));
}

std::vector<torch::Tensor> DecoderImpl::paths(const torch::Tensor& content,
                                              const torch::Tensor& style) {
  if (style.dim() != 3 || style.size(1) != cfg_.num_subbands) {
    throw ConfigError("decoder needs " + std::to_string(cfg_.num_subbands) +
                      " style parts, got " +
                      (style.dim() == 3 ? std::to_string(style.size(1)) : "a malformed tensor"));
  }
  std::vector<torch::Tensor> outs;
  outs.reserve(static_cast<std::size_t>(cfg_.num_subbands));
  for (int k = 0; k < cfg_.num_subbands; ++k) {
    outs.push_back(paths_[k]->as<SubbandPath>()->forward(content, style.select(1, k)));
  }
  return outs;
}

torch::Tensor DecoderImpl::fuse(const std::vector<torch::Tensor>& path_outputs) {
  // Path 0 carries the lowest band, which sits at row 0.
  auto h = torch::cat(path_outputs, 2);
  h = fuse1_(F::leaky_relu(h, kLeaky));
  return fuse2_(F::leaky_relu(h, kLeaky));
}

torch::Tensor DecoderImpl::forward(const torch::Tensor& content,
                                   const torch::Tensor& style) {
  return fuse(paths(content, style));
}

// Discriminator

DiscriminatorImpl::DiscriminatorImpl(const ModelConfig& cfg)
    : num_speakers_(cfg.num_speakers) {
  const int base = cfg.base_channels;
  conv_in_ = register_module("conv_in", torch::nn::Conv2d(conv(1, base, 3)));
  blocks_ = register_module("blocks", torch::nn::ModuleList());
  int in = base;
  for (int i = 0; i < 4; ++i) {
    const int out = std::min(base << std::min(i + 1, 3), cfg.disc_max_channels);
    blocks_->push_back(ResBlock(in, out, NormKind::kNone, std::make_pair(2, 2), /*ceil_pool=*/true));
    in = out;
  }
  conv5_ = register_module("conv5", torch::nn::Conv2d(conv(in, in, 5)));
  head_ = register_module("head", torch::nn::Conv2d(conv(in, cfg.num_speakers, 1)));
}

torch::Tensor DiscriminatorImpl::logits(const torch::Tensor& mel) {
  auto h = conv_in_(mel);
  for (const auto& block : *blocks_) h = block->as<ResBlock>()->forward(h);
  h = conv5_(F::leaky_relu(h, kLeaky));
  h = head_(F::leaky_relu(h, kLeaky));
  return h.mean({2, 3});
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& mel,
                                         const torch::Tensor& labels) {
  if (labels.dim() != 1 || labels.size(0) != mel.size(0)) {
    throw ShapeError("discriminator needs one label per batch item");
  }
  const auto lab = labels.to(torch::kLong);
  if (lab.numel() > 0 &&
      (lab.min().item<int64_t>() < 0 || lab.max().item<int64_t>() >= num_speakers_)) {
    throw LabelError("speaker label out of range [0, " + std::to_string(num_speakers_) + ")");
  }
  return logits(mel).gather(1, lab.unsqueeze(1)).squeeze(1);
}

// Full model

VoiceConversionModel::VoiceConversionModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  content_encoder = ContentEncoder(cfg_);
  pitch_shift = PitchShift(cfg_);
  style_encoder = StyleEncoder(cfg_);
  decoder = Decoder(cfg_);
  discriminator = Discriminator(cfg_);
  content_dropout = torch::nn::Dropout(cfg_.dropout_p);
}

void VoiceConversionModel::check_input(const torch::Tensor& mel) const {
  if (mel.dim() != 4 || mel.size(1) != 1 || mel.size(2) != cfg_.n_mels ||
      mel.size(3) != cfg_.frames) {
    std::string got = "(";
    for (int64_t i = 0; i < mel.dim(); ++i)
      got += (i ? ", " : "") + std::to_string(mel.size(i));
    throw ShapeError("expected mel batch (B, 1, " + std::to_string(cfg_.n_mels) +
                     ", " + std::to_string(cfg_.frames) + "), got " + got + ")");
  }
}

torch::Tensor VoiceConversionModel::standardize(const torch::Tensor& mel) const {
  return (mel - cfg_.mel_center) / cfg_.mel_scale;
}

ContentOutput VoiceConversionModel::encode_content(const torch::Tensor& mel) {
  check_input(mel);
  ContentOutput out;
  out.raw = content_encoder(standardize(mel));
  out.offsets = pitch_shift(out.raw);
  out.shifted = content_dropout(apply_vertical_shift(out.raw, out.offsets, cfg_.max_shift_rows));
  return out;
}

StyleOutput VoiceConversionModel::encode_style(const torch::Tensor& mel) {
  check_input(mel);
  return style_encoder(standardize(mel));
}

torch::Tensor VoiceConversionModel::decode(const torch::Tensor& content,
                                           const torch::Tensor& style) {
  if (content.dim() != 4 || content.size(1) != cfg_.content_channels ||
      content.size(2) != cfg_.content_rows() || content.size(3) != cfg_.content_frames()) {
    throw ShapeError("content feature has the wrong shape for this model");
  }
  if (style.dim() != 3 || style.size(0) != content.size(0) ||
      style.size(2) != cfg_.style_dim) {
    throw ShapeError("style code must be (B, parts, style_dim)");
  }
  return decoder(content, style) * cfg_.mel_scale + cfg_.mel_center;
}

torch::Tensor VoiceConversionModel::discriminate(const torch::Tensor& mel,
                                                 const torch::Tensor& labels) {
  check_input(mel);
  return discriminator(standardize(mel), labels);
}

torch::Tensor VoiceConversionModel::convert(const torch::Tensor& source,
                                            const torch::Tensor& reference) {
  const auto content = encode_content(source).shifted;
  const auto style = encode_style(reference).style;
  return decode(content, style);
}

void VoiceConversionModel::train(bool on) {
  for (auto& [name, net] : networks()) net->train(on);
  content_dropout->train(on);
}

bool VoiceConversionModel::is_training() const { return content_encoder->is_training(); }

std::vector<torch::Tensor> VoiceConversionModel::generator_parameters() {
  std::vector<torch::Tensor> params;
  for (auto* net : std::initializer_list<torch::nn::Module*>{
           content_encoder.get(), pitch_shift.get(), style_encoder.get(), decoder.get()}) {
    auto p = net->parameters();
    params.insert(params.end(), p.begin(), p.end());
  }
  return params;
}

std::vector<torch::Tensor> VoiceConversionModel::discriminator_parameters() {
  return discriminator->parameters();
}

std::vector<std::pair<std::string, std::shared_ptr<torch::nn::Module>>>
VoiceConversionModel::networks() {
  return {{"content_encoder", content_encoder.ptr()},
          {"pitch_shift", pitch_shift.ptr()},
          {"style_encoder", style_encoder.ptr()},
          {"decoder", decoder.ptr()},
          {"discriminator", discriminator.ptr()}};
}

}  // namespace sgvc
