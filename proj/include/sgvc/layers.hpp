#pragma once

#include <torch/torch.h>

#include <utility>

namespace sgvc {

/// Adaptive instance normalization. x is (B, C, H, W); gamma and beta are
/// (B, C) or (C). Statistics are per item and channel over H x W.
torch::Tensor adain(const torch::Tensor& x, const torch::Tensor& gamma,
                    const torch::Tensor& beta, double eps = 1e-5);

/// Shifts every frame of a (B, C, H, T) feature map vertically by
/// offsets (B, T) * max_shift_rows rows. A positive shift moves content
/// towards higher row indices (higher frequency). Fractional shifts
/// interpolate linearly between neighbouring rows; rows exposed at the
/// border are zero. Differentiable in both the features and the offsets.
torch::Tensor apply_vertical_shift(const torch::Tensor& content,
                                   const torch::Tensor& offsets,
                                   double max_shift_rows);

enum class NormKind { kNone, kInstance };

/// Pre-activation residual block with optional average-pool downsampling.
/// Output is (shortcut + residual) / sqrt(2).
class ResBlockImpl : public torch::nn::Module {
 public:
  ResBlockImpl(int in_channels, int out_channels, NormKind norm,
               std::pair<int, int> pool = {1, 1}, bool ceil_pool = false);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::Tensor downsample(const torch::Tensor& x) const;

  NormKind norm_kind_;
  std::pair<int, int> pool_;
  bool ceil_pool_;
  bool learned_shortcut_;
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, shortcut_{nullptr};
  torch::nn::InstanceNorm2d norm1_{nullptr}, norm2_{nullptr};
};
TORCH_MODULE(ResBlock);

/// [conv3x3 -> AdaIN -> LeakyReLU] x 2 with a 1x1 skip projection when the
/// channel count changes. Each AdaIN takes (gamma, beta) from its own affine
/// map of the style vector. Optional nearest x2 upsampling along time at
/// the block input.
class AdainResBlockImpl : public torch::nn::Module {
 public:
  AdainResBlockImpl(int in_channels, int out_channels, int style_dim,
                    bool upsample_time);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& style);

 private:
  torch::Tensor modulate(const torch::Tensor& h, torch::nn::Linear& affine,
                         const torch::Tensor& style) const;

  int out_channels_;
  bool upsample_time_;
  bool learned_shortcut_;
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, shortcut_{nullptr};
  torch::nn::Linear affine1_{nullptr}, affine2_{nullptr};
};
TORCH_MODULE(AdainResBlock);

/// Normalizes each vector over its last dimension, with learned scale and
/// bias. This is instance normalization applied to a 1-D feature vector.
class FeatureNormImpl : public torch::nn::Module {
 public:
  explicit FeatureNormImpl(int features, double eps = 1e-5);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  double eps_;
  torch::Tensor weight_, bias_;
};
TORCH_MODULE(FeatureNorm);

}  // namespace sgvc
