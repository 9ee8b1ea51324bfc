#include "sgvc/layers.hpp"

#include <cmath>

#include "sgvc/error.hpp"

namespace F = torch::nn::functional;

namespace sgvc {

torch::Tensor adain(const torch::Tensor& x, const torch::Tensor& gamma,
                    const torch::Tensor& beta, double eps) {
  if (x.dim() != 4) throw ShapeError("adain expects a (B, C, H, W) tensor");
  const auto channels = x.size(1);
  if (gamma.size(-1) != channels || beta.size(-1) != channels) {
    throw ShapeError("adain gamma/beta length must equal the channel count " +
                     std::to_string(channels));
  }
  const auto mean = x.mean({2, 3}, /*keepdim=*/true);
  const auto var = (x - mean).square().mean({2, 3}, /*keepdim=*/true);
  const auto normalized = (x - mean) / torch::sqrt(var + eps);
  const auto g = gamma.dim() == 1 ? gamma.view({1, channels, 1, 1})
                                  : gamma.view({gamma.size(0), channels, 1, 1});
  const auto b = beta.dim() == 1 ? beta.view({1, channels, 1, 1})
                                 : beta.view({beta.size(0), channels, 1, 1});
  return g * normalized + b;
}

torch::Tensor apply_vertical_shift(const torch::Tensor& content,
                                   const torch::Tensor& offsets,
                                   double max_shift_rows) {
  if (content.dim() != 4 || offsets.dim() != 2 ||
      offsets.size(0) != content.size(0) || offsets.size(1) != content.size(3)) {
    throw ShapeError("vertical shift expects content (B, C, H, T) and offsets (B, T)");
  }
  const auto batch = content.size(0), channels = content.size(1);
  const auto rows = content.size(2), frames = content.size(3);
  if (!(max_shift_rows >= 0.0) || max_shift_rows >= static_cast<double>(rows)) {
    throw ConfigError("max_shift_rows must be in [0, rows)");
  }
  const auto opts = content.options();
  const auto row_index = torch::arange(rows, opts).view({1, 1, rows, 1});
  // out[h] = in[h - shift], sampled with linear interpolation.
  const auto source = row_index - (offsets * max_shift_rows).view({batch, 1, 1, frames});
  const auto lower = torch::floor(source).detach();
  const auto frac = source - lower;
  const auto upper = lower + 1;

  const auto gather_rows = [&](const torch::Tensor& idx) {
    const auto valid = (idx >= 0).logical_and(idx <= rows - 1).to(opts.dtype());
    const auto clamped = idx.clamp(0, rows - 1).to(torch::kLong)
                             .expand({batch, channels, rows, frames});
    return content.gather(2, clamped) * valid;
  };
  return (1 - frac) * gather_rows(lower) + frac * gather_rows(upper);
}

ResBlockImpl::ResBlockImpl(int in_channels, int out_channels, NormKind norm,
                           std::pair<int, int> pool, bool ceil_pool)
    : norm_kind_(norm),
      pool_(pool),
      ceil_pool_(ceil_pool),
      learned_shortcut_(in_channels != out_channels) {
  conv1_ = register_module(
      "conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, in_channels, 3).padding(1)));
  conv2_ = register_module(
      "conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 3).padding(1)));
  if (learned_shortcut_) {
    shortcut_ = register_module(
        "shortcut", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 1).bias(false)));
  }
  if (norm_kind_ == NormKind::kInstance) {
    norm1_ = register_module(
        "norm1", torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(in_channels).affine(true)));
    norm2_ = register_module(
        "norm2", torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(in_channels).affine(true)));
  }
}

torch::Tensor ResBlockImpl::downsample(const torch::Tensor& x) const {
  if (pool_.first == 1 && pool_.second == 1) return x;
  return F::avg_pool2d(x, F::AvgPool2dFuncOptions({pool_.first, pool_.second})
                              .ceil_mode(ceil_pool_));
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x) {
  auto skip = learned_shortcut_ ? shortcut_(x) : x;
  skip = downsample(skip);

  auto h = norm_kind_ == NormKind::kInstance ? norm1_(x) : x;
  h = conv1_(F::leaky_relu(h, F::LeakyReLUFuncOptions().negative_slope(0.2)));
  h = downsample(h);
  if (norm_kind_ == NormKind::kInstance) h = norm2_(h);
  h = conv2_(F::leaky_relu(h, F::LeakyReLUFuncOptions().negative_slope(0.2)));
  return (skip + h) / std::sqrt(2.0);
}

AdainResBlockImpl::AdainResBlockImpl(int in_channels, int out_channels,
                                     int style_dim, bool upsample_time)
    : out_channels_(out_channels),
      upsample_time_(upsample_time),
      learned_shortcut_(in_channels != out_channels) {
  conv1_ = register_module(
      "conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 3).padding(1)));
  conv2_ = register_module(
      "conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(out_channels, out_channels, 3).padding(1)));
  if (learned_shortcut_) {
    shortcut_ = register_module(
        "shortcut", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 1).bias(false)));
  }
  affine1_ = register_module("affine1", torch::nn::Linear(style_dim, 2 * out_channels));
  affine2_ = register_module("affine2", torch::nn::Linear(style_dim, 2 * out_channels));
  // Start from gamma = 1, beta = 0 so the block is a plain normalization.
  torch::NoGradGuard no_grad;
  for (auto* affine : {&affine1_, &affine2_}) {
    (*affine)->bias.zero_();
    (*affine)->bias.narrow(0, 0, out_channels).fill_(1.0);
  }
}

torch::Tensor AdainResBlockImpl::modulate(const torch::Tensor& h,
                                          torch::nn::Linear& affine,
                                          const torch::Tensor& style) const {
  const auto params = affine(style);
  return adain(h, params.narrow(1, 0, out_channels_),
               params.narrow(1, out_channels_, out_channels_));
}

torch::Tensor AdainResBlockImpl::forward(const torch::Tensor& x,
                                         const torch::Tensor& style) {
  auto input = x;
  if (upsample_time_) {
    input = F::interpolate(
        x, F::InterpolateFuncOptions()
               .scale_factor(std::vector<double>{1.0, 2.0})
               .mode(torch::kNearest));
  }
  const auto skip = learned_shortcut_ ? shortcut_(input) : input;
  const auto lrelu = F::LeakyReLUFuncOptions().negative_slope(0.2);
  auto h = F::leaky_relu(modulate(conv1_(input), affine1_, style), lrelu);
  h = F::leaky_relu(modulate(conv2_(h), affine2_, style), lrelu);
  return (h + skip) / std::sqrt(2.0);
}

FeatureNormImpl::FeatureNormImpl(int features, double eps) : eps_(eps) {
  weight_ = register_parameter("weight", torch::ones({features}));
  bias_ = register_parameter("bias", torch::zeros({features}));
}

torch::Tensor FeatureNormImpl::forward(const torch::Tensor& x) {
  const auto mean = x.mean(-1, /*keepdim=*/true);
  const auto var = (x - mean).square().mean(-1, /*keepdim=*/true);
  return (x - mean) / torch::sqrt(var + eps_) * weight_ + bias_;
}

}  // namespace sgvc
