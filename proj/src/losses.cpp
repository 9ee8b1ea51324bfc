#include "sgvc/losses.hpp"

#include <cmath>

#include "sgvc/dsp.hpp"
#include "sgvc/error.hpp"

namespace F = torch::nn::functional;

namespace sgvc {

namespace {

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b,
                        const char* what) {
  if (!a.sizes().equals(b.sizes())) {
    throw ShapeError(std::string(what) + ": operand shapes differ");
  }
}

}  // namespace

void LossWeights::validate() const {
  const std::pair<const char*, double> all[] = {
      {"adv", adv},   {"id", id},     {"style", style}, {"content", content},
      {"ds", ds},     {"norm", norm}, {"rec", rec}};
  for (const auto& [name, v] : all) {
    if (!std::isfinite(v) || v < 0) {
      throw ConfigError(std::string("loss weight '") + name + "' must be finite and >= 0");
    }
  }
}

torch::Tensor adversarial_loss(const torch::Tensor& real_logit,
                               const torch::Tensor& fake_logit) {
  // log(1 - sigmoid(x)) == log sigmoid(-x)
  return F::logsigmoid(real_logit).mean() + F::logsigmoid(-fake_logit).mean();
}

torch::Tensor generator_adversarial_loss(const torch::Tensor& fake_logit,
                                         bool non_saturating) {
  if (non_saturating) return -F::logsigmoid(fake_logit).mean();
  return F::logsigmoid(-fake_logit).mean();
}

torch::Tensor cross_entropy(const torch::Tensor& logits, const torch::Tensor& labels) {
  if (logits.dim() != 2 || labels.dim() != 1 || labels.size(0) != logits.size(0)) {
    throw ShapeError("cross_entropy expects logits (B, K) and labels (B)");
  }
  const auto lab = labels.to(torch::kLong);
  if (lab.numel() > 0 &&
      (lab.min().item<int64_t>() < 0 || lab.max().item<int64_t>() >= logits.size(1))) {
    throw LabelError("class label out of range [0, " + std::to_string(logits.size(1)) + ")");
  }
  return -torch::log_softmax(logits, 1).gather(1, lab.unsqueeze(1)).mean();
}

IdLoss id_loss(const torch::Tensor& fake_logits, const torch::Tensor& src_logits,
               const torch::Tensor& t1_logits, const torch::Tensor& t2_logits,
               const torch::Tensor& source_labels, const torch::Tensor& target_labels) {
  IdLoss out;
  out.fake_id = cross_entropy(fake_logits, target_labels);
  out.trg_id = cross_entropy(src_logits, source_labels) +
               cross_entropy(t1_logits, target_labels) +
               cross_entropy(t2_logits, target_labels);
  return out;
}

torch::Tensor style_consistency_loss(const torch::Tensor& target_style,
                                     const torch::Tensor& converted_style) {
  require_same_shape(target_style, converted_style, "style consistency");
  return (target_style - converted_style).abs().mean();
}

torch::Tensor content_consistency_loss(const torch::Tensor& source_content,
                                       const torch::Tensor& converted_content) {
  require_same_shape(source_content, converted_content, "content consistency");
  return (source_content - converted_content).abs().mean();
}

torch::Tensor style_diversification_loss(const torch::Tensor& g1,
                                         const torch::Tensor& g2) {
  require_same_shape(g1, g2, "style diversification");
  return -(g1 - g2).abs().mean();
}

torch::Tensor norm_consistency_loss(const torch::Tensor& source,
                                    const torch::Tensor& generated) {
  if (source.dim() < 2 || generated.dim() < 2 ||
      source.size(-1) != generated.size(-1)) {
    throw ShapeError("norm consistency: frame counts differ");
  }
  require_same_shape(source, generated, "norm consistency");
  return (column_norm(source) - column_norm(generated)).abs().mean();
}

torch::Tensor reconstruction_loss(const torch::Tensor& source,
                                  const torch::Tensor& reconstruction) {
  require_same_shape(source, reconstruction, "reconstruction");
  return (source - reconstruction).abs().mean();
}

GeneratorLossReport total_generator_objective(const LossComponents& c,
                                              const LossWeights& w) {
  const std::pair<const char*, double> parts[] = {
      {"adv", c.adv},         {"fake_id", c.fake_id}, {"trg_id", c.trg_id},
      {"style", c.style},     {"content", c.content}, {"ds", c.ds},
      {"norm", c.norm},       {"rec", c.rec}};
  for (const auto& [name, v] : parts) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite loss component '") + name + "'");
    }
  }
  GeneratorLossReport r;
  r.adv = c.adv;
  r.fake_id = c.fake_id;
  r.trg_id = c.trg_id;
  r.style = c.style;
  r.content = c.content;
  r.ds = c.ds;
  r.norm = c.norm;
  r.rec = c.rec;
  r.total = w.adv * c.adv + w.id * (c.fake_id + c.trg_id) + w.style * c.style +
            w.content * c.content + w.ds * c.ds + w.norm * c.norm + w.rec * c.rec;
  return r;
}

torch::Tensor LossTerms::weighted_total(const LossWeights& w) const {
  return w.adv * adv + w.id * (fake_id + trg_id) + w.style * style +
         w.content * content + w.ds * ds + w.norm * norm + w.rec * rec;
}

LossComponents LossTerms::values() const {
  auto v = [](const torch::Tensor& t) { return t.defined() ? t.item<double>() : 0.0; };
  return {v(adv), v(fake_id), v(trg_id), v(style), v(content), v(ds), v(norm), v(rec)};
}

}  // namespace sgvc
