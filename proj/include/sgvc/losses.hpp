#pragma once

#include <torch/torch.h>

#include <string>

namespace sgvc {

struct LossWeights {
  double adv = 2.0;
  double id = 0.5;
  double style = 5.0;
  double content = 10.0;
  double ds = 1.0;
  double norm = 1.0;
  double rec = 5.0;

  /// Throws ConfigError if any weight is negative or non-finite.
  void validate() const;
};

/// Adversarial value: E[log sigmoid(real)] + E[log(1 - sigmoid(fake))], computed
/// with log-sigmoid. The discriminator maximizes it.
torch::Tensor adversarial_loss(const torch::Tensor& real_logit,
                               const torch::Tensor& fake_logit);

/// Generator-side adversarial term. The literal form is E[log(1 - sigmoid(fake))]
/// (to be minimized); the non-saturating form is -E[log sigmoid(fake)].
torch::Tensor generator_adversarial_loss(const torch::Tensor& fake_logit,
                                         bool non_saturating = false);

struct IdLoss {
  torch::Tensor fake_id;  // CE(fake, y_t)
  torch::Tensor trg_id;   // CE(src, y_s) + CE(t1, y_t) + CE(t2, y_t)
  torch::Tensor total() const { return fake_id + trg_id; }
};

/// Mean cross-entropy of class logits (B, K) against labels (B).
/// Throws LabelError for labels outside [0, K).
torch::Tensor cross_entropy(const torch::Tensor& logits, const torch::Tensor& labels);

IdLoss id_loss(const torch::Tensor& fake_logits, const torch::Tensor& src_logits,
               const torch::Tensor& t1_logits, const torch::Tensor& t2_logits,
               const torch::Tensor& source_labels, const torch::Tensor& target_labels);

/// Mean absolute difference between two style codes.
torch::Tensor style_consistency_loss(const torch::Tensor& target_style,
                                     const torch::Tensor& converted_style);

/// Mean absolute difference between two content features.
torch::Tensor content_consistency_loss(const torch::Tensor& source_content,
                                       const torch::Tensor& converted_content);

/// -mean|g1 - g2|; minimizing it pushes the two conversions apart.
torch::Tensor style_diversification_loss(const torch::Tensor& g1,
                                         const torch::Tensor& g2);

/// Mean over frames of | ||x[m]||_1 - ||g[m]||_1 |, column norms taken over
/// the row (frequency) axis. Throws ShapeError on a width mismatch.
torch::Tensor norm_consistency_loss(const torch::Tensor& source,
                                    const torch::Tensor& generated);

/// Mean absolute error between source and self-reconstruction.
torch::Tensor reconstruction_loss(const torch::Tensor& source,
                                  const torch::Tensor& reconstruction);

/// Scalar loss components of the full generator objective.
struct LossComponents {
  double adv = 0, fake_id = 0, trg_id = 0, style = 0, content = 0, ds = 0,
         norm = 0, rec = 0;
};

struct GeneratorLossReport {
  double adv = 0, fake_id = 0, trg_id = 0, style = 0, content = 0, ds = 0,
         norm = 0, rec = 0, total = 0;
};

/// total = adv*L_adv + id*(L_fake_id + L_trg_id) + style*L_style +
/// content*L_content + ds*L_ds + norm*L_norm + rec*L_rec.
/// Throws NumericError naming the first non-finite component.
GeneratorLossReport total_generator_objective(const LossComponents& c,
                                              const LossWeights& w);

/// Tensor-valued components for the backward pass.
struct LossTerms {
  torch::Tensor adv, fake_id, trg_id, style, content, ds, norm, rec;

  torch::Tensor weighted_total(const LossWeights& w) const;
  LossComponents values() const;
};

}  // namespace sgvc
