#pragma once

// Loss terms for the branch schedules, the dual discriminator and the
// reconstruction objective, plus their combination into the generator total.
//
// Conventions: every per-frame pixel loss is a mean over batch and pixels and
// is summed over time; every patch-discriminator term is binary cross-entropy
// on logits, averaged over the batch and the logit grid.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "stagan/branches.hpp"
#include "stagan/networks.hpp"

namespace stagan {

struct LossWeights {
  double lambda_u = 1.0;   // temporal downstream
  double lambda_d = 0.1;   // temporal upstream
  double lambda_n = 1.0;   // spatial downstream
  double lambda_p = 0.1;   // spatial upstream
  double lambda_g = 10.0;  // temporal adversarial
  double lambda_r = 10.0;  // reconstruction
  int time_truncate = 3;

  void validate() const;  // throws ConfigError
  double branch_weight(Branch b) const;
};

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);

// Generator-side adversarial surrogate.
enum class AdversarialForm {
  kNonSaturating,  // -log D(fake)
  kMinimax,        // log(1 - D(fake))
};

// Critics map conditioning + candidate to a logit grid. Stubs are plain lambdas.
using SpatialCritic = std::function<torch::Tensor(const torch::Tensor& x_frame, const torch::Tensor& y_frame)>;
using TemporalCritic = std::function<torch::Tensor(const torch::Tensor& anchor, const torch::Tensor& seq)>;

SpatialCritic as_spatial_critic(PatchDiscriminator d);
TemporalCritic as_temporal_critic(PatchDiscriminator d);

torch::Tensor mean_abs_error(const torch::Tensor& a, const torch::Tensor& b);
// sum_t mean|y_t - yhat_t| over [B, T, ...] sequences.
torch::Tensor sequence_l1(const torch::Tensor& y, const torch::Tensor& y_hat);

torch::Tensor bce_with_logits(const torch::Tensor& logits, double target);
torch::Tensor generator_adversarial_term(const torch::Tensor& fake_logits, AdversarialForm form);

// 0-based index of the real frame that conditions the discriminator for the
// loss on output frame `t`. Temporal branches use t itself; the spatial
// branches use t - i (down) and t + i (up), clamped to [0, length - 1].
std::int64_t conditioning_index(Branch b, std::int64_t t, std::int64_t length, int time_truncate);

// weight_b * sum_t [ |y_t - seq_t|_1 + adv(D_S(x_c(t), seq_t)) ]
torch::Tensor branch_generator_loss(Branch b, const SpatialCritic& d_s, const torch::Tensor& x, const torch::Tensor& y,
                                    const torch::Tensor& seq, const LossWeights& w,
                                    AdversarialForm form = AdversarialForm::kNonSaturating);

// weight_b * sum_t [ bce(D_S(x_c(t), y_t), 1) + bce(D_S(x_c(t), seq_t), 0) ], seq detached.
torch::Tensor branch_discriminator_loss(Branch b, const SpatialCritic& d_s, const torch::Tensor& x,
                                        const torch::Tensor& y, const torch::Tensor& seq, const LossWeights& w);

struct DirectionalLoss {
  torch::Tensor down;
  torch::Tensor up;
  torch::Tensor total;
};

DirectionalLoss temporal_loss(const SpatialCritic& d_s, const torch::Tensor& x, const torch::Tensor& y,
                              const GeneratedSequence& y1, const GeneratedSequence& y2, const LossWeights& w,
                              AdversarialForm form = AdversarialForm::kNonSaturating);

DirectionalLoss spatial_loss(const SpatialCritic& d_s, const torch::Tensor& x, const torch::Tensor& y,
                             const GeneratedSequence& y3, const GeneratedSequence& y4, const LossWeights& w,
                             AdversarialForm form = AdversarialForm::kNonSaturating);

struct AdversarialLosses {
  torch::Tensor gen_spatial;   // sum_t adv(D_S(x_t, yhat_t))
  torch::Tensor gen_temporal;  // lambda_g * [adv(D_T(x_1, yhat)) + adv(D_T(x_T, yhat))]; undefined without D_T
  torch::Tensor gen_total;
  torch::Tensor d_spatial;
  torch::Tensor d_temporal;  // undefined without D_T
};

// `d_t` may be empty (no temporal discriminator). Fakes are detached for the
// discriminator-side terms.
AdversarialLosses adversarial_losses(const SpatialCritic& d_s, const TemporalCritic& d_t, const torch::Tensor& x,
                                     const torch::Tensor& y, const torch::Tensor& y_hat, const LossWeights& w,
                                     AdversarialForm form = AdversarialForm::kNonSaturating);

// The generator-side (gen_*) and discriminator-side (d_*) halves of adversarial_losses.
AdversarialLosses adversarial_generator_terms(const SpatialCritic& d_s, const TemporalCritic& d_t,
                                              const torch::Tensor& x, const torch::Tensor& y,
                                              const torch::Tensor& y_hat, const LossWeights& w,
                                              AdversarialForm form = AdversarialForm::kNonSaturating);
AdversarialLosses adversarial_discriminator_terms(const SpatialCritic& d_s, const TemporalCritic& d_t,
                                                  const torch::Tensor& x, const torch::Tensor& y,
                                                  const torch::Tensor& y_hat, const LossWeights& w);

// lambda_r * sum_t mean|y_t - yhat_t|
torch::Tensor reconstruction_loss(const torch::Tensor& y, const torch::Tensor& y_hat, double lambda_r);

// Individually weighted generator-side terms; undefined tensors are disabled.
struct GeneratorLossParts {
  torch::Tensor temporal_down, temporal_up;
  torch::Tensor spatial_down, spatial_up;
  torch::Tensor adv_spatial, adv_temporal;
  torch::Tensor reconstruction;
};

struct LossReport {
  std::optional<double> temporal_down, temporal_up, spatial_down, spatial_up;
  std::optional<double> adv_spatial, adv_temporal, reconstruction;
  double total = 0.0;
  std::optional<double> d_spatial, d_temporal;

  // Present terms only.
  nlohmann::json to_json() const;
  static LossReport from_json(const nlohmann::json& j);
};

struct TotalLoss {
  torch::Tensor value;
  LossReport report;
};

// Adversarial + reconstruction + temporal + spatial. Throws NumericError
// naming the first non-finite term.
TotalLoss total_generator_loss(const GeneratorLossParts& parts);

}  // namespace stagan
