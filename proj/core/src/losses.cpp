#include "stagan/losses.hpp"

#include <algorithm>
#include <cmath>

#include "stagan/error.hpp"

namespace F = torch::nn::functional;

namespace stagan {

namespace {

void check_sequences(const torch::Tensor& x, const torch::Tensor& y, const torch::Tensor& seq) {
  if (x.dim() != 5 || x.sizes() != y.sizes() || y.sizes() != seq.sizes()) {
    throw ShapeError("loss inputs must be equal-shape [B, T, C, H, W] sequences");
  }
}

}  // namespace

void LossWeights::validate() const {
  for (double v : {lambda_u, lambda_d, lambda_n, lambda_p, lambda_g, lambda_r}) {
    if (!std::isfinite(v) || v < 0) throw ConfigError("loss weights must be finite and non-negative");
  }
  if (time_truncate < 1) throw ConfigError("time_truncate must be at least 1");
}

double LossWeights::branch_weight(Branch b) const {
  switch (b) {
    case Branch::kTemporalDown: return lambda_u;
    case Branch::kTemporalUp: return lambda_d;
    case Branch::kSpatialDown: return lambda_n;
    case Branch::kSpatialUp: return lambda_p;
  }
  return 0.0;
}

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = {{"lambda_u", w.lambda_u}, {"lambda_d", w.lambda_d}, {"lambda_n", w.lambda_n}, {"lambda_p", w.lambda_p},
       {"lambda_g", w.lambda_g}, {"lambda_r", w.lambda_r}, {"time_truncate", w.time_truncate}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
  LossWeights d;
  w.lambda_u = j.value("lambda_u", d.lambda_u);
  w.lambda_d = j.value("lambda_d", d.lambda_d);
  w.lambda_n = j.value("lambda_n", d.lambda_n);
  w.lambda_p = j.value("lambda_p", d.lambda_p);
  w.lambda_g = j.value("lambda_g", d.lambda_g);
  w.lambda_r = j.value("lambda_r", d.lambda_r);
  w.time_truncate = j.value("time_truncate", d.time_truncate);
}

SpatialCritic as_spatial_critic(PatchDiscriminator d) {
  return [d](const torch::Tensor& x, const torch::Tensor& y) mutable { return discriminator_forward_spatial(d, x, y); };
}

TemporalCritic as_temporal_critic(PatchDiscriminator d) {
  return [d](const torch::Tensor& anchor, const torch::Tensor& seq) mutable {
    return discriminator_forward_temporal(d, anchor, seq);
  };
}

torch::Tensor mean_abs_error(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.sizes() != b.sizes()) throw ShapeError("mean_abs_error operands differ in shape");
  return (a - b).abs().mean();
}

torch::Tensor sequence_l1(const torch::Tensor& y, const torch::Tensor& y_hat) {
  if (y.dim() < 2 || y.sizes() != y_hat.sizes()) throw ShapeError("sequence_l1 operands differ in shape");
  // mean over everything but time, then sum over time
  const auto per_frame = (y - y_hat).abs().transpose(0, 1).flatten(1).mean(1);
  return per_frame.sum();
}

torch::Tensor bce_with_logits(const torch::Tensor& logits, double target) {
  return F::binary_cross_entropy_with_logits(logits, torch::full_like(logits, target));
}

torch::Tensor generator_adversarial_term(const torch::Tensor& fake_logits, AdversarialForm form) {
  if (form == AdversarialForm::kNonSaturating) return bce_with_logits(fake_logits, 1.0);
  // log(1 - sigmoid(l)) = -softplus(l)
  return -F::softplus(fake_logits).mean();
}

std::int64_t conditioning_index(Branch b, std::int64_t t, std::int64_t length, int time_truncate) {
  switch (b) {
    case Branch::kSpatialDown: return std::clamp<std::int64_t>(t - time_truncate, 0, length - 1);
    case Branch::kSpatialUp: return std::clamp<std::int64_t>(t + time_truncate, 0, length - 1);
    default: return t;
  }
}

namespace {

// Every time step has the same number of logits, so a per-step mean summed
// over time equals T times the mean over the flattened [B * T] batch; the
// terms below exploit that to run one critic pass per sequence.
torch::Tensor conditioning_frames(Branch b, const torch::Tensor& x, int time_truncate) {
  const auto n = x.size(1);
  std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
  for (std::int64_t t = 0; t < n; ++t) idx[static_cast<std::size_t>(t)] = conditioning_index(b, t, n, time_truncate);
  return x.index_select(1, torch::tensor(idx, torch::kLong));
}

}  // namespace

torch::Tensor branch_generator_loss(Branch b, const SpatialCritic& d_s, const torch::Tensor& x, const torch::Tensor& y,
                                    const torch::Tensor& seq, const LossWeights& w, AdversarialForm form) {
  check_sequences(x, y, seq);
  const auto n = seq.size(1);
  const auto cond = conditioning_frames(b, x, w.time_truncate);
  const auto adv = static_cast<double>(n) * generator_adversarial_term(d_s(cond.flatten(0, 1), seq.flatten(0, 1)), form);
  return w.branch_weight(b) * (sequence_l1(y, seq) + adv);
}

torch::Tensor branch_discriminator_loss(Branch b, const SpatialCritic& d_s, const torch::Tensor& x,
                                        const torch::Tensor& y, const torch::Tensor& seq, const LossWeights& w) {
  check_sequences(x, y, seq);
  const auto n = static_cast<double>(seq.size(1));
  const auto cond = conditioning_frames(b, x, w.time_truncate).flatten(0, 1);
  const auto real = bce_with_logits(d_s(cond, y.flatten(0, 1)), 1.0);
  const auto fake = bce_with_logits(d_s(cond, seq.detach().flatten(0, 1)), 0.0);
  return w.branch_weight(b) * n * (real + fake);
}

DirectionalLoss temporal_loss(const SpatialCritic& d_s, const torch::Tensor& x, const torch::Tensor& y,
                              const GeneratedSequence& y1, const GeneratedSequence& y2, const LossWeights& w,
                              AdversarialForm form) {
  DirectionalLoss out;
  out.down = branch_generator_loss(Branch::kTemporalDown, d_s, x, y, y1.frames, w, form);
  out.up = branch_generator_loss(Branch::kTemporalUp, d_s, x, y, y2.frames, w, form);
  out.total = out.down + out.up;
  return out;
}

DirectionalLoss spatial_loss(const SpatialCritic& d_s, const torch::Tensor& x, const torch::Tensor& y,
                             const GeneratedSequence& y3, const GeneratedSequence& y4, const LossWeights& w,
                             AdversarialForm form) {
  DirectionalLoss out;
  out.down = branch_generator_loss(Branch::kSpatialDown, d_s, x, y, y3.frames, w, form);
  out.up = branch_generator_loss(Branch::kSpatialUp, d_s, x, y, y4.frames, w, form);
  out.total = out.down + out.up;
  return out;
}

AdversarialLosses adversarial_generator_terms(const SpatialCritic& d_s, const TemporalCritic& d_t,
                                              const torch::Tensor& x, const torch::Tensor& y,
                                              const torch::Tensor& y_hat, const LossWeights& w, AdversarialForm form) {
  check_sequences(x, y, y_hat);
  const auto n = y_hat.size(1);
  AdversarialLosses out;
  out.gen_spatial =
      static_cast<double>(n) * generator_adversarial_term(d_s(x.flatten(0, 1), y_hat.flatten(0, 1)), form);
  out.gen_total = out.gen_spatial;
  if (d_t) {
    out.gen_temporal = w.lambda_g * (generator_adversarial_term(d_t(x.select(1, 0), y_hat), form) +
                                     generator_adversarial_term(d_t(x.select(1, n - 1), y_hat), form));
    out.gen_total = out.gen_total + out.gen_temporal;
  }
  return out;
}

AdversarialLosses adversarial_discriminator_terms(const SpatialCritic& d_s, const TemporalCritic& d_t,
                                                  const torch::Tensor& x, const torch::Tensor& y,
                                                  const torch::Tensor& y_hat, const LossWeights& w) {
  check_sequences(x, y, y_hat);
  const auto n = y_hat.size(1);
  const auto fakes = y_hat.detach();
  AdversarialLosses out;
  const auto xf = x.flatten(0, 1);
  out.d_spatial = static_cast<double>(n) * (bce_with_logits(d_s(xf, y.flatten(0, 1)), 1.0) +
                                            bce_with_logits(d_s(xf, fakes.flatten(0, 1)), 0.0));
  if (d_t) {
    const auto first = x.select(1, 0);
    const auto last = x.select(1, n - 1);
    out.d_temporal = w.lambda_g * (bce_with_logits(d_t(first, y), 1.0) + bce_with_logits(d_t(first, fakes), 0.0) +
                                   bce_with_logits(d_t(last, y), 1.0) + bce_with_logits(d_t(last, fakes), 0.0));
  }
  return out;
}

AdversarialLosses adversarial_losses(const SpatialCritic& d_s, const TemporalCritic& d_t, const torch::Tensor& x,
                                     const torch::Tensor& y, const torch::Tensor& y_hat, const LossWeights& w,
                                     AdversarialForm form) {
  auto out = adversarial_generator_terms(d_s, d_t, x, y, y_hat, w, form);
  const auto d = adversarial_discriminator_terms(d_s, d_t, x, y, y_hat, w);
  out.d_spatial = d.d_spatial;
  out.d_temporal = d.d_temporal;
  return out;
}

torch::Tensor reconstruction_loss(const torch::Tensor& y, const torch::Tensor& y_hat, double lambda_r) {
  return lambda_r * sequence_l1(y, y_hat);
}

nlohmann::json LossReport::to_json() const {
  nlohmann::json j;
  auto put = [&](const char* name, const std::optional<double>& v) {
    if (v) j[name] = *v;
  };
  put("temporal_down", temporal_down);
  put("temporal_up", temporal_up);
  put("spatial_down", spatial_down);
  put("spatial_up", spatial_up);
  put("adv_spatial", adv_spatial);
  put("adv_temporal", adv_temporal);
  put("reconstruction", reconstruction);
  j["total"] = total;
  put("d_spatial", d_spatial);
  put("d_temporal", d_temporal);
  return j;
}

LossReport LossReport::from_json(const nlohmann::json& j) {
  LossReport r;
  auto get = [&](const char* name, std::optional<double>& v) {
    if (j.contains(name)) v = j.at(name).get<double>();
  };
  get("temporal_down", r.temporal_down);
  get("temporal_up", r.temporal_up);
  get("spatial_down", r.spatial_down);
  get("spatial_up", r.spatial_up);
  get("adv_spatial", r.adv_spatial);
  get("adv_temporal", r.adv_temporal);
  get("reconstruction", r.reconstruction);
  r.total = j.value("total", 0.0);
  get("d_spatial", r.d_spatial);
  get("d_temporal", r.d_temporal);
  return r;
}

TotalLoss total_generator_loss(const GeneratorLossParts& parts) {
  TotalLoss out;
  torch::Tensor total;
  auto add = [&](const char* name, const torch::Tensor& term, std::optional<double>& slot) {
    if (!term.defined()) return;
    const double v = term.item<double>();
    if (!std::isfinite(v)) throw NumericError("non-finite generator loss term", name);
    slot = v;
    total = total.defined() ? total + term : term;
  };
  auto& r = out.report;
  add("adv_spatial", parts.adv_spatial, r.adv_spatial);
  add("adv_temporal", parts.adv_temporal, r.adv_temporal);
  add("reconstruction", parts.reconstruction, r.reconstruction);
  add("temporal_down", parts.temporal_down, r.temporal_down);
  add("temporal_up", parts.temporal_up, r.temporal_up);
  add("spatial_down", parts.spatial_down, r.spatial_down);
  add("spatial_up", parts.spatial_up, r.spatial_up);
  if (!total.defined()) throw NumericError("generator loss has no active terms", "total");
  out.value = total;
  r.total = total.item<double>();
  if (!std::isfinite(r.total)) throw NumericError("non-finite generator loss", "total");
  return out;
}

}  // namespace stagan
