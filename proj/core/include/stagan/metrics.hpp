#pragma once

// Evaluation metrics. Pixel metrics operate in metric space: [C, H, W]
// tensors with values in [0, 1] (see to_metric_space). PSNR and sharpness
// difference are capped at kDecibelCap for identical inputs.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "stagan/clip.hpp"

namespace stagan {

inline constexpr double kDecibelCap = 100.0;
inline constexpr double kKlEpsilon = 1e-8;

// [-1, 1] -> [0, 1]
torch::Tensor to_metric_space(const torch::Tensor& pixels);

// 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, L = 1, valid
// windows only, averaged over channels and window positions. Images smaller
// than 11 pixels use the largest odd window that fits.
double ssim(const torch::Tensor& a, const torch::Tensor& b);
double psnr(const torch::Tensor& a, const torch::Tensor& b);
// 10 log10(1 / mean|(gh(a) + gv(a)) - (gh(b) + gv(b))|) with absolute forward
// differences gh (width) and gv (height) on the common (H-1) x (W-1) grid.
double sharpness_difference(const torch::Tensor& a, const torch::Tensor& b);

// KL(p || q) with log arguments floored at kKlEpsilon.
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);
// Per-pair KL over rows of [N, C] probability matrices; (mean, population std).
std::pair<double, double> kl_score(const torch::Tensor& gen_probs, const torch::Tensor& real_probs);

// Frechet distance between Gaussian fits of [N, D] feature sets (unbiased covariance).
double fid(const torch::Tensor& gen_features, const torch::Tensor& real_features);

struct TopKAccuracy {
  double all = 0.0;                 // percent over every frame
  std::optional<double> confident;  // percent over frames whose real image top-1 confidence exceeds 0.5
};

TopKAccuracy topk_accuracy(const torch::Tensor& gen_probs, const torch::Tensor& labels,
                           const torch::Tensor& real_probs, int k);

// Small convolutional classifier standing in for the pretrained recognition
// network behind KL, FID and top-k.
class EmbeddingModelImpl : public torch::nn::Module {
 public:
  explicit EmbeddingModelImpl(int n_classes = 8, int width = 16);

  torch::Tensor features(const torch::Tensor& frames);  // [N, 4 * width]
  torch::Tensor logits(const torch::Tensor& frames);
  torch::Tensor probabilities(const torch::Tensor& frames);
  int n_classes() const noexcept { return n_classes_; }

 private:
  int n_classes_;
  torch::nn::Sequential body_{nullptr};
  torch::nn::Linear classifier_{nullptr};
};
TORCH_MODULE(EmbeddingModel);

struct EmbeddingTrainOptions {
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

// Trains on normalized frames [N, 3, H, W] with integer labels [N]. Deterministic given the seed.
EmbeddingModel train_embedding_model(const torch::Tensor& frames, const torch::Tensor& labels, int n_classes,
                                     const EmbeddingTrainOptions& opts = {});

// Real ego frames and their dominant-class labels from a set of samples.
std::pair<torch::Tensor, torch::Tensor> labelled_ego_frames(const std::vector<PairedSample>& samples);

struct MetricsReport {
  double ssim = 0, psnr = 0, sd = 0;
  double kl_mean = 0, kl_std = 0;
  double fid = 0;
  double top1_all = 0, top5_all = 0;
  std::optional<double> top1_conf, top5_conf;
  std::int64_t frames = 0;

  nlohmann::json to_json() const;
  // Table layout: SSIM PSNR SD KL FID Top-1 (all/conf) Top-5 (all/conf).
  std::string format_table(const std::string& label) const;
};

// Produces the synthesized ego clip for one sample.
using SynthesisFn = std::function<Clip(const PairedSample&)>;

MetricsReport evaluate_dataset(const SynthesisFn& synthesize, const std::vector<PairedSample>& samples,
                               EmbeddingModel& model);

}  // namespace stagan
