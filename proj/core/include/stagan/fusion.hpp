#pragma once

// Multi-generation attention fusion.
//
// For every time step the four branch frames each pass through their own
// stride-2 convolution, the four feature maps are concatenated (F), a
// transposed convolution restores full resolution (F'), and a 3x3
// convolution followed by a channel softmax yields four attention maps.
// The fused frame is sum_k frame_k * a_k.

#include <array>
#include <string>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "stagan/branches.hpp"

namespace stagan {

inline constexpr int kFusionInputs = 4;

enum class FusionInput { kFrames, kDecoderFeatures };

std::string to_string(FusionInput in);
FusionInput fusion_input_from_string(const std::string& s);  // throws ConfigError

struct FusionConfig {
  int image_size = 64;
  int feature_width = 16;
  FusionInput input = FusionInput::kFrames;
  int in_channels = 3;  // 3 for frames, generator base_width for decoder features

  void validate() const;
};

void to_json(nlohmann::json& j, const FusionConfig& c);
void from_json(const nlohmann::json& j, FusionConfig& c);

class FusionNetImpl : public torch::nn::Module {
 public:
  explicit FusionNetImpl(FusionConfig cfg);

  // Attention logits [N, 4, H, W] from four [N, C, H, W] inputs.
  torch::Tensor attention_logits(const std::array<torch::Tensor, kFusionInputs>& inputs);
  // Softmax over the four logit channels.
  torch::Tensor attention(const std::array<torch::Tensor, kFusionInputs>& inputs);

  const FusionConfig& config() const noexcept { return cfg_; }

  torch::nn::Conv2d& stack(int k) { return stacks_.at(k); }
  torch::nn::ConvTranspose2d& upsample() { return upsample_; }
  torch::nn::Conv2d& head() { return head_; }

 private:
  FusionConfig cfg_;
  std::array<torch::nn::Conv2d, kFusionInputs> stacks_{nullptr, nullptr, nullptr, nullptr};
  torch::nn::ConvTranspose2d upsample_{nullptr};
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(FusionNet);

FusionNet build_fusion_net(const FusionConfig& cfg, std::uint64_t seed);

struct FusionResult {
  torch::Tensor frames;     // [B, T, 3, H, W]
  torch::Tensor attention;  // [B, T, 4, H, W]; channel k weights branch k in kAllBranches order
};

// Weighted sum of candidates [N, 4, 3, H, W] by attention [N, 4, H, W].
torch::Tensor combine_candidates(const torch::Tensor& candidates, const torch::Tensor& attention);

// Requires all four branches; throws ShapeError otherwise.
FusionResult fuse(FusionNet& net, const GenerationBundle& bundle);

}  // namespace stagan
