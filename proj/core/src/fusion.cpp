#include "stagan/fusion.hpp"

#include "stagan/error.hpp"

namespace nn = torch::nn;

namespace stagan {

std::string to_string(FusionInput in) { return in == FusionInput::kFrames ? "frames" : "decoder_features"; }

FusionInput fusion_input_from_string(const std::string& s) {
  if (s == "frames") return FusionInput::kFrames;
  if (s == "decoder_features") return FusionInput::kDecoderFeatures;
  throw ConfigError("fusion_input must be 'frames' or 'decoder_features', got '" + s + "'");
}

void FusionConfig::validate() const {
  if (image_size < 2 || image_size % 2 != 0) throw ConfigError("fusion image_size must be even");
  if (feature_width < 1) throw ConfigError("fusion feature_width must be positive");
  if (in_channels < 1) throw ConfigError("fusion in_channels must be positive");
}

void to_json(nlohmann::json& j, const FusionConfig& c) {
  j = {{"image_size", c.image_size}, {"feature_width", c.feature_width}, {"input", to_string(c.input)},
       {"in_channels", c.in_channels}};
}

void from_json(const nlohmann::json& j, FusionConfig& c) {
  FusionConfig d;
  c.image_size = j.value("image_size", d.image_size);
  c.feature_width = j.value("feature_width", d.feature_width);
  c.input = fusion_input_from_string(j.value("input", to_string(d.input)));
  c.in_channels = j.value("in_channels", d.in_channels);
}

FusionNetImpl::FusionNetImpl(FusionConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const int fw = cfg_.feature_width;
  for (int k = 0; k < kFusionInputs; ++k) {
    stacks_[k] = register_module("conv" + std::to_string(k),
                                 nn::Conv2d(nn::Conv2dOptions(cfg_.in_channels, fw, 4).stride(2).padding(1)));
  }
  upsample_ = register_module(
      "deconv", nn::ConvTranspose2d(nn::ConvTranspose2dOptions(kFusionInputs * fw, fw, 4).stride(2).padding(1)));
  head_ = register_module("attention", nn::Conv2d(nn::Conv2dOptions(fw, kFusionInputs, 3).padding(1)));
}

torch::Tensor FusionNetImpl::attention_logits(const std::array<torch::Tensor, kFusionInputs>& inputs) {
  std::vector<torch::Tensor> feats;
  for (int k = 0; k < kFusionInputs; ++k) {
    const auto& in = inputs[k];
    if (in.dim() != 4 || in.sizes() != inputs[0].sizes() || in.size(1) != cfg_.in_channels ||
        in.size(2) != cfg_.image_size || in.size(3) != cfg_.image_size) {
      throw ShapeError("fusion inputs must be four equal [N, " + std::to_string(cfg_.in_channels) + ", " +
                       std::to_string(cfg_.image_size) + ", " + std::to_string(cfg_.image_size) + "] tensors");
    }
    feats.push_back(torch::relu(stacks_[k]->forward(in)));
  }
  const auto merged = torch::cat(feats, 1);
  const auto resized = torch::relu(upsample_->forward(merged));
  return head_->forward(resized);
}

torch::Tensor FusionNetImpl::attention(const std::array<torch::Tensor, kFusionInputs>& inputs) {
  return torch::softmax(attention_logits(inputs), 1);
}

FusionNet build_fusion_net(const FusionConfig& cfg, std::uint64_t seed) {
  FusionNet net(cfg);
  init_gan_weights(*net, seed);
  return net;
}

torch::Tensor combine_candidates(const torch::Tensor& candidates, const torch::Tensor& attention) {
  if (candidates.dim() != 5 || attention.dim() != 4 || candidates.size(1) != attention.size(1) ||
      candidates.size(0) != attention.size(0) || candidates.size(3) != attention.size(2) ||
      candidates.size(4) != attention.size(3)) {
    throw ShapeError("candidate and attention shapes disagree");
  }
  // sum_k a_k c_k written relative to c_0, so equal candidates reproduce c_0 bit-for-bit
  const auto base = candidates.select(1, 0);
  const auto deltas = candidates.narrow(1, 1, candidates.size(1) - 1) - base.unsqueeze(1);
  return base + (deltas * attention.narrow(1, 1, attention.size(1) - 1).unsqueeze(2)).sum(1);
}

FusionResult fuse(FusionNet& net, const GenerationBundle& bundle) {
  std::array<torch::Tensor, kFusionInputs> frames;
  std::array<torch::Tensor, kFusionInputs> inputs;
  for (int k = 0; k < kFusionInputs; ++k) {
    const auto& seq = bundle.at(kAllBranches[k]);
    frames[k] = seq.frames;
    if (k > 0 && seq.frames.sizes() != frames[0].sizes()) throw ShapeError("bundle sequences differ in shape");
    if (net->config().input == FusionInput::kDecoderFeatures) {
      if (!seq.features.defined()) throw ShapeError("fusion expects decoder features but the bundle has none");
      inputs[k] = seq.features;
    } else {
      inputs[k] = seq.frames;
    }
  }
  const auto b = frames[0].size(0);
  const auto t = frames[0].size(1);
  std::array<torch::Tensor, kFusionInputs> flat;
  for (int k = 0; k < kFusionInputs; ++k) flat[k] = inputs[k].flatten(0, 1);

  const auto attn = net->attention(flat);  // [B*T, 4, H, W]
  const auto candidates = torch::stack({frames[0], frames[1], frames[2], frames[3]}, 2).flatten(0, 1);
  const auto fused = combine_candidates(candidates, attn);

  FusionResult result;
  result.frames = fused.unflatten(0, {b, t});
  result.attention = attn.unflatten(0, {b, t});
  return result;
}

}  // namespace stagan
