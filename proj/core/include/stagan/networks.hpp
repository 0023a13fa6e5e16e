#pragma once

// Trainable networks: the shared U-Net generator and the PatchGAN
// discriminators used for the spatial (frame pair) and temporal
// (anchor + whole sequence) judgements.

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

namespace stagan {

struct GeneratorConfig {
  int image_size = 64;
  int depth = 6;
  int base_width = 32;
  int in_channels = 6;  // frame (3) + semantic map (3)
  int out_channels = 3;

  static GeneratorConfig desk() { return {}; }
  static GeneratorConfig full_scale() { return {256, 8, 64, 6, 3}; }

  // Throws ConfigError.
  void validate() const;
  // Channel count of encoder level k.
  int width_at(int level) const;
};

void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);

struct GeneratorOutput {
  torch::Tensor image;                 // [B, 3, H, W], tanh range
  std::vector<torch::Tensor> features;  // decoder activations, coarse to fine; last is [B, base_width, H, W]
};

// Encoder-decoder with skip connections from every down-sampling level to the
// mirrored up-sampling level.
class UNetGeneratorImpl : public torch::nn::Module {
 public:
  explicit UNetGeneratorImpl(GeneratorConfig cfg);

  // Throws ShapeError when frame and semantic map disagree or mismatch the configured size.
  GeneratorOutput forward(const torch::Tensor& frame, const torch::Tensor& sem);

  const GeneratorConfig& config() const noexcept { return cfg_; }

 private:
  GeneratorConfig cfg_;
  std::vector<torch::nn::Sequential> down_;
  std::vector<torch::nn::Sequential> up_;
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(UNetGenerator);

struct DiscriminatorConfig {
  int in_channels = 6;
  int base_width = 64;
  int n_downsample = 3;  // stride-2 convolutions before the two stride-1 layers

  void validate(int image_size) const;
};

void to_json(nlohmann::json& j, const DiscriminatorConfig& c);
void from_json(const nlohmann::json& j, DiscriminatorConfig& c);

// Side length of the logit grid for a square input.
int patch_grid_size(int image_size, int n_downsample);

// Conditional PatchGAN: raw logits on a grid, no pooling.
class PatchDiscriminatorImpl : public torch::nn::Module {
 public:
  explicit PatchDiscriminatorImpl(DiscriminatorConfig cfg);
  torch::Tensor forward(const torch::Tensor& input);
  const DiscriminatorConfig& config() const noexcept { return cfg_; }

 private:
  DiscriminatorConfig cfg_;
  torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(PatchDiscriminator);

// Seeded N(0, 0.02) initialisation; identical (cfg, seed) gives identical parameters.
UNetGenerator build_generator(const GeneratorConfig& cfg, std::uint64_t init_seed);
PatchDiscriminator build_spatial_discriminator(const DiscriminatorConfig& cfg, int image_size,
                                               std::uint64_t init_seed);
// in_channels is forced to 3 * (clip_length + 1).
PatchDiscriminator build_temporal_discriminator(DiscriminatorConfig cfg, int clip_length, int image_size,
                                                std::uint64_t init_seed);

// Conv and linear weights ~ N(0, 0.02), norm scales ~ N(1, 0.02), biases zero.
void init_gan_weights(torch::nn::Module& module, std::uint64_t seed);

GeneratorOutput generator_forward(UNetGenerator& g, const torch::Tensor& frame, const torch::Tensor& sem);

// D_S on x_t (+) y_t, both [B, 3, H, W].
torch::Tensor discriminator_forward_spatial(PatchDiscriminator& d, const torch::Tensor& x_frame,
                                            const torch::Tensor& y_frame);
// D_T on anchor (+) seq, anchor [B, 3, H, W], seq [B, T, 3, H, W].
torch::Tensor discriminator_forward_temporal(PatchDiscriminator& d, const torch::Tensor& anchor,
                                             const torch::Tensor& seq);

}  // namespace stagan
