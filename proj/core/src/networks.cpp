#include "stagan/networks.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include "stagan/error.hpp"

namespace nn = torch::nn;

namespace stagan {

namespace {

nn::Conv2d conv(int in, int out, int kernel, int stride, int pad, bool bias = true) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, kernel).stride(stride).padding(pad).bias(bias));
}

nn::ConvTranspose2d deconv(int in, int out) {
  return nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, out, 4).stride(2).padding(1));
}

nn::InstanceNorm2d inorm(int channels) { return nn::InstanceNorm2d(nn::InstanceNorm2dOptions(channels).affine(true)); }

std::string dims(const torch::Tensor& t) {
  std::string s = "[";
  for (int64_t i = 0; i < t.dim(); ++i) s += (i ? ", " : "") + std::to_string(t.size(i));
  return s + "]";
}

}  // namespace

void GeneratorConfig::validate() const {
  if (depth < 2 || depth > 12) throw ConfigError("generator depth must be in [2, 12]");
  if (base_width < 8) throw ConfigError("generator base_width must be at least 8");
  if (image_size < (1 << depth) || image_size % (1 << depth) != 0) {
    throw ConfigError("image_size " + std::to_string(image_size) + " is not divisible by 2^depth = " +
                      std::to_string(1 << depth));
  }
  if (in_channels < 1 || out_channels < 1) throw ConfigError("generator channel counts must be positive");
}

int GeneratorConfig::width_at(int level) const { return base_width * std::min(1 << level, 8); }

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  j = {{"image_size", c.image_size}, {"depth", c.depth}, {"base_width", c.base_width},
       {"in_channels", c.in_channels}, {"out_channels", c.out_channels}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  GeneratorConfig d;
  c.image_size = j.value("image_size", d.image_size);
  c.depth = j.value("depth", d.depth);
  c.base_width = j.value("base_width", d.base_width);
  c.in_channels = j.value("in_channels", d.in_channels);
  c.out_channels = j.value("out_channels", d.out_channels);
}

UNetGeneratorImpl::UNetGeneratorImpl(GeneratorConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const int d = cfg_.depth;

  for (int k = 0; k < d; ++k) {
    nn::Sequential block;
    const int in = k == 0 ? cfg_.in_channels : cfg_.width_at(k - 1);
    block->push_back(conv(in, cfg_.width_at(k), 4, 2, 1));
    // No normalisation on the outermost level or the bottleneck.
    if (k != 0 && k != d - 1) block->push_back(inorm(cfg_.width_at(k)));
    block->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
    down_.push_back(register_module("down" + std::to_string(k), block));
  }

  for (int j = 0; j < d; ++j) {
    const int level = d - 1 - j;  // encoder level feeding this stage
    const int in = j == 0 ? cfg_.width_at(level) : 2 * cfg_.width_at(level);
    const int out = level == 0 ? cfg_.base_width : cfg_.width_at(level - 1);
    nn::Sequential block(deconv(in, out), inorm(out), nn::ReLU());
    up_.push_back(register_module("up" + std::to_string(j), block));
  }

  head_ = register_module("head", conv(cfg_.base_width, cfg_.out_channels, 3, 1, 1));
}

GeneratorOutput UNetGeneratorImpl::forward(const torch::Tensor& frame, const torch::Tensor& sem) {
  if (frame.dim() != 4 || sem.dim() != 4 || frame.sizes() != sem.sizes()) {
    throw ShapeError("generator inputs disagree: frame " + dims(frame) + " vs sem " + dims(sem));
  }
  if (frame.size(2) != cfg_.image_size || frame.size(3) != cfg_.image_size ||
      frame.size(1) + sem.size(1) != cfg_.in_channels) {
    throw ShapeError("generator input " + dims(frame) + " does not match configured size " +
                     std::to_string(cfg_.image_size));
  }

  std::vector<torch::Tensor> skips;
  torch::Tensor h = torch::cat({frame, sem}, 1);
  for (auto& block : down_) {
    h = block->forward(h);
    skips.push_back(h);
  }

  GeneratorOutput out;
  const int d = cfg_.depth;
  for (int j = 0; j < d; ++j) {
    h = up_[j]->forward(h);
    out.features.push_back(h);
    const int skip_level = d - 2 - j;
    if (skip_level >= 0) h = torch::cat({h, skips[skip_level]}, 1);
  }
  out.image = torch::tanh(head_->forward(h));
  return out;
}

void DiscriminatorConfig::validate(int image_size) const {
  if (in_channels < 1) throw ConfigError("discriminator in_channels must be positive");
  if (base_width < 1) throw ConfigError("discriminator base_width must be positive");
  if (n_downsample < 1) throw ConfigError("discriminator needs at least one down-sampling layer");
  if (patch_grid_size(image_size, n_downsample) < 1) {
    throw ConfigError("image_size " + std::to_string(image_size) + " too small for " +
                      std::to_string(n_downsample) + " down-sampling layers");
  }
}

void to_json(nlohmann::json& j, const DiscriminatorConfig& c) {
  j = {{"in_channels", c.in_channels}, {"base_width", c.base_width}, {"n_downsample", c.n_downsample}};
}

void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
  DiscriminatorConfig d;
  c.in_channels = j.value("in_channels", d.in_channels);
  c.base_width = j.value("base_width", d.base_width);
  c.n_downsample = j.value("n_downsample", d.n_downsample);
}

int patch_grid_size(int image_size, int n_downsample) {
  int s = image_size;
  for (int k = 0; k < n_downsample; ++k) s = (s + 2 - 4) / 2 + 1;
  // two 4x4, stride-1, pad-1 layers each shrink the map by one
  return s - 2;
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(DiscriminatorConfig cfg) : cfg_(cfg) {
  auto width = [&](int k) { return cfg_.base_width * std::min(1 << k, 8); };
  nn::Sequential body;
  body->push_back(conv(cfg_.in_channels, width(0), 4, 2, 1));
  body->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
  for (int k = 1; k < cfg_.n_downsample; ++k) {
    body->push_back(conv(width(k - 1), width(k), 4, 2, 1));
    body->push_back(inorm(width(k)));
    body->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
  }
  const int last = cfg_.n_downsample;
  body->push_back(conv(width(last - 1), width(last), 4, 1, 1));
  body->push_back(inorm(width(last)));
  body->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
  body->push_back(conv(width(last), 1, 4, 1, 1));
  body_ = register_module("body", body);
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& input) {
  if (input.dim() != 4 || input.size(1) != cfg_.in_channels) {
    throw ShapeError("discriminator expects " + std::to_string(cfg_.in_channels) + " channels, got " + dims(input));
  }
  return body_->forward(input);
}

void init_gan_weights(nn::Module& module, std::uint64_t seed) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  torch::NoGradGuard no_grad;
  for (const auto& m : module.modules(/*include_self=*/true)) {
    if (auto* c = m->as<nn::Conv2d>()) {
      c->weight.normal_(0.0, 0.02, gen);
      if (c->bias.defined()) c->bias.zero_();
    } else if (auto* t = m->as<nn::ConvTranspose2d>()) {
      t->weight.normal_(0.0, 0.02, gen);
      if (t->bias.defined()) t->bias.zero_();
    } else if (auto* l = m->as<nn::Linear>()) {
      l->weight.normal_(0.0, 0.02, gen);
      if (l->bias.defined()) l->bias.zero_();
    } else if (auto* n = m->as<nn::InstanceNorm2d>()) {
      if (n->weight.defined()) n->weight.normal_(1.0, 0.02, gen);
      if (n->bias.defined()) n->bias.zero_();
    }
  }
}

UNetGenerator build_generator(const GeneratorConfig& cfg, std::uint64_t init_seed) {
  UNetGenerator g(cfg);
  init_gan_weights(*g, init_seed);
  return g;
}

PatchDiscriminator build_spatial_discriminator(const DiscriminatorConfig& cfg, int image_size,
                                               std::uint64_t init_seed) {
  cfg.validate(image_size);
  PatchDiscriminator d(cfg);
  init_gan_weights(*d, init_seed);
  return d;
}

PatchDiscriminator build_temporal_discriminator(DiscriminatorConfig cfg, int clip_length, int image_size,
                                                std::uint64_t init_seed) {
  if (clip_length < 1) throw ConfigError("clip_length must be positive");
  cfg.in_channels = 3 * (clip_length + 1);
  return build_spatial_discriminator(cfg, image_size, init_seed);
}

GeneratorOutput generator_forward(UNetGenerator& g, const torch::Tensor& frame, const torch::Tensor& sem) {
  return g->forward(frame, sem);
}

torch::Tensor discriminator_forward_spatial(PatchDiscriminator& d, const torch::Tensor& x_frame,
                                            const torch::Tensor& y_frame) {
  if (x_frame.dim() != 4 || x_frame.sizes() != y_frame.sizes()) {
    throw ShapeError("spatial discriminator inputs disagree: " + dims(x_frame) + " vs " + dims(y_frame));
  }
  return d->forward(torch::cat({x_frame, y_frame}, 1));
}

torch::Tensor discriminator_forward_temporal(PatchDiscriminator& d, const torch::Tensor& anchor,
                                             const torch::Tensor& seq) {
  if (anchor.dim() != 4 || seq.dim() != 5 || seq.size(0) != anchor.size(0) || seq.size(2) != anchor.size(1) ||
      seq.size(3) != anchor.size(2) || seq.size(4) != anchor.size(3)) {
    throw ShapeError("temporal discriminator inputs disagree: anchor " + dims(anchor) + " vs seq " + dims(seq));
  }
  const auto expected_t = d->config().in_channels / 3 - 1;
  if (seq.size(1) != expected_t) {
    throw ShapeError("temporal discriminator configured for T=" + std::to_string(expected_t) + ", got T=" +
                     std::to_string(seq.size(1)));
  }
  const auto b = seq.size(0);
  auto stacked = seq.reshape({b, seq.size(1) * seq.size(2), seq.size(3), seq.size(4)});
  return d->forward(torch::cat({anchor, stacked}, 1));
}

}  // namespace stagan
