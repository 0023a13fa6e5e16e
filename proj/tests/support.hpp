#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <ATen/CPUGeneratorImpl.h>
#include <gtest/gtest.h>
#include <torch/torch.h>

#include "stagan/clip.hpp"
#include "stagan/config.hpp"

namespace stagan::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("stagan_" + tag + "_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline torch::Tensor uniform_pm1(torch::IntArrayRef shape, std::uint64_t seed) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  return torch::empty(shape).uniform_(-1.0, 1.0, gen);
}

// Small configuration that trains in well under a second per step.
inline TrainConfig tiny_train_config(Ablation ablation, std::uint64_t seed = 3) {
  TrainConfig cfg;
  cfg.generator = GeneratorConfig{32, 3, 8, 6, 3};
  cfg.discriminator = DiscriminatorConfig{6, 8, 2};
  cfg.fusion.image_size = 32;
  cfg.fusion.feature_width = 4;
  cfg.ablation = ablation;
  cfg.clip_length = 3;
  cfg.batch_size = 2;
  cfg.seed = seed;
  cfg.augment = true;
  return cfg;
}

inline SceneConfig tiny_scene(std::uint64_t seed = 11) {
  SceneConfig s;
  s.image_size = 32;
  s.clip_length = 4;
  s.seed = seed;
  return s;
}

}  // namespace stagan::testing
