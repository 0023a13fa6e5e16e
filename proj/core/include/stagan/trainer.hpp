#pragma once

// Adversarial training loop: one discriminator update followed by one
// generator (+ fusion) update per batch.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <vector>

#include <torch/torch.h>

#include "stagan/checkpoint.hpp"
#include "stagan/clip.hpp"
#include "stagan/config.hpp"
#include "stagan/losses.hpp"
#include "stagan/pipeline.hpp"

namespace stagan {

struct Batch {
  torch::Tensor x;  // exocentric frames [B, T, 3, H, W]
  torch::Tensor y;  // egocentric targets
  torch::Tensor s;  // ego semantic maps
};

// Generator-side terms of the full objective for one batch; every active term is defined.
GeneratorLossParts generator_objective(const StaganModel& model, const Batch& batch, const Synthesis& synth);

struct DiscriminatorObjective {
  torch::Tensor spatial;   // fused and, when enabled, per-branch D_S terms
  torch::Tensor temporal;  // undefined without D_T
};

// Discriminator-side terms on detached fakes.
DiscriminatorObjective discriminator_objective(const StaganModel& model, const Batch& batch, const Synthesis& synth);

class Trainer {
 public:
  // Throws ConfigError or DataError before any update happens.
  Trainer(TrainConfig config, std::vector<PairedSample> train_set);

  // Next batch of seeded random windows; augmentation applies identically to
  // the three views of a clip.
  Batch next_batch();

  // D update on detached fakes; returns (d_spatial, d_temporal) where d_temporal is
  // absent without D_T. Throws NumericError on a non-finite term.
  std::pair<double, std::optional<double>> discriminator_update(const Batch& batch, const Synthesis& synth);
  // G (+ fusion) update on the full objective.
  LossReport generator_update(const Batch& batch, const Synthesis& synth);

  // One full optimisation step; appends to the log and writes periodic checkpoints.
  LossReport step();
  // Runs until total_steps(); saves a final checkpoint when checkpoint_dir is set.
  std::vector<LossReport> run();

  std::int64_t total_steps() const;
  std::int64_t steps_done() const noexcept { return step_; }

  StaganModel& model() noexcept { return model_; }
  const TrainConfig& config() const noexcept { return config_; }

  Checkpoint checkpoint() const;
  // Restores networks, optimizer moments, RNG state and the step counter.
  void resume(const Checkpoint& ckpt);

 private:
  void write_checkpoint();
  std::uint64_t uniform(std::uint64_t n);

  TrainConfig config_;
  std::vector<PairedSample> data_;
  StaganModel model_;
  std::unique_ptr<torch::optim::Adam> opt_g_;
  std::unique_ptr<torch::optim::Adam> opt_d_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::int64_t step_ = 0;
  std::ofstream log_;
};

struct TrainResult {
  std::vector<LossReport> reports;
  std::filesystem::path checkpoint;  // empty when checkpoint_dir is unset
};

// Generates the dataset first when the config carries a SceneConfig and the
// root has no manifest yet, then loads the training split and trains.
TrainResult train(const TrainConfig& config, int synth_train_clips = 32, int synth_test_clips = 8);

}  // namespace stagan
