#pragma once

// Checkpoint archive: a directory holding manifest.json (tensor names,
// shapes, dtypes and byte offsets, plus the config snapshot, step, RNG state
// and optimizer step counts) and tensors.bin, one flat little-endian float32
// blob.

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "stagan/pipeline.hpp"

namespace stagan {

struct Checkpoint {
  nlohmann::json config;  // TrainConfig snapshot
  std::int64_t step = 0;
  std::string rng_state;
  nlohmann::json optimizer_steps = nlohmann::json::object();
  NamedTensors tensors;

  // nullptr when absent.
  const torch::Tensor* find(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);

// Throws ManifestError, DtypeMismatchError, ShapeMismatchError or TruncatedBlobError.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Model tensors and config only; the trainer adds optimizer and RNG state.
Checkpoint capture_model(const StaganModel& model, std::int64_t step = 0);

// Copies matching tensors into the model. Throws MissingParameterError
// naming every model tensor the checkpoint lacks and ShapeMismatchError on
// the first shape disagreement. Extra checkpoint tensors are ignored.
void restore_model(StaganModel& model, const Checkpoint& ckpt);

// Rebuilds the networks from the config snapshot and restores them.
StaganModel model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace stagan
