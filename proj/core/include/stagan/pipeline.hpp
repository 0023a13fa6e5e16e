#pragma once

// The assembled model for one ablation setting and the inference path
// from an exocentric clip + semantic maps to an egocentric clip.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "stagan/branches.hpp"
#include "stagan/clip.hpp"
#include "stagan/config.hpp"
#include "stagan/fusion.hpp"
#include "stagan/metrics.hpp"
#include "stagan/networks.hpp"

namespace stagan {

using NamedTensors = std::vector<std::pair<std::string, torch::Tensor>>;

struct StaganModel {
  TrainConfig config;
  AblationSpec spec;
  UNetGenerator generator{nullptr};
  PatchDiscriminator d_spatial{nullptr};
  PatchDiscriminator d_temporal{nullptr};  // settings E and F
  FusionNet fusion{nullptr};               // setting F
  EmbeddingModel embedding{nullptr};       // attached for evaluation only

  // Every parameter and buffer, prefixed by component ("generator.", "fusion.", ...).
  NamedTensors named_tensors() const;
  // Parameters updated by the generator step (G and fusion) and by the discriminator step.
  NamedTensors generator_parameters() const;
  NamedTensors discriminator_parameters() const;
  GeneratorFn generator_fn() const;
};

// Validates the config; components are initialised from seeds derived from config.seed.
StaganModel build_model(const TrainConfig& config);

struct Synthesis {
  GenerationBundle bundle;
  torch::Tensor frames;     // [B, T, 3, H, W]
  torch::Tensor attention;  // [B, T, 4, H, W], setting F only
};

// Runs the setting's branches and merges them: attention fusion in F, a plain
// average of the branch outputs otherwise.
Synthesis synthesize_sequence(const StaganModel& model, const torch::Tensor& x, const torch::Tensor& s);

// Gradient-free single-clip synthesis. Throws ShapeError on size mismatch.
Clip synthesize_clip(const StaganModel& model, const Clip& exo, const SemanticMapSequence& sem);

// Writes frame_0000.png ... and, with attention maps (setting F), four
// grayscale maps per frame as attention/frame_0000_b{0..3}.png. Returns the frame paths.
std::vector<std::filesystem::path> synthesize_to_dir(const StaganModel& model, const Clip& exo,
                                                     const SemanticMapSequence& sem,
                                                     const std::filesystem::path& out_dir,
                                                     bool write_attention = false);

// Reads frame PNGs from `<dir>/exo` and `<dir>/sem` (sorted by name).
std::pair<Clip, SemanticMapSequence> read_input_clip(const std::filesystem::path& dir);

// Embedding model trained on the real ego frames of `samples`, then the full report.
MetricsReport evaluate_model(StaganModel& model, const std::vector<PairedSample>& samples,
                             const EmbeddingTrainOptions& embedding_opts = {});

}  // namespace stagan
