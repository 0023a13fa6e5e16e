#pragma once

// The four bi-directional generation schedules.
//
// Sequence tensors are batched, [B, T, 3, H, W]. Every GeneratedSequence is
// stored in forward time order, whichever direction produced it.

#include <array>
#include <functional>
#include <string_view>
#include <vector>

#include <torch/torch.h>

#include "stagan/clip.hpp"
#include "stagan/networks.hpp"

namespace stagan {

enum class Branch { kTemporalDown = 0, kTemporalUp = 1, kSpatialDown = 2, kSpatialUp = 3 };

inline constexpr std::array<Branch, 4> kAllBranches{Branch::kTemporalDown, Branch::kTemporalUp, Branch::kSpatialDown,
                                                    Branch::kSpatialUp};

std::string_view branch_name(Branch b);

struct GeneratorCall {
  torch::Tensor image;     // [B, 3, H, W]
  torch::Tensor features;  // optional, [B, C, H, W]
};

// One application of G to (image, semantic map), both [B, 3, H, W].
using GeneratorFn = std::function<GeneratorCall(const torch::Tensor& image, const torch::Tensor& sem)>;

// Wraps a generator; with keep_features the finest decoder activation is returned too.
GeneratorFn as_generator_fn(UNetGenerator g, bool keep_features = false);

struct GeneratedSequence {
  torch::Tensor frames;    // [B, T, 3, H, W]
  torch::Tensor features;  // [B, T, C, H, W] when the generator supplied them
  Branch tag = Branch::kTemporalDown;

  std::int64_t length() const { return frames.size(1); }
  Clip clip(std::int64_t batch_index = 0) const { return Clip(frames[batch_index]); }
};

struct GenerationBundle {
  std::vector<GeneratedSequence> sequences;

  bool has(Branch b) const;
  // Throws ShapeError when the branch was not generated.
  const GeneratedSequence& at(Branch b) const;
};

// y1_1 = G(x_1, s_1), y1_t = G(y1_{t-1}, s_t).
GeneratedSequence temporal_downstream(const GeneratorFn& g, const torch::Tensor& x, const torch::Tensor& s);
// y2_T = G(x_T, s_T), y2_{t-1} = G(y2_t, s_{t-1}).
GeneratedSequence temporal_upstream(const GeneratorFn& g, const torch::Tensor& x, const torch::Tensor& s);
// y3_t = G(x_1, s_t).
GeneratedSequence spatial_downstream(const GeneratorFn& g, const torch::Tensor& x, const torch::Tensor& s);
// y4_t = G(x_T, s_t), generated from t = T down to 1.
GeneratedSequence spatial_upstream(const GeneratorFn& g, const torch::Tensor& x, const torch::Tensor& s);

GeneratedSequence run_branch(Branch b, const GeneratorFn& g, const torch::Tensor& x, const torch::Tensor& s);

// Runs the listed branches, in the listed order.
GenerationBundle run_branches(const GeneratorFn& g, const torch::Tensor& x, const torch::Tensor& s,
                              const std::vector<Branch>& which);

// All four branches; 4T generator calls.
GenerationBundle run_all_branches(const GeneratorFn& g, const torch::Tensor& x, const torch::Tensor& s);
GenerationBundle run_all_branches(const GeneratorFn& g, const PairedSample& sample);

}  // namespace stagan
