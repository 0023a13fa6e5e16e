#pragma once

// Frames, clips and paired cross-view samples.
//
// Pixel tensors are float32, channel-first. A Frame is [3, H, W], a clip
// (or semantic map sequence) is [T, 3, H, W]. Values live in [-1, 1];
// normalize_frame/denormalize_frame convert from and to 8-bit RGB.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <torch/types.h>

namespace stagan {

inline constexpr std::int64_t kImageChannels = 3;

// Interleaved 8-bit image, row-major HWC.
struct Image8 {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<std::uint8_t> data;

  Image8() = default;
  Image8(int h, int w, int c = 3) : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, 0) {}

  std::uint8_t& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  std::uint8_t at(int y, int x, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }

  friend bool operator==(const Image8&, const Image8&) = default;
};

class Frame {
 public:
  Frame() = default;
  // Throws ShapeError unless `pixels` is a 3-channel [3, H, W] tensor.
  explicit Frame(torch::Tensor pixels);

  const torch::Tensor& tensor() const noexcept { return pixels_; }
  std::int64_t height() const { return pixels_.size(1); }
  std::int64_t width() const { return pixels_.size(2); }

 private:
  torch::Tensor pixels_;
};

// Shared storage for Clip and SemanticMapSequence: a [T, 3, H, W] stack.
class FrameStack {
 public:
  FrameStack() = default;
  explicit FrameStack(torch::Tensor frames);
  explicit FrameStack(const std::vector<Frame>& frames);

  const torch::Tensor& tensor() const noexcept { return frames_; }
  std::int64_t length() const { return frames_.defined() ? frames_.size(0) : 0; }
  std::int64_t height() const { return frames_.size(2); }
  std::int64_t width() const { return frames_.size(3); }
  Frame frame(std::int64_t index) const;

 private:
  torch::Tensor frames_;
};

class Clip : public FrameStack {
 public:
  using FrameStack::FrameStack;
};

// Color-coded semantic guidance for the target view, same layout as Clip.
class SemanticMapSequence : public FrameStack {
 public:
  using FrameStack::FrameStack;
};

struct PairedSample {
  Clip exo;
  Clip ego;
  SemanticMapSequence sem;
  std::string clip_id;
};

struct ValidationResult {
  std::vector<std::string> violations;
  bool ok() const noexcept { return violations.empty(); }
};

// Frame k of the result is frame T-1-k of the input.
Clip reverse_sequence(const Clip& clip);
SemanticMapSequence reverse_sequence(const SemanticMapSequence& seq);
// Reverses dimension 1 of a batched [B, T, ...] sequence tensor.
torch::Tensor reverse_time(const torch::Tensor& sequence_batch);

// Expected geometry; unset fields are not checked.
struct SampleExpectations {
  std::optional<std::int64_t> clip_length;
  std::optional<std::int64_t> image_size;
};

ValidationResult validate_paired_sample(const PairedSample& sample, const SampleExpectations& expect = {});

// v -> v / 127.5 - 1. Throws ShapeError unless the image has 3 channels.
Frame normalize_frame(const Image8& raw);
// Inverse of normalize_frame, rounded to nearest and clamped to 0..255.
Image8 denormalize_frame(const Frame& frame);

Clip clip_from_images(const std::vector<Image8>& images);
std::vector<Image8> images_from_stack(const FrameStack& stack);

}  // namespace stagan
