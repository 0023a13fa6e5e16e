#include "stagan/clip.hpp"

#include <cmath>
#include <cstring>

#include <torch/torch.h>

#include "stagan/error.hpp"

namespace stagan {

namespace {

std::string shape_string(const torch::Tensor& t) {
  std::string out = "[";
  for (std::int64_t i = 0; i < t.dim(); ++i) {
    if (i) out += ", ";
    out += std::to_string(t.size(i));
  }
  return out + "]";
}

void check_stack_values(const torch::Tensor& t, const std::string& name, std::vector<std::string>& out) {
  if (!torch::isfinite(t).all().item<bool>()) {
    out.push_back(name + ": non-finite pixel");
    return;
  }
  if (t.numel() > 0 && (t.min().item<float>() < -1.0f || t.max().item<float>() > 1.0f)) {
    out.push_back(name + ": pixel out of range [-1, 1]");
  }
}

}  // namespace

Frame::Frame(torch::Tensor pixels) : pixels_(std::move(pixels)) {
  if (!pixels_.defined() || pixels_.dim() != 3 || pixels_.size(0) != kImageChannels || pixels_.size(1) <= 0 ||
      pixels_.size(2) <= 0) {
    throw ShapeError("frame must be [3, H, W], got " + (pixels_.defined() ? shape_string(pixels_) : "undefined"));
  }
}

FrameStack::FrameStack(torch::Tensor frames) : frames_(std::move(frames)) {
  if (!frames_.defined() || frames_.dim() != 4 || frames_.size(0) < 1 || frames_.size(1) != kImageChannels) {
    throw ShapeError("frame stack must be [T, 3, H, W], got " +
                     (frames_.defined() ? shape_string(frames_) : "undefined"));
  }
}

FrameStack::FrameStack(const std::vector<Frame>& frames) {
  if (frames.empty()) throw ShapeError("frame stack needs at least one frame");
  std::vector<torch::Tensor> parts;
  parts.reserve(frames.size());
  for (const auto& f : frames) {
    if (f.tensor().sizes() != frames.front().tensor().sizes()) {
      throw ShapeError("frames in a stack must share one shape");
    }
    parts.push_back(f.tensor());
  }
  frames_ = torch::stack(parts);
}

Frame FrameStack::frame(std::int64_t index) const {
  if (index < 0 || index >= length()) throw ShapeError("frame index out of range: " + std::to_string(index));
  return Frame(frames_[index]);
}

Clip reverse_sequence(const Clip& clip) { return Clip(clip.tensor().flip({0})); }

SemanticMapSequence reverse_sequence(const SemanticMapSequence& seq) {
  return SemanticMapSequence(seq.tensor().flip({0}));
}

torch::Tensor reverse_time(const torch::Tensor& sequence_batch) { return sequence_batch.flip({1}); }

ValidationResult validate_paired_sample(const PairedSample& sample, const SampleExpectations& expect) {
  ValidationResult result;
  auto& v = result.violations;
  const std::int64_t t_ego = sample.ego.length();
  const std::int64_t t_exo = sample.exo.length();
  const std::int64_t t_sem = sample.sem.length();

  if (t_ego == 0 || t_exo == 0 || t_sem == 0) {
    v.push_back("empty sequence");
    return result;
  }
  if (t_exo != t_ego) v.push_back("exo/ego length mismatch");
  if (t_sem != t_ego) v.push_back("sem/ego length mismatch");
  if (expect.clip_length && t_ego != *expect.clip_length) v.push_back("clip length differs from configured length");

  const auto ego_hw = std::make_pair(sample.ego.height(), sample.ego.width());
  if (std::make_pair(sample.exo.height(), sample.exo.width()) != ego_hw) v.push_back("exo/ego shape mismatch");
  if (std::make_pair(sample.sem.height(), sample.sem.width()) != ego_hw) v.push_back("sem/ego shape mismatch");
  if (expect.image_size && (ego_hw.first != *expect.image_size || ego_hw.second != *expect.image_size)) {
    v.push_back("frame size differs from configured image size");
  }

  check_stack_values(sample.exo.tensor(), "exo", v);
  check_stack_values(sample.ego.tensor(), "ego", v);
  check_stack_values(sample.sem.tensor(), "sem", v);
  return result;
}

Frame normalize_frame(const Image8& raw) {
  if (raw.channels != 3) throw ShapeError("expected 3-channel image, got " + std::to_string(raw.channels));
  if (raw.data.size() != static_cast<std::size_t>(raw.height) * raw.width * 3) {
    throw ShapeError("image buffer size does not match its dimensions");
  }
  auto hwc = torch::from_blob(const_cast<std::uint8_t*>(raw.data.data()), {raw.height, raw.width, 3}, torch::kUInt8);
  auto chw = hwc.permute({2, 0, 1}).to(torch::kFloat32).div(127.5f).sub(1.0f).contiguous();
  return Frame(chw);
}

Image8 denormalize_frame(const Frame& frame) {
  const auto& t = frame.tensor();
  Image8 out(static_cast<int>(t.size(1)), static_cast<int>(t.size(2)), 3);
  auto hwc = t.to(torch::kFloat32).add(1.0f).mul(127.5f).round().clamp(0, 255).to(torch::kUInt8).permute({1, 2, 0})
                 .contiguous();
  std::memcpy(out.data.data(), hwc.data_ptr<std::uint8_t>(), out.data.size());
  return out;
}

Clip clip_from_images(const std::vector<Image8>& images) {
  std::vector<Frame> frames;
  frames.reserve(images.size());
  for (const auto& img : images) frames.push_back(normalize_frame(img));
  return Clip(frames);
}

std::vector<Image8> images_from_stack(const FrameStack& stack) {
  std::vector<Image8> out;
  out.reserve(static_cast<std::size_t>(stack.length()));
  for (std::int64_t i = 0; i < stack.length(); ++i) out.push_back(denormalize_frame(stack.frame(i)));
  return out;
}

}  // namespace stagan
