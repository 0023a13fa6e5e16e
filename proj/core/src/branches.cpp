#include "stagan/branches.hpp"

#include "stagan/error.hpp"

namespace stagan {

namespace {

void check_inputs(const torch::Tensor& x, const torch::Tensor& s) {
  if (x.dim() != 5 || s.dim() != 5 || x.sizes() != s.sizes()) {
    throw ShapeError("branch inputs must be equal-shape [B, T, 3, H, W] tensors");
  }
  if (x.size(1) < 1) throw ShapeError("branch inputs need at least one frame");
}

// Runs `step` for the time indices in `order`, storing each result at its own index.
template <typename Step>
GeneratedSequence collect(Branch tag, std::int64_t length, const std::vector<std::int64_t>& order, Step&& step) {
  std::vector<torch::Tensor> frames(static_cast<std::size_t>(length));
  std::vector<torch::Tensor> features(static_cast<std::size_t>(length));
  for (auto t : order) {
    GeneratorCall call = step(t);
    frames[t] = call.image;
    features[t] = call.features;
  }
  GeneratedSequence out;
  out.tag = tag;
  out.frames = torch::stack(frames, 1);
  if (features.front().defined()) out.features = torch::stack(features, 1);
  return out;
}

std::vector<std::int64_t> forward_order(std::int64_t n) {
  std::vector<std::int64_t> v(static_cast<std::size_t>(n));
  for (std::int64_t t = 0; t < n; ++t) v[t] = t;
  return v;
}

std::vector<std::int64_t> backward_order(std::int64_t n) {
  std::vector<std::int64_t> v(static_cast<std::size_t>(n));
  for (std::int64_t t = 0; t < n; ++t) v[t] = n - 1 - t;
  return v;
}

}  // namespace

std::string_view branch_name(Branch b) {
  switch (b) {
    case Branch::kTemporalDown: return "temporal_down";
    case Branch::kTemporalUp: return "temporal_up";
    case Branch::kSpatialDown: return "spatial_down";
    case Branch::kSpatialUp: return "spatial_up";
  }
  return "unknown";
}

GeneratorFn as_generator_fn(UNetGenerator g, bool keep_features) {
  return [g, keep_features](const torch::Tensor& image, const torch::Tensor& sem) mutable {
    GeneratorOutput out = g->forward(image, sem);
    GeneratorCall call{out.image, {}};
    if (keep_features) call.features = out.features.back();
    return call;
  };
}

bool GenerationBundle::has(Branch b) const {
  for (const auto& s : sequences) {
    if (s.tag == b) return true;
  }
  return false;
}

const GeneratedSequence& GenerationBundle::at(Branch b) const {
  for (const auto& s : sequences) {
    if (s.tag == b) return s;
  }
  throw ShapeError("bundle has no " + std::string(branch_name(b)) + " sequence");
}

GeneratedSequence temporal_downstream(const GeneratorFn& g, const torch::Tensor& x, const torch::Tensor& s) {
  check_inputs(x, s);
  const auto n = x.size(1);
  torch::Tensor prev;
  return collect(Branch::kTemporalDown, n, forward_order(n), [&](std::int64_t t) {
    GeneratorCall call = g(t == 0 ? x.select(1, 0) : prev, s.select(1, t));
    prev = call.image;
    return call;
  });
}

GeneratedSequence temporal_upstream(const GeneratorFn& g, const torch::Tensor& x, const torch::Tensor& s) {
  check_inputs(x, s);
  const auto n = x.size(1);
  torch::Tensor prev;
  return collect(Branch::kTemporalUp, n, backward_order(n), [&](std::int64_t t) {
    GeneratorCall call = g(t == n - 1 ? x.select(1, n - 1) : prev, s.select(1, t));
    prev = call.image;
    return call;
  });
}

GeneratedSequence spatial_downstream(const GeneratorFn& g, const torch::Tensor& x, const torch::Tensor& s) {
  check_inputs(x, s);
  const auto n = x.size(1);
  const auto anchor = x.select(1, 0);
  return collect(Branch::kSpatialDown, n, forward_order(n), [&](std::int64_t t) { return g(anchor, s.select(1, t)); });
}

GeneratedSequence spatial_upstream(const GeneratorFn& g, const torch::Tensor& x, const torch::Tensor& s) {
  check_inputs(x, s);
  const auto n = x.size(1);
  const auto anchor = x.select(1, n - 1);
  return collect(Branch::kSpatialUp, n, backward_order(n), [&](std::int64_t t) { return g(anchor, s.select(1, t)); });
}

GeneratedSequence run_branch(Branch b, const GeneratorFn& g, const torch::Tensor& x, const torch::Tensor& s) {
  switch (b) {
    case Branch::kTemporalDown: return temporal_downstream(g, x, s);
    case Branch::kTemporalUp: return temporal_upstream(g, x, s);
    case Branch::kSpatialDown: return spatial_downstream(g, x, s);
    case Branch::kSpatialUp: return spatial_upstream(g, x, s);
  }
  throw ShapeError("unknown branch");
}

GenerationBundle run_branches(const GeneratorFn& g, const torch::Tensor& x, const torch::Tensor& s,
                              const std::vector<Branch>& which) {
  GenerationBundle bundle;
  for (auto b : which) {
    if (bundle.has(b)) throw ShapeError("branch requested twice: " + std::string(branch_name(b)));
    bundle.sequences.push_back(run_branch(b, g, x, s));
  }
  return bundle;
}

GenerationBundle run_all_branches(const GeneratorFn& g, const torch::Tensor& x, const torch::Tensor& s) {
  return run_branches(g, x, s, {kAllBranches.begin(), kAllBranches.end()});
}

GenerationBundle run_all_branches(const GeneratorFn& g, const PairedSample& sample) {
  return run_all_branches(g, sample.exo.tensor().unsqueeze(0), sample.sem.tensor().unsqueeze(0));
}

}  // namespace stagan
