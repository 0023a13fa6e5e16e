#include "stagan/pipeline.hpp"

#include <algorithm>
#include <cstdio>

#include "stagan/error.hpp"
#include "stagan/png_io.hpp"
#include "stagan/synthdata.hpp"

namespace fs = std::filesystem;

namespace stagan {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void collect(NamedTensors& out, const std::string& prefix, const torch::nn::Module& m, bool buffers) {
  for (const auto& p : m.named_parameters()) out.emplace_back(prefix + p.key(), p.value());
  if (buffers) {
    for (const auto& b : m.named_buffers()) out.emplace_back(prefix + b.key(), b.value());
  }
}

std::vector<fs::path> sorted_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("missing input directory", dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no PNG frames in " + dir.string());
  return files;
}

std::string frame_name(std::int64_t t, const char* suffix = "") {
  char buf[64];
  std::snprintf(buf, sizeof buf, "frame_%04lld%s.png", static_cast<long long>(t), suffix);
  return buf;
}

}  // namespace

NamedTensors StaganModel::named_tensors() const {
  NamedTensors out;
  collect(out, "generator.", *generator, true);
  collect(out, "d_spatial.", *d_spatial, true);
  if (d_temporal) collect(out, "d_temporal.", *d_temporal, true);
  if (fusion) collect(out, "fusion.", *fusion, true);
  if (embedding) collect(out, "embedding.", *embedding, true);
  return out;
}

NamedTensors StaganModel::generator_parameters() const {
  NamedTensors out;
  collect(out, "generator.", *generator, false);
  if (fusion) collect(out, "fusion.", *fusion, false);
  return out;
}

NamedTensors StaganModel::discriminator_parameters() const {
  NamedTensors out;
  collect(out, "d_spatial.", *d_spatial, false);
  if (d_temporal) collect(out, "d_temporal.", *d_temporal, false);
  return out;
}

GeneratorFn StaganModel::generator_fn() const {
  const bool features = fusion && fusion->config().input == FusionInput::kDecoderFeatures;
  return as_generator_fn(generator, features);
}

StaganModel build_model(const TrainConfig& config) {
  config.validate();
  StaganModel m;
  m.config = config;
  m.spec = ablation_spec(config.ablation);
  const int size = config.generator.image_size;
  m.generator = build_generator(config.generator, derive_seed(config.seed, 0));
  DiscriminatorConfig ds = config.discriminator;
  ds.in_channels = 6;
  m.d_spatial = build_spatial_discriminator(ds, size, derive_seed(config.seed, 1));
  if (m.spec.temporal_discriminator) {
    m.d_temporal = build_temporal_discriminator(config.discriminator, config.clip_length, size,
                                                derive_seed(config.seed, 2));
  }
  if (m.spec.attention_fusion) m.fusion = build_fusion_net(config.fusion, derive_seed(config.seed, 3));
  return m;
}

Synthesis synthesize_sequence(const StaganModel& model, const torch::Tensor& x, const torch::Tensor& s) {
  Synthesis out;
  out.bundle = run_branches(model.generator_fn(), x, s, model.spec.branches);
  if (model.fusion) {
    FusionNet net = model.fusion;
    auto fused = fuse(net, out.bundle);
    out.frames = fused.frames;
    out.attention = fused.attention;
  } else {
    std::vector<torch::Tensor> frames;
    for (const auto& seq : out.bundle.sequences) frames.push_back(seq.frames);
    out.frames = torch::stack(frames).mean(0);
  }
  return out;
}

Clip synthesize_clip(const StaganModel& model, const Clip& exo, const SemanticMapSequence& sem) {
  const auto& x = exo.tensor();
  const auto& s = sem.tensor();
  const int size = model.config.generator.image_size;
  if (x.sizes() != s.sizes()) throw ShapeError("exo clip and semantic maps differ in shape");
  if (x.size(2) != size || x.size(3) != size) {
    throw ShapeError("input frames are " + std::to_string(x.size(2)) + "x" + std::to_string(x.size(3)) +
                     ", model expects " + std::to_string(size) + "x" + std::to_string(size));
  }
  torch::NoGradGuard no_grad;
  return Clip(synthesize_sequence(model, x.unsqueeze(0), s.unsqueeze(0)).frames[0].contiguous());
}

std::vector<fs::path> synthesize_to_dir(const StaganModel& model, const Clip& exo, const SemanticMapSequence& sem,
                                        const fs::path& out_dir, bool write_attention) {
  const auto& x = exo.tensor();
  const auto& s = sem.tensor();
  const int size = model.config.generator.image_size;
  if (x.sizes() != s.sizes()) throw ShapeError("exo clip and semantic maps differ in shape");
  if (x.size(2) != size || x.size(3) != size) throw ShapeError("input frame size does not match the model");

  torch::NoGradGuard no_grad;
  const auto result = synthesize_sequence(model, x.unsqueeze(0), s.unsqueeze(0));
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  const Clip clip(result.frames[0].contiguous());
  const auto images = images_from_stack(clip);
  for (std::size_t t = 0; t < images.size(); ++t) {
    written.push_back(out_dir / frame_name(static_cast<std::int64_t>(t)));
    write_png(written.back(), images[t]);
  }

  if (write_attention && result.attention.defined()) {
    fs::create_directories(out_dir / "attention");
    const auto att = (result.attention[0] * 255.0).round().clamp(0, 255).to(torch::kUInt8).contiguous();
    for (std::int64_t t = 0; t < att.size(0); ++t) {
      for (int k = 0; k < kFusionInputs; ++k) {
        Image8 img(size, size, 1);
        const auto plane = att[t][k].contiguous();
        img.data.assign(plane.data_ptr<std::uint8_t>(), plane.data_ptr<std::uint8_t>() + plane.numel());
        const std::string suffix = "_b" + std::to_string(k);
        write_png(out_dir / "attention" / frame_name(t, suffix.c_str()), img);
      }
    }
  }
  return written;
}

std::pair<Clip, SemanticMapSequence> read_input_clip(const fs::path& dir) {
  auto load = [](const fs::path& d) {
    std::vector<Image8> images;
    for (const auto& p : sorted_pngs(d)) images.push_back(read_png(p));
    return clip_from_images(images);
  };
  Clip exo = load(dir / "exo");
  Clip sem = load(dir / "sem");
  if (exo.tensor().sizes() != sem.tensor().sizes()) {
    throw DataError("exo and sem inputs differ: " + std::to_string(exo.length()) + " vs " +
                    std::to_string(sem.length()) + " frames");
  }
  return {exo, SemanticMapSequence(sem.tensor())};
}

MetricsReport evaluate_model(StaganModel& model, const std::vector<PairedSample>& samples,
                             const EmbeddingTrainOptions& embedding_opts) {
  if (samples.empty()) throw DataError("evaluation split is empty");
  if (!model.embedding) {
    auto [frames, labels] = labelled_ego_frames(samples);
    model.embedding = train_embedding_model(frames, labels, 8, embedding_opts);
  }
  return evaluate_dataset([&](const PairedSample& s) { return synthesize_clip(model, s.exo, s.sem); }, samples,
                          model.embedding);
}

}  // namespace stagan
