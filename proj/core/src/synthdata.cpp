#include "stagan/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include "stagan/error.hpp"
#include "stagan/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace stagan {

namespace {

constexpr std::array<std::array<std::uint8_t, 3>, kMaxSemanticClasses> kPalette{{
    {0, 0, 0},
    {255, 0, 0},
    {0, 255, 0},
    {0, 0, 255},
    {255, 255, 0},
    {255, 0, 255},
    {0, 255, 255},
    {255, 255, 255},
}};

constexpr std::array<std::uint8_t, 3> kOutlineColor{255, 255, 255};

// Uniform double in [0, 1) from the top 53 bits; std distributions are not
// specified bit-exactly across standard libraries.
class SceneRng {
 public:
  explicit SceneRng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

bool shape_contains(const ShapeInstance& s, double px, double py) {
  const double dx = px - s.cx;
  const double dy = py - s.cy;
  if (s.shape->kind == ShapeKind::kCircle) return dx * dx + dy * dy <= s.shape->size * s.shape->size;
  return std::abs(dx) <= s.shape->size && std::abs(dy) <= s.shape->size;
}

const ShapeInstance* top_shape_at(const SceneState& state, double px, double py) {
  for (auto it = state.shapes.rbegin(); it != state.shapes.rend(); ++it) {
    if (shape_contains(*it, px, py)) return &*it;
  }
  return nullptr;
}

// Scene point sampled by ego pixel (u, v): the center of the exo pixel it maps onto.
std::pair<double, double> ego_sample_point(const SceneState& state, int u, int v) {
  const int ex = state.window_x + u * state.crop_size / state.image_size;
  const int ey = state.window_y + v * state.crop_size / state.image_size;
  return {ex + 0.5, ey + 0.5};
}

std::string frame_name(std::int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04lld.png", static_cast<long long>(index));
  return buf;
}

}  // namespace

void SceneConfig::validate(int generator_depth) const {
  if (image_size < 32) throw ConfigError("image_size must be at least 32");
  if (generator_depth < 0 || generator_depth > 20 || image_size % (1 << generator_depth) != 0) {
    throw ConfigError("image_size must be a multiple of 2^generator_depth");
  }
  if (clip_length < 1) throw ConfigError("clip_length must be positive");
  if (n_shapes < 0 || n_shapes > 4) throw ConfigError("n_shapes must be in [0, 4]");
  if (n_classes < 2 || n_classes > kMaxSemanticClasses) {
    throw ConfigError("n_classes must be in [2, " + std::to_string(kMaxSemanticClasses) + "]");
  }
  if (!(agent_crop_fraction > 0.2 && agent_crop_fraction < 0.8)) {
    throw ConfigError("agent_crop_fraction must be in (0.2, 0.8)");
  }
}

void to_json(json& j, const SceneConfig& c) {
  j = json{{"image_size", c.image_size}, {"clip_length", c.clip_length},
           {"n_shapes", c.n_shapes},     {"n_classes", c.n_classes},
           {"agent_crop_fraction", c.agent_crop_fraction}, {"seed", c.seed}};
}

void from_json(const json& j, SceneConfig& c) {
  SceneConfig d;
  c.image_size = j.value("image_size", d.image_size);
  c.clip_length = j.value("clip_length", d.clip_length);
  c.n_shapes = j.value("n_shapes", d.n_shapes);
  c.n_classes = j.value("n_classes", d.n_classes);
  c.agent_crop_fraction = j.value("agent_crop_fraction", d.agent_crop_fraction);
  c.seed = j.value("seed", d.seed);
}

std::string config_hash(const SceneConfig& c) {
  // FNV-1a over the canonical JSON text.
  const std::string text = json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double reflect_into(double p, double lo, double hi) {
  const double span = hi - lo;
  if (span <= 0) return lo;
  double u = std::fmod(p - lo, 2 * span);
  if (u < 0) u += 2 * span;
  return lo + (u <= span ? u : 2 * span - u);
}

SceneLayout make_scene_layout(const SceneConfig& config, std::uint64_t clip_seed) {
  config.validate(0);
  SceneRng rng(mix_seed(config.seed, clip_seed));
  const double s = config.image_size;
  const double speed_scale = s / 64.0;

  SceneLayout layout;
  for (auto& ch : layout.background_a) ch = static_cast<std::uint8_t>(rng.uniform(20, 120));
  for (auto& ch : layout.background_b) ch = static_cast<std::uint8_t>(rng.uniform(60, 180));

  layout.crop_size = std::max(1, static_cast<int>(std::lround(config.agent_crop_fraction * s)));
  layout.agent_x = rng.uniform(0, s);
  layout.agent_y = rng.uniform(0, s);
  layout.agent_vx = rng.uniform(-1.0, 1.0) * speed_scale;
  layout.agent_vy = rng.uniform(-1.0, 1.0) * speed_scale;

  for (int k = 0; k < config.n_shapes; ++k) {
    SceneShape shape;
    shape.kind = rng.uniform() < 0.5 ? ShapeKind::kCircle : ShapeKind::kSquare;
    shape.class_id = 1 + k % (config.n_classes - 1);
    for (auto& ch : shape.color) ch = static_cast<std::uint8_t>(rng.uniform(40, 256));
    shape.size = rng.uniform(0.08, 0.18) * s;
    shape.x = rng.uniform(0, s);
    shape.y = rng.uniform(0, s);
    const double angle = rng.uniform(0, 2 * M_PI);
    const double speed = rng.uniform(0.5, 2.5) * speed_scale;
    shape.vx = speed * std::cos(angle);
    shape.vy = speed * std::sin(angle);
    layout.shapes.push_back(shape);
  }
  return layout;
}

SceneState scene_state_at(const SceneConfig& config, const SceneLayout& layout, int t) {
  const double s = config.image_size;
  SceneState state;
  state.layout = &layout;
  state.image_size = config.image_size;
  state.crop_size = layout.crop_size;
  for (const auto& shape : layout.shapes) {
    state.shapes.push_back({&shape, reflect_into(shape.x + shape.vx * t, shape.size, s - shape.size),
                            reflect_into(shape.y + shape.vy * t, shape.size, s - shape.size)});
  }
  const double half = layout.crop_size / 2.0;
  const double ax = reflect_into(layout.agent_x + layout.agent_vx * t, half, s - half);
  const double ay = reflect_into(layout.agent_y + layout.agent_vy * t, half, s - half);
  const int max_origin = config.image_size - layout.crop_size;
  state.window_x = std::clamp(static_cast<int>(std::floor(ax - half)), 0, max_origin);
  state.window_y = std::clamp(static_cast<int>(std::floor(ay - half)), 0, max_origin);
  return state;
}

std::array<std::uint8_t, 3> scene_color_at(const SceneState& state, double px, double py) {
  if (const auto* top = top_shape_at(state, px, py)) return top->shape->color;
  const double a = std::clamp((px + py) / (2.0 * state.image_size), 0.0, 1.0);
  std::array<std::uint8_t, 3> out{};
  for (int c = 0; c < 3; ++c) {
    out[c] = static_cast<std::uint8_t>(
        std::lround((1.0 - a) * state.layout->background_a[c] + a * state.layout->background_b[c]));
  }
  return out;
}

int scene_class_at(const SceneState& state, double px, double py) {
  const auto* top = top_shape_at(state, px, py);
  return top ? top->shape->class_id : 0;
}

const std::array<std::uint8_t, 3>& class_color(int class_id) {
  if (class_id < 0 || class_id >= kMaxSemanticClasses) throw ConfigError("class id out of palette range");
  return kPalette[class_id];
}

int class_from_color(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  int best = 0;
  int best_d = 1 << 30;
  for (int k = 0; k < kMaxSemanticClasses; ++k) {
    const int dr = r - kPalette[k][0], dg = g - kPalette[k][1], db = b - kPalette[k][2];
    const int d = dr * dr + dg * dg + db * db;
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

Image8 render_exo(const SceneState& state) {
  const int n = state.image_size;
  Image8 img(n, n, 3);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const auto c = scene_color_at(state, x + 0.5, y + 0.5);
      for (int k = 0; k < 3; ++k) img.at(y, x, k) = c[k];
    }
  }
  // Field-of-view outline, one pixel outside the agent window.
  const int x0 = state.window_x - 1, y0 = state.window_y - 1;
  const int x1 = state.window_x + state.crop_size, y1 = state.window_y + state.crop_size;
  auto plot = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= n || y >= n) return;
    for (int k = 0; k < 3; ++k) img.at(y, x, k) = kOutlineColor[k];
  };
  for (int x = x0; x <= x1; ++x) {
    plot(x, y0);
    plot(x, y1);
  }
  for (int y = y0; y <= y1; ++y) {
    plot(x0, y);
    plot(x1, y);
  }
  return img;
}

Image8 render_ego(const SceneState& state) {
  const int n = state.image_size;
  Image8 img(n, n, 3);
  for (int v = 0; v < n; ++v) {
    for (int u = 0; u < n; ++u) {
      const auto [px, py] = ego_sample_point(state, u, v);
      const auto c = scene_color_at(state, px, py);
      for (int k = 0; k < 3; ++k) img.at(v, u, k) = c[k];
    }
  }
  return img;
}

Image8 render_semantic(const SceneState& state) {
  const int n = state.image_size;
  Image8 img(n, n, 3);
  for (int v = 0; v < n; ++v) {
    for (int u = 0; u < n; ++u) {
      const auto [px, py] = ego_sample_point(state, u, v);
      const auto& c = kPalette[scene_class_at(state, px, py)];
      for (int k = 0; k < 3; ++k) img.at(v, u, k) = c[k];
    }
  }
  return img;
}

PairedSample generate_scene_clip(const SceneConfig& config, std::uint64_t clip_seed) {
  const SceneLayout layout = make_scene_layout(config, clip_seed);
  std::vector<Image8> exo, ego, sem;
  for (int t = 0; t < config.clip_length; ++t) {
    const SceneState state = scene_state_at(config, layout, t);
    exo.push_back(render_exo(state));
    ego.push_back(render_ego(state));
    sem.push_back(render_semantic(state));
  }
  char id[32];
  std::snprintf(id, sizeof(id), "clip_%06llu", static_cast<unsigned long long>(clip_seed));
  return PairedSample{clip_from_images(exo), clip_from_images(ego), SemanticMapSequence(clip_from_images(sem).tensor()),
                      id};
}

int ego_frame_label(const Frame& semantic_frame) {
  const Image8 img = denormalize_frame(semantic_frame);
  std::array<long, kMaxSemanticClasses> counts{};
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) ++counts[class_from_color(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2))];
  }
  int best = 0;
  for (int k = 1; k < kMaxSemanticClasses; ++k) {
    if (counts[k] > 0 && (best == 0 || counts[k] > counts[best])) best = k;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Manifest and on-disk layout
// ---------------------------------------------------------------------------

void DatasetManifest::validate() const {
  std::set<std::string> seen;
  for (const auto& rec : clips) {
    if (rec.clip_id.empty()) throw DataError("manifest record with empty clip_id");
    if (!seen.insert(rec.clip_id).second) {
      throw DataError("duplicate clip_id in manifest: " + rec.clip_id);
    }
    const auto n = static_cast<std::size_t>(rec.length);
    if (rec.length < 1 || rec.exo.size() != n || rec.ego.size() != n || rec.sem.size() != n) {
      throw DataError("manifest record " + rec.clip_id + " has inconsistent frame lists");
    }
  }
}

void to_json(json& j, const DatasetManifest& m) {
  json clips = json::array();
  for (const auto& rec : m.clips) {
    clips.push_back({{"clip_id", rec.clip_id},
                     {"split", rec.split},
                     {"T", rec.length},
                     {"frames", {{"exo", rec.exo}, {"ego", rec.ego}, {"sem", rec.sem}}}});
  }
  j = json{{"clips", clips}, {"seed", m.seed}, {"config_hash", m.config_hash}};
  if (m.scene) j["scene"] = *m.scene;
}

DatasetManifest manifest_from_json(const json& j) {
  DatasetManifest m;
  try {
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config_hash = j.at("config_hash").get<std::string>();
    if (j.contains("scene")) m.scene = j.at("scene").get<SceneConfig>();
    for (const auto& c : j.at("clips")) {
      ClipRecord rec;
      rec.clip_id = c.at("clip_id").get<std::string>();
      rec.split = c.at("split").get<std::string>();
      rec.length = c.at("T").get<std::int64_t>();
      const auto& frames = c.at("frames");
      rec.exo = frames.at("exo").get<std::vector<std::string>>();
      rec.ego = frames.at("ego").get<std::vector<std::string>>();
      rec.sem = frames.at("sem").get<std::vector<std::string>>();
      m.clips.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

DatasetManifest make_manifest(const std::vector<PairedSample>& samples, const std::string& split,
                              const SceneConfig& config) {
  DatasetManifest m;
  m.seed = config.seed;
  m.config_hash = config_hash(config);
  m.scene = config;
  for (const auto& s : samples) {
    ClipRecord rec;
    rec.clip_id = s.clip_id;
    rec.split = split;
    rec.length = s.ego.length();
    for (std::int64_t t = 0; t < rec.length; ++t) {
      const std::string base = split + "/" + s.clip_id + "/";
      rec.exo.push_back(base + "exo/" + frame_name(t));
      rec.ego.push_back(base + "ego/" + frame_name(t));
      rec.sem.push_back(base + "sem/" + frame_name(t));
    }
    m.clips.push_back(std::move(rec));
  }
  return m;
}

void append_manifest(DatasetManifest& into, const DatasetManifest& more) {
  into.clips.insert(into.clips.end(), more.clips.begin(), more.clips.end());
  if (into.config_hash.empty()) {
    into.config_hash = more.config_hash;
    into.seed = more.seed;
    into.scene = more.scene;
  }
}

void write_dataset(const std::vector<PairedSample>& samples, const DatasetManifest& manifest, const fs::path& root) {
  manifest.validate();
  if (manifest.clips.size() != samples.size()) throw DataError("manifest and sample counts differ");

  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create dataset root", root.string());

  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& rec = manifest.clips[k];
    const auto& sample = samples[k];
    if (rec.length != sample.ego.length()) throw DataError("manifest length mismatch for " + rec.clip_id);
    auto write_stack = [&](const FrameStack& stack, const std::vector<std::string>& paths) {
      const auto images = images_from_stack(stack);
      for (std::size_t t = 0; t < images.size(); ++t) {
        const fs::path p = root / paths[t];
        fs::create_directories(p.parent_path(), ec);
        if (ec) throw IoError("cannot create directory", p.parent_path().string());
        write_png(p, images[t]);
      }
    };
    write_stack(sample.exo, rec.exo);
    write_stack(sample.ego, rec.ego);
    write_stack(sample.sem, rec.sem);
  }

  const fs::path manifest_path = root / "manifest.json";
  std::ofstream out(manifest_path);
  if (!out) throw IoError("cannot write manifest", manifest_path.string());
  out << json(manifest).dump(2) << '\n';
  if (!out) throw IoError("cannot write manifest", manifest_path.string());
}

DatasetManifest read_manifest(const fs::path& root) {
  const fs::path path = root / "manifest.json";
  std::ifstream in(path);
  if (!in) throw DataError("missing manifest.json in " + root.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("manifest.json is not valid JSON: " + std::string(e.what()));
  }
  DatasetManifest m = manifest_from_json(j);
  m.validate();
  return m;
}

std::vector<PairedSample> load_paired_dataset(const fs::path& root, const std::string& split,
                                              const SampleExpectations& expect) {
  const DatasetManifest manifest = read_manifest(root);
  std::vector<const ClipRecord*> records;
  for (const auto& rec : manifest.clips) {
    if (rec.split == split) records.push_back(&rec);
  }
  std::sort(records.begin(), records.end(), [](auto* a, auto* b) { return a->clip_id < b->clip_id; });

  std::vector<PairedSample> out;
  out.reserve(records.size());
  for (const auto* rec : records) {
    auto load_stack = [&](const std::vector<std::string>& paths, const char* view) {
      std::vector<Image8> images;
      for (std::size_t t = 0; t < paths.size(); ++t) {
        const fs::path p = root / paths[t];
        if (!fs::exists(p)) {
          throw DataError("clip " + rec->clip_id + ": missing " + view + " frame " + std::to_string(t) + " (" +
                          p.string() + ")");
        }
        try {
          images.push_back(read_png(p));
        } catch (const IoError& e) {
          throw DataError("clip " + rec->clip_id + ": unreadable " + view + " frame " + std::to_string(t) + " (" +
                          e.what() + ")");
        }
      }
      try {
        return clip_from_images(images);
      } catch (const ShapeError& e) {
        throw DataError("clip " + rec->clip_id + ": inconsistent " + view + " frames (" + e.what() + ")");
      }
    };
    PairedSample s{load_stack(rec->exo, "exo"), load_stack(rec->ego, "ego"),
                   SemanticMapSequence(load_stack(rec->sem, "sem").tensor()), rec->clip_id};
    const auto result = validate_paired_sample(s, expect);
    if (!result.ok()) throw DataError("clip " + rec->clip_id + " failed validation", result.violations);
    out.push_back(std::move(s));
  }
  return out;
}

DatasetManifest generate_dataset(const SceneConfig& config, int n_train, int n_test, const fs::path& root) {
  config.validate(0);
  std::vector<PairedSample> samples;
  DatasetManifest manifest;
  std::vector<PairedSample> train, test;
  for (int k = 0; k < n_train; ++k) train.push_back(generate_scene_clip(config, static_cast<std::uint64_t>(k)));
  for (int k = 0; k < n_test; ++k) {
    test.push_back(generate_scene_clip(config, static_cast<std::uint64_t>(n_train + k)));
  }
  append_manifest(manifest, make_manifest(train, "train", config));
  append_manifest(manifest, make_manifest(test, "test", config));
  samples = std::move(train);
  samples.insert(samples.end(), std::make_move_iterator(test.begin()), std::make_move_iterator(test.end()));
  write_dataset(samples, manifest, root);
  return manifest;
}

}  // namespace stagan
