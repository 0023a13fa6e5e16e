#pragma once

// Procedural paired exo/ego scenes and the on-disk dataset layout
//
//   root/manifest.json
//   root/{split}/{clip_id}/{exo|ego|sem}/frame_%04d.png
//
// A scene is a set of colored shapes drifting over a gradient background.
// The exocentric view renders the whole scene plus a white outline just
// outside the agent's field of view; the egocentric view is the agent's
// square window, upscaled (nearest neighbour) to the full image size, and
// the semantic map is the class-palette rendering of that same window.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stagan/clip.hpp"

namespace stagan {

inline constexpr int kMaxSemanticClasses = 8;

struct SceneConfig {
  int image_size = 64;
  int clip_length = 5;
  int n_shapes = 3;
  int n_classes = 4;  // including background (class 0)
  double agent_crop_fraction = 0.5;
  std::uint64_t seed = 0;

  // Throws ConfigError. `generator_depth` ties image_size to the generator.
  void validate(int generator_depth = 1) const;
};

void to_json(nlohmann::json& j, const SceneConfig& c);
void from_json(const nlohmann::json& j, SceneConfig& c);
std::string config_hash(const SceneConfig& c);

enum class ShapeKind { kCircle, kSquare };

struct SceneShape {
  ShapeKind kind = ShapeKind::kCircle;
  int class_id = 1;
  std::array<std::uint8_t, 3> color{};
  double x = 0, y = 0;    // center at t = 0
  double vx = 0, vy = 0;  // pixels per frame
  double size = 1;        // radius or half side
};

// Everything random about a clip, drawn once from (config.seed, clip_seed).
struct SceneLayout {
  std::vector<SceneShape> shapes;
  std::array<std::uint8_t, 3> background_a{};
  std::array<std::uint8_t, 3> background_b{};
  double agent_x = 0, agent_y = 0;
  double agent_vx = 0, agent_vy = 0;
  int crop_size = 1;
};

struct ShapeInstance {
  const SceneShape* shape;
  double cx, cy;
};

// Scene state at one time step, in exo pixel coordinates.
struct SceneState {
  std::vector<ShapeInstance> shapes;
  const SceneLayout* layout = nullptr;
  int window_x = 0;  // top-left of the agent window in the exo image
  int window_y = 0;
  int crop_size = 1;
  int image_size = 1;
};

SceneLayout make_scene_layout(const SceneConfig& config, std::uint64_t clip_seed);
SceneState scene_state_at(const SceneConfig& config, const SceneLayout& layout, int t);

// Triangle-wave reflection of `p` into [lo, hi].
double reflect_into(double p, double lo, double hi);

// Color and class at a continuous scene point; shapes later in the list are drawn on top.
std::array<std::uint8_t, 3> scene_color_at(const SceneState& state, double px, double py);
int scene_class_at(const SceneState& state, double px, double py);

const std::array<std::uint8_t, 3>& class_color(int class_id);
// Nearest palette entry for an 8-bit color.
int class_from_color(std::uint8_t r, std::uint8_t g, std::uint8_t b);

Image8 render_exo(const SceneState& state);
Image8 render_ego(const SceneState& state);
Image8 render_semantic(const SceneState& state);

// Deterministic: identical (config, clip_seed) yields bitwise-identical output.
PairedSample generate_scene_clip(const SceneConfig& config, std::uint64_t clip_seed);

// Dominant non-background class of a semantic frame, or 0 if the frame is all background.
int ego_frame_label(const Frame& semantic_frame);

struct ClipRecord {
  std::string clip_id;
  std::string split;
  std::int64_t length = 0;
  std::vector<std::string> exo, ego, sem;  // paths relative to the dataset root
};

struct DatasetManifest {
  std::vector<ClipRecord> clips;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::optional<SceneConfig> scene;

  // Throws DataError on duplicate clip ids or inconsistent records.
  void validate() const;
};

void to_json(nlohmann::json& j, const DatasetManifest& m);
// Throws DataError on malformed content.
DatasetManifest manifest_from_json(const nlohmann::json& j);

// One record per sample, tagged with `split`; frame paths follow the layout above.
DatasetManifest make_manifest(const std::vector<PairedSample>& samples, const std::string& split,
                              const SceneConfig& config);
void append_manifest(DatasetManifest& into, const DatasetManifest& more);

// manifest.clips[k] describes samples[k]. Throws DataError or IoError.
void write_dataset(const std::vector<PairedSample>& samples, const DatasetManifest& manifest,
                   const std::filesystem::path& root);

DatasetManifest read_manifest(const std::filesystem::path& root);

// Samples of `split`, validated and ordered by clip_id. Throws DataError.
std::vector<PairedSample> load_paired_dataset(const std::filesystem::path& root, const std::string& split,
                                              const SampleExpectations& expect = {});

// gen-data convenience: `n_train` + `n_test` clips with consecutive clip seeds.
DatasetManifest generate_dataset(const SceneConfig& config, int n_train, int n_test,
                                 const std::filesystem::path& root);

}  // namespace stagan
