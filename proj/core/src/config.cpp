#include "stagan/config.hpp"

#include <fstream>

#include "stagan/error.hpp"

using nlohmann::json;

namespace stagan {

std::string to_string(Ablation a) { return std::string(1, static_cast<char>('A' + static_cast<int>(a))); }

Ablation ablation_from_string(const std::string& s) {
  if (s.size() == 1 && s[0] >= 'A' && s[0] <= 'F') return static_cast<Ablation>(s[0] - 'A');
  throw ConfigError("ablation must be one of A-F, got '" + s + "'");
}

AblationSpec ablation_spec(Ablation a) {
  AblationSpec spec;
  switch (a) {
    case Ablation::A: spec.branches = {Branch::kSpatialDown, Branch::kSpatialUp}; break;
    case Ablation::B: spec.branches = {Branch::kTemporalDown, Branch::kTemporalUp}; break;
    case Ablation::C: spec.branches = {Branch::kTemporalDown, Branch::kSpatialDown}; break;
    case Ablation::D:
    case Ablation::E:
    case Ablation::F: spec.branches = {kAllBranches.begin(), kAllBranches.end()}; break;
  }
  spec.temporal_discriminator = a == Ablation::E || a == Ablation::F;
  spec.attention_fusion = a == Ablation::F;
  return spec;
}

void TrainConfig::validate() const {
  generator.validate();
  fusion.validate();
  weights.validate();
  if (fusion.image_size != generator.image_size) throw ConfigError("fusion and generator image sizes differ");
  if (fusion.input == FusionInput::kDecoderFeatures && fusion.in_channels != generator.base_width) {
    throw ConfigError("decoder-feature fusion needs in_channels == generator base_width");
  }
  if (fusion.input == FusionInput::kFrames && fusion.in_channels != 3) {
    throw ConfigError("frame fusion needs in_channels == 3");
  }
  DiscriminatorConfig d = discriminator;
  d.validate(generator.image_size);
  if (clip_length < 1) throw ConfigError("clip_length must be positive");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (max_steps && *max_steps < 1) throw ConfigError("max_steps must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
  if (scene) {
    scene->validate(generator.depth);
    if (scene->image_size != generator.image_size) throw ConfigError("scene and generator image sizes differ");
    if (scene->clip_length < clip_length) throw ConfigError("scene clips are shorter than clip_length");
  }
}

TrainConfig& TrainConfig::set_image_size(int size) {
  generator.image_size = size;
  // Shrink the U-Net when the new size cannot carry the configured depth.
  while (generator.depth > 2 && (size % (1 << generator.depth) != 0 || size < (1 << generator.depth))) {
    --generator.depth;
  }
  fusion.image_size = size;
  if (scene) scene->image_size = size;
  return *this;
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"data_root", c.data_root},
           {"train_split", c.train_split},
           {"test_split", c.test_split},
           {"generator", c.generator},
           {"discriminator", c.discriminator},
           {"fusion", c.fusion},
           {"weights", c.weights},
           {"ablation", to_string(c.ablation)},
           {"adversarial_form", c.adversarial_form == AdversarialForm::kMinimax ? "minimax" : "non_saturating"},
           {"discriminator_on_branches", c.discriminator_on_branches},
           {"clip_length", c.clip_length},
           {"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"learning_rate", c.learning_rate},
           {"beta1", c.beta1},
           {"beta2", c.beta2},
           {"seed", c.seed},
           {"augment", c.augment},
           {"checkpoint_dir", c.checkpoint_dir},
           {"log_path", c.log_path},
           {"checkpoint_every", c.checkpoint_every}};
  j["max_steps"] = c.max_steps ? json(*c.max_steps) : json(nullptr);
  j["scene"] = c.scene ? json(*c.scene) : json(nullptr);
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  try {
    c.data_root = j.value("data_root", c.data_root);
    c.train_split = j.value("train_split", c.train_split);
    c.test_split = j.value("test_split", c.test_split);
    if (j.contains("scene") && !j["scene"].is_null()) c.scene = j["scene"].get<SceneConfig>();
    if (j.contains("generator")) c.generator = j["generator"].get<GeneratorConfig>();
    if (j.contains("discriminator")) {
      DiscriminatorConfig d = c.discriminator;
      const auto& jd = j["discriminator"];
      d.base_width = jd.value("base_width", d.base_width);
      d.n_downsample = jd.value("n_downsample", d.n_downsample);
      c.discriminator = d;
    }
    if (j.contains("fusion")) c.fusion = j["fusion"].get<FusionConfig>();
    if (j.contains("weights")) c.weights = j["weights"].get<LossWeights>();
    c.ablation = ablation_from_string(j.value("ablation", to_string(c.ablation)));
    const auto form = j.value("adversarial_form", std::string("non_saturating"));
    if (form == "minimax") {
      c.adversarial_form = AdversarialForm::kMinimax;
    } else if (form == "non_saturating") {
      c.adversarial_form = AdversarialForm::kNonSaturating;
    } else {
      throw ConfigError("adversarial_form must be 'non_saturating' or 'minimax'");
    }
    c.discriminator_on_branches = j.value("discriminator_on_branches", c.discriminator_on_branches);
    c.clip_length = j.value("clip_length", c.clip_length);
    c.epochs = j.value("epochs", c.epochs);
    if (j.contains("max_steps") && !j["max_steps"].is_null()) c.max_steps = j["max_steps"].get<std::int64_t>();
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.seed = j.value("seed", c.seed);
    c.augment = j.value("augment", c.augment);
    c.checkpoint_dir = j.value("checkpoint_dir", c.checkpoint_dir);
    c.log_path = j.value("log_path", c.log_path);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed train config: ") + e.what());
  }
  // Keep fusion consistent with the generator unless explicitly overridden.
  if (!j.contains("fusion") || !j["fusion"].contains("image_size")) c.fusion.image_size = c.generator.image_size;
  if (c.fusion.input == FusionInput::kDecoderFeatures && (!j.contains("fusion") || !j["fusion"].contains("in_channels"))) {
    c.fusion.in_channels = c.generator.base_width;
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
  }
  return train_config_from_json(j);
}

}  // namespace stagan
