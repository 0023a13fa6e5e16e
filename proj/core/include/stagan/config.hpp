#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stagan/branches.hpp"
#include "stagan/fusion.hpp"
#include "stagan/losses.hpp"
#include "stagan/networks.hpp"
#include "stagan/synthdata.hpp"

namespace stagan {

// Ablation ladder: each setting adds one component to the previous one.
//   A  spatial branches (down + up), D_S, averaged output
//   B  temporal branches (down + up), D_S, averaged output
//   C  downstream temporal + downstream spatial, averaged output
//   D  all four branches, averaged output
//   E  D plus the temporal discriminator
//   F  E plus attention fusion (full model)
enum class Ablation { A, B, C, D, E, F };

std::string to_string(Ablation a);
Ablation ablation_from_string(const std::string& s);  // throws ConfigError

struct AblationSpec {
  std::vector<Branch> branches;
  bool temporal_discriminator = false;
  bool attention_fusion = false;
};

AblationSpec ablation_spec(Ablation a);

struct TrainConfig {
  std::string data_root;
  std::string train_split = "train";
  std::string test_split = "test";
  std::optional<SceneConfig> scene;  // synthesize data_root first when set

  GeneratorConfig generator;
  DiscriminatorConfig discriminator{6, 32, 3};  // in_channels is derived per discriminator
  FusionConfig fusion;
  LossWeights weights;
  Ablation ablation = Ablation::F;
  AdversarialForm adversarial_form = AdversarialForm::kNonSaturating;
  bool discriminator_on_branches = true;

  int clip_length = 5;
  int epochs = 200;
  std::optional<std::int64_t> max_steps;  // overrides epochs when set
  int batch_size = 8;
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  std::uint64_t seed = 0;
  bool augment = true;

  std::string checkpoint_dir;
  std::string log_path;            // JSON lines; empty disables
  std::int64_t checkpoint_every = 0;  // steps; 0 saves at the end only

  void validate() const;  // throws ConfigError
  // Sets generator, fusion and scene sizes together; lowers generator depth if needed.
  TrainConfig& set_image_size(int size);
};

void to_json(nlohmann::json& j, const TrainConfig& c);
// Missing fields keep their defaults; throws ConfigError on bad values.
TrainConfig train_config_from_json(const nlohmann::json& j);
TrainConfig load_train_config(const std::string& path);

}  // namespace stagan
