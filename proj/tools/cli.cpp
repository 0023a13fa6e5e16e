#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "stagan/checkpoint.hpp"
#include "stagan/config.hpp"
#include "stagan/error.hpp"
#include "stagan/pipeline.hpp"
#include "stagan/synthdata.hpp"
#include "stagan/trainer.hpp"

namespace fs = std::filesystem;

namespace stagan::cli {

namespace {

struct CommonOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> ablation;
  std::optional<int> image_size;
};

void add_common(CLI::App* cmd, CommonOptions& c) {
  cmd->add_option("--seed", c.seed, "Random seed");
  cmd->add_option("--ablation", c.ablation, "Ablation setting A-F")
      ->check(CLI::IsMember({"A", "B", "C", "D", "E", "F"}));
  cmd->add_option("--image-size", c.image_size, "Square frame size in pixels")->check(CLI::PositiveNumber);
}

struct GenDataOptions {
  std::string out;
  std::string config;
  int train_clips = 32;
  int test_clips = 8;
  std::optional<int> clip_length;
  std::optional<int> shapes;
  std::optional<int> classes;
};

struct TrainOptions {
  std::string config;
  std::string data;
  std::string out;
  std::string log;
  std::optional<std::int64_t> steps;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<int> clip_length;
  std::optional<double> lr;
  std::optional<std::int64_t> checkpoint_every;
  std::optional<std::string> fusion_input;
  bool no_augment = false;
};

struct EvalOptions {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::string json_out;
};

struct SynthOptions {
  std::string checkpoint;
  std::string input;
  std::string out;
  bool attention = false;
};

int gen_data(const GenDataOptions& o, const CommonOptions& c, std::ostream& out) {
  SceneConfig scene;
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw ConfigError("cannot open scene config: " + o.config);
    try {
      scene = nlohmann::json::parse(in).get<SceneConfig>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed scene config: ") + e.what());
    }
  }
  if (c.seed) scene.seed = *c.seed;
  if (c.image_size) scene.image_size = *c.image_size;
  if (o.clip_length) scene.clip_length = *o.clip_length;
  if (o.shapes) scene.n_shapes = *o.shapes;
  if (o.classes) scene.n_classes = *o.classes;
  const auto manifest = generate_dataset(scene, o.train_clips, o.test_clips, o.out);
  out << "wrote " << manifest.clips.size() << " clips to " << o.out << " (config " << manifest.config_hash << ")\n";
  return kOk;
}

int train_cmd(const TrainOptions& o, const CommonOptions& c, std::ostream& out) {
  TrainConfig cfg = o.config.empty() ? TrainConfig{} : load_train_config(o.config);
  if (!o.data.empty()) cfg.data_root = o.data;
  if (c.seed) cfg.seed = *c.seed;
  if (c.ablation) cfg.ablation = ablation_from_string(*c.ablation);
  if (c.image_size) cfg.set_image_size(*c.image_size);
  if (o.steps) cfg.max_steps = *o.steps;
  if (o.epochs) cfg.epochs = *o.epochs;
  if (o.batch_size) cfg.batch_size = *o.batch_size;
  if (o.clip_length) cfg.clip_length = *o.clip_length;
  if (o.lr) cfg.learning_rate = *o.lr;
  if (o.checkpoint_every) cfg.checkpoint_every = *o.checkpoint_every;
  if (o.fusion_input) {
    cfg.fusion.input = fusion_input_from_string(*o.fusion_input);
    cfg.fusion.in_channels = cfg.fusion.input == FusionInput::kFrames ? 3 : cfg.generator.base_width;
  }
  if (o.no_augment) cfg.augment = false;
  if (!o.out.empty()) cfg.checkpoint_dir = o.out;
  if (cfg.checkpoint_dir.empty()) cfg.checkpoint_dir = "checkpoints";
  if (!o.log.empty()) cfg.log_path = o.log;
  if (cfg.log_path.empty()) cfg.log_path = (fs::path(cfg.checkpoint_dir) / "train_log.jsonl").string();

  const auto result = train(cfg);
  if (!result.reports.empty()) {
    out << "step " << result.reports.size() << " total " << result.reports.back().total << '\n';
  }
  out << "checkpoint " << result.checkpoint.string() << '\n';
  return kOk;
}

void check_against_checkpoint(const StaganModel& model, const CommonOptions& c) {
  if (c.ablation && ablation_from_string(*c.ablation) != model.config.ablation) {
    throw ConfigError("checkpoint was trained with ablation " + to_string(model.config.ablation) + ", not " +
                      *c.ablation);
  }
  if (c.image_size && *c.image_size != model.config.generator.image_size) {
    throw ConfigError("checkpoint expects image size " + std::to_string(model.config.generator.image_size));
  }
}

int eval_cmd(const EvalOptions& o, const CommonOptions& c, std::ostream& out) {
  auto model = model_from_checkpoint(load_checkpoint(o.checkpoint));
  check_against_checkpoint(model, c);
  const auto data_root = o.data.empty() ? model.config.data_root : o.data;
  SampleExpectations expect;
  expect.image_size = model.config.generator.image_size;
  const auto samples = load_paired_dataset(data_root, o.split, expect);
  EmbeddingTrainOptions emb;
  if (c.seed) emb.seed = *c.seed;
  const auto report = evaluate_model(model, samples, emb);
  out << report.format_table(to_string(model.config.ablation));
  if (!o.json_out.empty()) {
    std::ofstream f(o.json_out);
    if (!f) throw IoError("cannot write report", o.json_out);
    f << report.to_json().dump(2) << '\n';
  }
  return kOk;
}

int synth_cmd(const SynthOptions& o, const CommonOptions& c, std::ostream& out) {
  auto model = model_from_checkpoint(load_checkpoint(o.checkpoint));
  check_against_checkpoint(model, c);
  const auto [exo, sem] = read_input_clip(o.input);
  const auto frames = synthesize_to_dir(model, exo, sem, o.out, o.attention);
  out << "wrote " << frames.size() << " frames to " << o.out << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exocentric to egocentric video synthesis", "stagan"};
  app.require_subcommand(1);

  CommonOptions common;
  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Render a synthetic paired dataset");
  gen_cmd->add_option("--out", gen.out, "Dataset directory")->required();
  gen_cmd->add_option("--config", gen.config, "Scene config JSON");
  gen_cmd->add_option("--clips", gen.train_clips, "Training clips")->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--test-clips", gen.test_clips, "Test clips")->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--clip-length", gen.clip_length, "Frames per clip");
  gen_cmd->add_option("--shapes", gen.shapes, "Moving shapes per scene");
  gen_cmd->add_option("--classes", gen.classes, "Semantic classes including background");
  add_common(gen_cmd, common);

  TrainOptions tr;
  auto* train_app = app.add_subcommand("train", "Train a model");
  train_app->add_option("--config", tr.config, "Train config JSON");
  train_app->add_option("--data", tr.data, "Dataset directory");
  train_app->add_option("--out", tr.out, "Checkpoint directory (default ./checkpoints)");
  train_app->add_option("--log", tr.log, "JSON-lines loss log");
  train_app->add_option("--steps", tr.steps, "Stop after this many steps")->check(CLI::PositiveNumber);
  train_app->add_option("--epochs", tr.epochs, "Epochs")->check(CLI::PositiveNumber);
  train_app->add_option("--batch-size", tr.batch_size, "Clips per batch")->check(CLI::PositiveNumber);
  train_app->add_option("--clip-length", tr.clip_length, "Frames per training window")
      ->check(CLI::PositiveNumber);
  train_app->add_option("--lr", tr.lr, "Learning rate")->check(CLI::PositiveNumber);
  train_app->add_option("--checkpoint-every", tr.checkpoint_every, "Checkpoint period in steps");
  train_app->add_option("--fusion-input", tr.fusion_input, "frames or decoder_features")
      ->check(CLI::IsMember({"frames", "decoder_features"}));
  train_app->add_flag("--no-augment", tr.no_augment, "Disable flips and random crops");
  add_common(train_app, common);

  EvalOptions ev;
  auto* eval_app = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  eval_app->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory")->required();
  eval_app->add_option("--data", ev.data, "Dataset directory (defaults to the training root)");
  eval_app->add_option("--split", ev.split, "Split name");
  eval_app->add_option("--json", ev.json_out, "Write the report as JSON");
  add_common(eval_app, common);

  SynthOptions sy;
  auto* synth_app = app.add_subcommand("synth", "Synthesize an egocentric clip");
  synth_app->add_option("--checkpoint", sy.checkpoint, "Checkpoint directory")->required();
  synth_app->add_option("--input", sy.input, "Directory with exo/ and sem/ PNG frames")->required();
  synth_app->add_option("--out", sy.out, "Output directory")->required();
  synth_app->add_flag("--attention", sy.attention, "Also write attention maps");
  add_common(synth_app, common);

  std::vector<const char*> argv{"stagan"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (gen_cmd->parsed()) return gen_data(gen, common, out);
    if (train_app->parsed()) return train_cmd(tr, common, out);
    if (eval_app->parsed()) return eval_cmd(ev, common, out);
    if (synth_app->parsed()) return synth_cmd(sy, common, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumericError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace stagan::cli
