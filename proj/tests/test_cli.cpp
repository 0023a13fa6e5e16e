#include <cmath>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "stagan/checkpoint.hpp"
#include "stagan/synthdata.hpp"
#include "support.hpp"

using stagan::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = stagan::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// Small dataset and a 50-step setting A checkpoint shared by the tests below.
class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli");
    const auto data = (*dir_ / "data").string();
    const auto gen = run({"gen-data", "--seed", "7", "--clips", "8", "--test-clips", "2", "--clip-length", "3",
                          "--image-size", "32", "--out", data});
    ASSERT_EQ(gen.code, 0) << gen.err;
    const auto tr = run({"train", "--data", data, "--steps", "50", "--image-size", "32", "--ablation", "A",
                         "--batch-size", "1", "--clip-length", "3", "--out", (*dir_ / "ckpt").string()});
    ASSERT_EQ(tr.code, 0) << tr.err;
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static fs::path path(const std::string& rel) { return *dir_ / rel; }
  static TempDir* dir_;
};

TempDir* CliPipeline::dir_ = nullptr;

}  // namespace

TEST(Cli, HelpExitsZero) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("gen-data"), std::string::npos);
}

TEST(Cli, MissingOrUnknownSubcommandIsUsageError) {
  EXPECT_EQ(run({}).code, stagan::cli::kUsage);
  const auto r = run({"render"});
  EXPECT_EQ(r.code, stagan::cli::kUsage);
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, InvalidAblationIsUsageError) {
  TempDir dir("cli_ablation");
  const auto r = run({"train", "--data", dir.path().string(), "--ablation", "G"});
  EXPECT_EQ(r.code, stagan::cli::kUsage);
}

TEST(Cli, UnknownFlagIsUsageError) {
  EXPECT_EQ(run({"gen-data", "--out", "x", "--frobnicate"}).code, stagan::cli::kUsage);
}

TEST(Cli, MissingDatasetIsDataError) {
  TempDir dir("cli_missing");
  const auto r = run({"train", "--data", (dir / "nothing").string(), "--steps", "1", "--image-size", "32"});
  EXPECT_EQ(r.code, stagan::cli::kDataError);
}

TEST_F(CliPipeline, TrainWroteCheckpointAndLog) {
  EXPECT_TRUE(fs::exists(path("ckpt/latest/manifest.json")));
  EXPECT_TRUE(fs::exists(path("ckpt/train_log.jsonl")));
  EXPECT_EQ(stagan::load_checkpoint(path("ckpt/latest")).step, 50);
}

TEST_F(CliPipeline, EvalProducesFiniteReport) {
  const auto json_path = path("report.json");
  const auto r = run({"eval", "--checkpoint", path("ckpt/latest").string(), "--json", json_path.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("SSIM"), std::string::npos);
  std::ifstream in(json_path);
  const auto j = nlohmann::json::parse(in);
  for (const char* key : {"ssim", "psnr", "sd", "kl_mean", "fid", "top1_all"}) {
    EXPECT_TRUE(std::isfinite(j.at(key).get<double>())) << key;
  }
  EXPECT_EQ(j.at("frames").get<int>(), 6);
}

TEST_F(CliPipeline, EvalOnUntrainedCheckpoint) {
  const auto data = path("data").string();
  const auto untrained = path("untrained").string();
  auto cfg = stagan::TrainConfig{};
  cfg.set_image_size(32);
  cfg.ablation = stagan::Ablation::A;
  cfg.clip_length = 3;
  cfg.data_root = data;
  stagan::save_checkpoint(stagan::capture_model(stagan::build_model(cfg)), untrained);
  const auto r = run({"eval", "--checkpoint", untrained});
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(CliPipeline, EvalRejectsMismatchedAblation) {
  const auto r = run({"eval", "--checkpoint", path("ckpt/latest").string(), "--ablation", "F"});
  EXPECT_EQ(r.code, stagan::cli::kUsage);
}

TEST_F(CliPipeline, SynthWritesOneFramePerInput) {
  const auto rec = stagan::read_manifest(path("data")).clips.back();
  const auto clip_dir = path("data/" + rec.split + "/" + rec.clip_id);
  const auto r =
      run({"synth", "--checkpoint", path("ckpt/latest").string(), "--input", clip_dir.string(), "--out",
           path("synth").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  int frames = 0;
  for (const auto& e : fs::directory_iterator(path("synth"))) frames += e.path().extension() == ".png";
  EXPECT_EQ(frames, 3);
}
