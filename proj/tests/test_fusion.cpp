#include <gtest/gtest.h>

#include "stagan/error.hpp"
#include "stagan/fusion.hpp"
#include "support.hpp"

using namespace stagan;
using stagan::testing::uniform_pm1;

namespace {

GenerationBundle random_bundle(std::int64_t b, std::int64_t t, std::int64_t size, std::uint64_t seed) {
  GenerationBundle bundle;
  for (auto br : kAllBranches) {
    GeneratedSequence seq;
    seq.frames = uniform_pm1({b, t, 3, size, size}, seed + static_cast<std::uint64_t>(br));
    seq.tag = br;
    bundle.sequences.push_back(seq);
  }
  return bundle;
}

FusionConfig small_config(int size = 16) {
  FusionConfig c;
  c.image_size = size;
  c.feature_width = 4;
  return c;
}

}  // namespace

TEST(FusionConfig, InputSwitchParsing) {
  EXPECT_EQ(fusion_input_from_string("frames"), FusionInput::kFrames);
  EXPECT_EQ(fusion_input_from_string("decoder_features"), FusionInput::kDecoderFeatures);
  EXPECT_THROW(fusion_input_from_string("pixels"), ConfigError);
  FusionConfig c;
  c.input = FusionInput::kDecoderFeatures;
  c.in_channels = 32;
  const nlohmann::json j = c;
  const auto back = j.get<FusionConfig>();
  EXPECT_EQ(back.input, FusionInput::kDecoderFeatures);
  EXPECT_EQ(back.in_channels, 32);
}

TEST(FusionNet, SameSeedSameParameters) {
  auto a = build_fusion_net(small_config(), 3);
  auto b = build_fusion_net(small_config(), 3);
  const auto pb = b->named_parameters();
  for (const auto& p : a->named_parameters()) EXPECT_TRUE(torch::equal(p.value(), pb[p.key()])) << p.key();
}

TEST(FusionNet, FourAttentionChannelsFiniteOnZeros) {
  auto net = build_fusion_net(small_config(), 1);
  std::array<torch::Tensor, 4> zeros{torch::zeros({2, 3, 16, 16}), torch::zeros({2, 3, 16, 16}),
                                     torch::zeros({2, 3, 16, 16}), torch::zeros({2, 3, 16, 16})};
  const auto a = net->attention(zeros);
  EXPECT_EQ(a.sizes(), (std::vector<std::int64_t>{2, 4, 16, 16}));
  EXPECT_TRUE(torch::isfinite(a).all().item<bool>());
  EXPECT_EQ(net->head()->options.out_channels(), 4);
}

TEST(Fuse, AttentionSumsToOne) {
  auto net = build_fusion_net(small_config(), 2);
  const auto r = fuse(net, random_bundle(2, 3, 16, 10));
  EXPECT_EQ(r.frames.sizes(), (std::vector<std::int64_t>{2, 3, 3, 16, 16}));
  EXPECT_EQ(r.attention.sizes(), (std::vector<std::int64_t>{2, 3, 4, 16, 16}));
  EXPECT_LE((r.attention.sum(2) - 1).abs().max().item<float>(), 1e-5f);
}

TEST(Fuse, IdenticalCandidatesReturnedExactly) {
  auto net = build_fusion_net(small_config(), 4);
  auto bundle = random_bundle(1, 2, 16, 20);
  for (auto& seq : bundle.sequences) seq.frames = bundle.sequences[0].frames.clone();
  EXPECT_TRUE(torch::equal(fuse(net, bundle).frames, bundle.sequences[0].frames));
}

TEST(Fuse, OneHotAttentionSelectsFirstBranchBitwise) {
  auto net = build_fusion_net(small_config(), 5);
  {
    torch::NoGradGuard ng;
    net->head()->weight.zero_();
    net->head()->bias.copy_(torch::tensor({100.0f, -100.0f, -100.0f, -100.0f}));
  }
  const auto bundle = random_bundle(1, 3, 16, 30);
  const auto r = fuse(net, bundle);
  EXPECT_TRUE(torch::equal(r.frames, bundle.at(Branch::kTemporalDown).frames));
}

TEST(Fuse, ConvexHullPerPixel) {
  auto net = build_fusion_net(small_config(), 6);
  const auto bundle = random_bundle(2, 2, 16, 40);
  const auto fused = fuse(net, bundle).frames;
  std::vector<torch::Tensor> stack;
  for (auto br : kAllBranches) stack.push_back(bundle.at(br).frames);
  const auto all = torch::stack(stack);
  EXPECT_TRUE((fused <= std::get<0>(all.max(0)) + 1e-6).all().item<bool>());
  EXPECT_TRUE((fused >= std::get<0>(all.min(0)) - 1e-6).all().item<bool>());
}

TEST(Fuse, RequiresAllFourBranches) {
  auto net = build_fusion_net(small_config(), 7);
  auto bundle = random_bundle(1, 2, 16, 50);
  bundle.sequences.pop_back();
  EXPECT_THROW(fuse(net, bundle), ShapeError);
}

TEST(Fuse, DecoderFeatureInput) {
  FusionConfig c = small_config();
  c.input = FusionInput::kDecoderFeatures;
  c.in_channels = 8;
  auto net = build_fusion_net(c, 8);
  auto bundle = random_bundle(1, 2, 16, 60);
  EXPECT_THROW(fuse(net, bundle), ShapeError);
  for (auto& seq : bundle.sequences) seq.features = torch::randn({1, 2, 8, 16, 16});
  const auto r = fuse(net, bundle);
  EXPECT_LE((r.attention.sum(2) - 1).abs().max().item<float>(), 1e-5f);
}

TEST(CombineCandidates, MatchesExplicitWeightedSum) {
  const auto cand = uniform_pm1({3, 4, 3, 5, 5}, 70);
  const auto att = torch::softmax(torch::randn({3, 4, 5, 5}), 1);
  const auto expected = (cand * att.unsqueeze(2)).sum(1);
  EXPECT_LE((combine_candidates(cand, att) - expected).abs().max().item<float>(), 1e-6f);
}
