#include <gtest/gtest.h>

#include "stagan/error.hpp"
#include "stagan/networks.hpp"
#include "support.hpp"

using namespace stagan;
using stagan::testing::uniform_pm1;

namespace {

bool same_parameters(const torch::nn::Module& a, const torch::nn::Module& b) {
  const auto pa = a.named_parameters();
  const auto pb = b.named_parameters();
  if (pa.size() != pb.size()) return false;
  for (const auto& item : pa) {
    if (!torch::equal(item.value(), pb[item.key()])) return false;
  }
  return true;
}

}  // namespace

TEST(GeneratorConfig, DepthMustFitImageSize) {
  GeneratorConfig c{64, 7, 32, 6, 3};
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(UNetGenerator{c}, ConfigError);
  EXPECT_NO_THROW(GeneratorConfig::full_scale().validate());
  EXPECT_EQ(GeneratorConfig::full_scale().image_size, 256);
  EXPECT_EQ(GeneratorConfig::full_scale().depth, 8);
  GeneratorConfig odd{96, 6, 32, 6, 3};
  EXPECT_THROW(odd.validate(), ConfigError);
}

TEST(GeneratorConfig, WidthDoublesThenSaturates) {
  GeneratorConfig c;
  EXPECT_EQ(c.width_at(0), 32);
  EXPECT_EQ(c.width_at(1), 64);
  EXPECT_EQ(c.width_at(3), 256);
  EXPECT_EQ(c.width_at(5), 256);
}

TEST(Generator, FullScaleBuilds) {
  auto g = build_generator(GeneratorConfig::full_scale(), 0);
  EXPECT_EQ(g->config().depth, 8);
}

TEST(Generator, SameSeedSameParameters) {
  GeneratorConfig c{32, 3, 8, 6, 3};
  auto a = build_generator(c, 42);
  auto b = build_generator(c, 42);
  auto d = build_generator(c, 43);
  EXPECT_TRUE(same_parameters(*a, *b));
  EXPECT_FALSE(same_parameters(*a, *d));
}

TEST(Generator, OutputShapeRangeAndFeatures) {
  GeneratorConfig c{64, 6, 16, 6, 3};
  auto g = build_generator(c, 1);
  const auto x = uniform_pm1({2, 3, 64, 64}, 1);
  const auto s = uniform_pm1({2, 3, 64, 64}, 2);
  const auto out = generator_forward(g, x, s);
  EXPECT_EQ(out.image.sizes(), (std::vector<std::int64_t>{2, 3, 64, 64}));
  EXPECT_LE(out.image.max().item<float>(), 1.0f);
  EXPECT_GE(out.image.min().item<float>(), -1.0f);
  ASSERT_EQ(out.features.size(), 6u);
  EXPECT_EQ(out.features.back().sizes(), (std::vector<std::int64_t>{2, 16, 64, 64}));
  EXPECT_EQ(out.features.front().size(2), 2);
}

TEST(Generator, Deterministic) {
  auto g = build_generator(GeneratorConfig{32, 3, 8, 6, 3}, 5);
  const auto x = uniform_pm1({1, 3, 32, 32}, 3);
  const auto s = uniform_pm1({1, 3, 32, 32}, 4);
  EXPECT_TRUE(torch::equal(generator_forward(g, x, s).image, generator_forward(g, x, s).image));
}

TEST(Generator, RejectsMismatchedInputs) {
  auto g = build_generator(GeneratorConfig{32, 3, 8, 6, 3}, 5);
  EXPECT_THROW(generator_forward(g, torch::zeros({1, 3, 32, 32}), torch::zeros({1, 3, 16, 16})), ShapeError);
  EXPECT_THROW(generator_forward(g, torch::zeros({1, 3, 64, 64}), torch::zeros({1, 3, 64, 64})), ShapeError);
}

TEST(Discriminator, PatchGridSizes) {
  EXPECT_EQ(patch_grid_size(64, 3), 6);
  EXPECT_EQ(patch_grid_size(256, 3), 30);
  EXPECT_EQ(patch_grid_size(8, 1), 2);
}

TEST(Discriminator, SpatialGridAt64And256) {
  auto d64 = build_spatial_discriminator(DiscriminatorConfig{6, 8, 3}, 64, 0);
  const auto a = uniform_pm1({2, 3, 64, 64}, 1);
  EXPECT_EQ(discriminator_forward_spatial(d64, a, a).sizes(), (std::vector<std::int64_t>{2, 1, 6, 6}));
  auto d256 = build_spatial_discriminator(DiscriminatorConfig{6, 8, 3}, 256, 0);
  const auto b = uniform_pm1({1, 3, 256, 256}, 2);
  EXPECT_EQ(discriminator_forward_spatial(d256, b, b).sizes(), (std::vector<std::int64_t>{1, 1, 30, 30}));
}

TEST(Discriminator, IdenticalCopyGivesIdenticalOutput) {
  auto d = build_spatial_discriminator(DiscriminatorConfig{6, 8, 3}, 64, 3);
  const auto x = uniform_pm1({1, 3, 64, 64}, 4);
  const auto y = uniform_pm1({1, 3, 64, 64}, 5);
  EXPECT_TRUE(torch::equal(discriminator_forward_spatial(d, x, y), discriminator_forward_spatial(d, x, y.clone())));
}

TEST(Discriminator, TemporalChannelsAndGrid) {
  auto d = build_temporal_discriminator(DiscriminatorConfig{6, 8, 3}, 5, 64, 7);
  EXPECT_EQ(d->config().in_channels, 18);
  const auto anchor = uniform_pm1({1, 3, 64, 64}, 1);
  const auto seq = uniform_pm1({1, 5, 3, 64, 64}, 2);
  const auto out = discriminator_forward_temporal(d, anchor, seq);
  EXPECT_EQ(out.sizes(), (std::vector<std::int64_t>{1, 1, 6, 6}));
  EXPECT_TRUE(torch::equal(out, discriminator_forward_temporal(d, anchor, seq)));
}

TEST(Discriminator, TemporalIsOrderSensitive) {
  auto d = build_temporal_discriminator(DiscriminatorConfig{6, 8, 3}, 5, 64, 8);
  const auto anchor = uniform_pm1({1, 3, 64, 64}, 3);
  const auto seq = uniform_pm1({1, 5, 3, 64, 64}, 4);
  const auto permuted = seq.index_select(1, torch::tensor({1, 0, 2, 4, 3}, torch::kLong));
  const auto a = discriminator_forward_temporal(d, anchor, seq);
  const auto b = discriminator_forward_temporal(d, anchor, permuted);
  EXPECT_GT((a - b).abs().max().item<float>(), 0.0f);
}

TEST(Discriminator, TemporalRejectsWrongLength) {
  auto d = build_temporal_discriminator(DiscriminatorConfig{6, 8, 3}, 5, 64, 8);
  EXPECT_THROW(discriminator_forward_temporal(d, torch::zeros({1, 3, 64, 64}), torch::zeros({1, 4, 3, 64, 64})),
               ShapeError);
}

TEST(Discriminator, TooManyDownsamplesRejected) {
  EXPECT_THROW(build_spatial_discriminator(DiscriminatorConfig{6, 8, 5}, 32, 0), ConfigError);
}

TEST(Init, WeightStatistics) {
  auto g = build_generator(GeneratorConfig{64, 6, 32, 6, 3}, 9);
  std::vector<torch::Tensor> weights;
  for (const auto& p : g->named_parameters()) {
    if (p.value().dim() == 4) weights.push_back(p.value().flatten());
    if (p.key().find("bias") != std::string::npos) EXPECT_EQ(p.value().abs().max().item<float>(), 0.0f) << p.key();
  }
  const auto all = torch::cat(weights);
  EXPECT_NEAR(all.mean().item<double>(), 0.0, 1e-3);
  EXPECT_NEAR(all.std().item<double>(), 0.02, 1e-3);
}
