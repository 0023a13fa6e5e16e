#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "stagan/error.hpp"
#include "stagan/losses.hpp"
#include "support.hpp"

using namespace stagan;
using stagan::testing::uniform_pm1;

namespace {

const double kLog2 = std::log(2.0);

// Critics that ignore their inputs and emit a constant logit grid.
SpatialCritic constant_spatial(double logit, int grid = 3) {
  return [=](const torch::Tensor& x, const torch::Tensor&) {
    return torch::full({x.size(0), 1, grid, grid}, logit, x.options());
  };
}

TemporalCritic constant_temporal(double logit, int grid = 3) {
  return [=](const torch::Tensor& anchor, const torch::Tensor&) {
    return torch::full({anchor.size(0), 1, grid, grid}, logit, anchor.options());
  };
}

// +10 on the real target, -10 otherwise: a clamped perfect discriminator.
SpatialCritic perfect_spatial(const torch::Tensor& real) {
  const auto flat = real.flatten(0, 1);
  return [flat](const torch::Tensor& x, const torch::Tensor& y) {
    const double v = torch::equal(y, flat) ? 10.0 : -10.0;
    return torch::full({x.size(0), 1, 2, 2}, v, x.options());
  };
}

TemporalCritic perfect_temporal(const torch::Tensor& real) {
  return [real](const torch::Tensor& anchor, const torch::Tensor& seq) {
    const double v = torch::equal(seq, real) ? 10.0 : -10.0;
    return torch::full({anchor.size(0), 1, 2, 2}, v, anchor.options());
  };
}

}  // namespace

TEST(LossWeights, DefaultsAndValidation) {
  LossWeights w;
  EXPECT_DOUBLE_EQ(w.lambda_u, 1.0);
  EXPECT_DOUBLE_EQ(w.lambda_d, 0.1);
  EXPECT_DOUBLE_EQ(w.lambda_n, 1.0);
  EXPECT_DOUBLE_EQ(w.lambda_p, 0.1);
  EXPECT_DOUBLE_EQ(w.lambda_g, 10.0);
  EXPECT_DOUBLE_EQ(w.lambda_r, 10.0);
  EXPECT_EQ(w.time_truncate, 3);
  EXPECT_NO_THROW(w.validate());
  w.lambda_g = -1;
  EXPECT_THROW(w.validate(), ConfigError);
  w = LossWeights{};
  w.time_truncate = 0;
  EXPECT_THROW(w.validate(), ConfigError);
  w = LossWeights{};
  w.lambda_r = std::numeric_limits<double>::infinity();
  EXPECT_THROW(w.validate(), ConfigError);
}

TEST(TemporalLoss, PerfectReconstructionLeavesAdversarialPart) {
  const auto x = uniform_pm1({2, 4, 3, 8, 8}, 1);
  const auto y = uniform_pm1({2, 4, 3, 8, 8}, 2);
  const GeneratedSequence y1{y, {}, Branch::kTemporalDown};
  const GeneratedSequence y2{y, {}, Branch::kTemporalUp};
  const LossWeights w;
  const auto l = temporal_loss(constant_spatial(0.0), x, y, y1, y2, w);
  EXPECT_NEAR(l.down.item<double>(), w.lambda_u * 4 * kLog2, 1e-6);
  EXPECT_NEAR(l.up.item<double>(), w.lambda_d * 4 * kLog2, 1e-6);
  EXPECT_NEAR(l.total.item<double>(), (w.lambda_u + w.lambda_d) * 4 * kLog2, 1e-6);
}

TEST(TemporalLoss, ZeroWeightsAnnihilate) {
  LossWeights w;
  w.lambda_u = w.lambda_d = 0;
  const auto x = uniform_pm1({1, 3, 3, 8, 8}, 3);
  const auto y = uniform_pm1({1, 3, 3, 8, 8}, 4);
  const GeneratedSequence a{uniform_pm1({1, 3, 3, 8, 8}, 5), {}, Branch::kTemporalDown};
  const GeneratedSequence b{uniform_pm1({1, 3, 3, 8, 8}, 6), {}, Branch::kTemporalUp};
  EXPECT_EQ(temporal_loss(constant_spatial(0.7), x, y, a, b, w).total.item<double>(), 0.0);
}

TEST(TemporalLoss, HandComputedL1Term) {
  const auto y = torch::zeros({1, 1, 3, 1, 1});
  const auto y_hat = torch::tensor({0.5f, -0.5f, 0.25f}).reshape({1, 1, 3, 1, 1});
  EXPECT_NEAR(sequence_l1(y, y_hat).item<double>(), 1.25 / 3.0, 1e-7);
  LossWeights w;
  const auto l = branch_generator_loss(Branch::kTemporalDown, constant_spatial(0.0), y, y, y_hat, w);
  EXPECT_NEAR(l.item<double>() - kLog2, 1.25 / 3.0, 1e-6);
}

TEST(TemporalLoss, LengthMismatchThrows) {
  const auto x = torch::zeros({1, 3, 3, 4, 4});
  const GeneratedSequence a{torch::zeros({1, 2, 3, 4, 4}), {}, Branch::kTemporalDown};
  EXPECT_THROW(temporal_loss(constant_spatial(0.0), x, x, a, a, LossWeights{}), ShapeError);
}

TEST(SpatialLoss, ConditioningIndexOracle) {
  // T = 5, i = 3, downstream, 1-based [1, 1, 1, 1, 2]
  std::vector<std::int64_t> got;
  for (std::int64_t t = 0; t < 5; ++t) got.push_back(conditioning_index(Branch::kSpatialDown, t, 5, 3));
  EXPECT_EQ(got, (std::vector<std::int64_t>{0, 0, 0, 0, 1}));
  for (std::int64_t len = 1; len <= 8; ++len) {
    for (int i = 1; i <= 5; ++i) {
      for (std::int64_t t = 0; t < len; ++t) {
        EXPECT_EQ(conditioning_index(Branch::kSpatialDown, t, len, i),
                  stagan::testing::reference_conditioning_index(true, t, len, i));
        EXPECT_EQ(conditioning_index(Branch::kSpatialUp, t, len, i),
                  stagan::testing::reference_conditioning_index(false, t, len, i));
        EXPECT_EQ(conditioning_index(Branch::kTemporalDown, t, len, i), t);
      }
    }
  }
}

TEST(SpatialLoss, TruncationBeyondLengthClampsToEnds) {
  LossWeights w;
  w.time_truncate = 9;
  const auto x = uniform_pm1({1, 3, 3, 4, 4}, 7);
  std::vector<torch::Tensor> seen;
  SpatialCritic spy = [&](const torch::Tensor& xf, const torch::Tensor&) {
    seen.push_back(xf.clone());
    return torch::zeros({xf.size(0), 1, 2, 2});
  };
  const auto y = uniform_pm1({1, 3, 3, 4, 4}, 8);
  const GeneratedSequence y3{uniform_pm1({1, 3, 3, 4, 4}, 9), {}, Branch::kSpatialDown};
  const GeneratedSequence y4{uniform_pm1({1, 3, 3, 4, 4}, 10), {}, Branch::kSpatialUp};
  const auto l = spatial_loss(spy, x, y, y3, y4, w);
  EXPECT_TRUE(std::isfinite(l.total.item<double>()));
  ASSERT_EQ(seen.size(), 2u);
  for (int t = 0; t < 3; ++t) {
    EXPECT_TRUE(torch::equal(seen[0][t], x[0][0]));
    EXPECT_TRUE(torch::equal(seen[1][t], x[0][2]));
  }
}

TEST(SpatialLoss, ZeroWeightsAnnihilate) {
  LossWeights w;
  w.lambda_n = w.lambda_p = 0;
  const auto x = uniform_pm1({1, 3, 3, 8, 8}, 11);
  const GeneratedSequence a{uniform_pm1({1, 3, 3, 8, 8}, 12), {}, Branch::kSpatialDown};
  const GeneratedSequence b{uniform_pm1({1, 3, 3, 8, 8}, 13), {}, Branch::kSpatialUp};
  EXPECT_EQ(spatial_loss(constant_spatial(0.3), x, x, a, b, w).total.item<double>(), 0.0);
}

TEST(AdversarialLosses, StubClosedForms) {
  const std::int64_t T = 4;
  const auto x = uniform_pm1({2, T, 3, 8, 8}, 14);
  const auto y = uniform_pm1({2, T, 3, 8, 8}, 15);
  const auto y_hat = uniform_pm1({2, T, 3, 8, 8}, 16);
  LossWeights w;
  const auto adv = adversarial_losses(constant_spatial(0.0), constant_temporal(0.0), x, y, y_hat, w);
  EXPECT_NEAR(adv.gen_spatial.item<double>(), T * kLog2, 1e-6);
  EXPECT_NEAR(adv.gen_temporal.item<double>(), w.lambda_g * 2 * kLog2, 1e-6);
  EXPECT_NEAR(adv.gen_total.item<double>(), T * kLog2 + w.lambda_g * 2 * kLog2, 1e-6);
  EXPECT_NEAR(adv.d_spatial.item<double>(), 2 * T * kLog2, 1e-6);
  EXPECT_NEAR(adv.d_temporal.item<double>(), w.lambda_g * 4 * kLog2, 1e-6);
}

TEST(AdversarialLosses, MinimaxFormAtZeroLogit) {
  const auto x = uniform_pm1({1, 2, 3, 8, 8}, 17);
  const auto adv =
      adversarial_generator_terms(constant_spatial(0.0), {}, x, x, x, LossWeights{}, AdversarialForm::kMinimax);
  EXPECT_NEAR(adv.gen_spatial.item<double>(), -2 * kLog2, 1e-6);
  EXPECT_FALSE(adv.gen_temporal.defined());
}

TEST(AdversarialLosses, ZeroTemporalWeightLeavesSpatialOnly) {
  LossWeights w;
  w.lambda_g = 0;
  const auto x = uniform_pm1({1, 3, 3, 8, 8}, 18);
  const auto y_hat = uniform_pm1({1, 3, 3, 8, 8}, 19);
  const auto adv = adversarial_losses(constant_spatial(0.4), constant_temporal(-1.0), x, x, y_hat, w);
  EXPECT_NEAR(adv.gen_total.item<double>(), adv.gen_spatial.item<double>(), 1e-9);
}

TEST(AdversarialLosses, PerfectDiscriminatorSaturates) {
  const auto x = uniform_pm1({1, 3, 3, 8, 8}, 20);
  const auto y = uniform_pm1({1, 3, 3, 8, 8}, 21);
  const auto y_hat = uniform_pm1({1, 3, 3, 8, 8}, 22);
  LossWeights w;
  const auto blind = adversarial_losses(constant_spatial(0.0), constant_temporal(0.0), x, y, y_hat, w);
  const auto sharp = adversarial_losses(perfect_spatial(y), perfect_temporal(y), x, y, y_hat, w);
  EXPECT_LT(sharp.d_spatial.item<double>(), 1e-3);
  EXPECT_LT(sharp.d_temporal.item<double>(), 1e-2);
  EXPECT_GT(sharp.gen_total.item<double>(), blind.gen_total.item<double>());
  EXPECT_GT(sharp.gen_spatial.item<double>(), 3 * 9.9);
}

TEST(AdversarialLosses, DiscriminatorTermsDetachFakes) {
  const auto x = uniform_pm1({1, 2, 3, 8, 8}, 23);
  auto y_hat = uniform_pm1({1, 2, 3, 8, 8}, 24).requires_grad_();
  auto logit = torch::zeros({1}, torch::requires_grad());
  SpatialCritic d = [&](const torch::Tensor& a, const torch::Tensor& b) {
    return (a.mean() + b.mean() + logit).expand({a.size(0), 1, 2, 2});
  };
  const auto adv = adversarial_discriminator_terms(d, {}, x, x, y_hat, LossWeights{});
  adv.d_spatial.backward();
  EXPECT_FALSE(y_hat.grad().defined());
  EXPECT_TRUE(logit.grad().defined());
}

TEST(ReconstructionLoss, HandCases) {
  const auto y = uniform_pm1({1, 3, 3, 4, 4}, 25);
  EXPECT_EQ(reconstruction_loss(y, y, 10.0).item<double>(), 0.0);
  const auto zeros = torch::zeros({1, 2, 3, 4, 4});
  const auto ones = torch::ones({1, 2, 3, 4, 4});
  EXPECT_NEAR(reconstruction_loss(zeros, ones, 10.0).item<double>(), 20.0, 1e-6);
  EXPECT_THROW(reconstruction_loss(zeros, torch::zeros({1, 3, 3, 4, 4}), 1.0), ShapeError);
}

TEST(ReconstructionLoss, MatchesBruteForceOracle) {
  for (std::uint64_t k = 0; k < 20; ++k) {
    const auto y = uniform_pm1({2, 3, 3, 5, 4}, 100 + k);
    const auto y_hat = uniform_pm1({2, 3, 3, 5, 4}, 200 + k);
    EXPECT_NEAR(reconstruction_loss(y, y_hat, 1.0).item<double>(),
                stagan::testing::brute_force_sequence_l1(y, y_hat), 1e-6);
  }
}

TEST(ReconstructionLoss, LinearInWeight) {
  const auto y = uniform_pm1({1, 2, 3, 4, 4}, 26);
  const auto y_hat = uniform_pm1({1, 2, 3, 4, 4}, 27);
  EXPECT_NEAR(reconstruction_loss(y, y_hat, 3.0).item<double>(), 3 * reconstruction_loss(y, y_hat, 1.0).item<double>(),
              1e-5);
}

TEST(TotalGeneratorLoss, SumsParts) {
  GeneratorLossParts parts;
  parts.adv_spatial = torch::tensor(1.0);
  parts.reconstruction = torch::tensor(2.0);
  parts.temporal_down = torch::tensor(3.0);
  parts.spatial_down = torch::tensor(4.0);
  const auto total = total_generator_loss(parts);
  EXPECT_DOUBLE_EQ(total.value.item<double>(), 10.0);
  EXPECT_DOUBLE_EQ(total.report.total, 10.0);
  EXPECT_FALSE(total.report.adv_temporal.has_value());
  EXPECT_DOUBLE_EQ(*total.report.spatial_down, 4.0);
}

TEST(TotalGeneratorLoss, NanNamesTheTerm) {
  GeneratorLossParts parts;
  parts.adv_spatial = torch::tensor(1.0);
  parts.spatial_up = torch::tensor(std::nan(""));
  try {
    total_generator_loss(parts);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.term(), "spatial_up");
  }
}

TEST(TotalGeneratorLoss, OnlyReconstructionWhenOtherWeightsZero) {
  LossWeights w;
  w.lambda_u = w.lambda_d = w.lambda_n = w.lambda_p = w.lambda_g = 0;
  const auto x = uniform_pm1({1, 2, 3, 4, 4}, 28);
  const auto y = uniform_pm1({1, 2, 3, 4, 4}, 29);
  const auto seq = uniform_pm1({1, 2, 3, 4, 4}, 30);
  GeneratorLossParts parts;
  parts.temporal_down = branch_generator_loss(Branch::kTemporalDown, constant_spatial(0.0), x, y, seq, w);
  parts.spatial_down = branch_generator_loss(Branch::kSpatialDown, constant_spatial(0.0), x, y, seq, w);
  parts.reconstruction = reconstruction_loss(y, seq, w.lambda_r);
  EXPECT_NEAR(total_generator_loss(parts).report.total, parts.reconstruction.item<double>(), 1e-6);
}

TEST(LossReport, JsonRoundTripOmitsAbsentTerms) {
  LossReport r;
  r.spatial_down = 1.5;
  r.total = 2.5;
  r.d_spatial = 0.25;
  const auto j = r.to_json();
  EXPECT_FALSE(j.contains("temporal_down"));
  EXPECT_FALSE(j.contains("d_temporal"));
  const auto back = LossReport::from_json(j);
  EXPECT_EQ(back.spatial_down, 1.5);
  EXPECT_EQ(back.total, 2.5);
  EXPECT_FALSE(back.adv_temporal.has_value());
}

// Step 1e-4: at 1e-3 the truncation error of central differences already
// reaches a few percent on this network (weights are N(0, 0.02)).
TEST(Gradients, FiniteDifferencesAgreeOnTinyModel) {
  const auto r = stagan::testing::run_gradcheck(6, 1e-4, 1e-3, 99);
  EXPECT_EQ(r.probed, 6);
  EXPECT_TRUE(r.failures.empty()) << r.failures.front();
  EXPECT_TRUE(r.discriminator_side_zero);
}
