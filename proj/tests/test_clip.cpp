#include <gtest/gtest.h>

#include "stagan/clip.hpp"
#include "stagan/error.hpp"
#include "stagan/png_io.hpp"
#include "support.hpp"

using namespace stagan;
using stagan::testing::uniform_pm1;

namespace {

PairedSample random_sample(std::int64_t t, std::int64_t size, std::uint64_t seed) {
  return {Clip(uniform_pm1({t, 3, size, size}, seed)), Clip(uniform_pm1({t, 3, size, size}, seed + 1)),
          SemanticMapSequence(uniform_pm1({t, 3, size, size}, seed + 2)), "clip"};
}

}  // namespace

TEST(Reverse, ThreeFramesSwapEnds) {
  auto frames = uniform_pm1({3, 3, 4, 4}, 1);
  const Clip r = reverse_sequence(Clip(frames));
  EXPECT_TRUE(torch::equal(r.tensor()[0], frames[2]));
  EXPECT_TRUE(torch::equal(r.tensor()[1], frames[1]));
  EXPECT_TRUE(torch::equal(r.tensor()[2], frames[0]));
}

TEST(Reverse, LengthTwo) {
  auto frames = uniform_pm1({2, 3, 4, 4}, 2);
  const Clip r = reverse_sequence(Clip(frames));
  EXPECT_TRUE(torch::equal(r.tensor()[0], frames[1]));
  EXPECT_TRUE(torch::equal(r.tensor()[1], frames[0]));
}

TEST(Reverse, InvolutionIsBitwiseForRandomClips) {
  for (std::int64_t t = 1; t <= 6; ++t) {
    const Clip c(uniform_pm1({t, 3, 5, 7}, 10 + t));
    EXPECT_TRUE(torch::equal(reverse_sequence(reverse_sequence(c)).tensor(), c.tensor())) << "T=" << t;
    const SemanticMapSequence s(uniform_pm1({t, 3, 5, 7}, 20 + t));
    EXPECT_TRUE(torch::equal(reverse_sequence(reverse_sequence(s)).tensor(), s.tensor()));
  }
}

TEST(Reverse, BatchedTimeAxis) {
  auto batch = uniform_pm1({2, 4, 3, 2, 2}, 3);
  auto r = reverse_time(batch);
  for (int b = 0; b < 2; ++b) {
    for (int t = 0; t < 4; ++t) EXPECT_TRUE(torch::equal(r[b][t], batch[b][3 - t]));
  }
}

TEST(FrameTypes, RejectWrongShapes) {
  EXPECT_THROW(Frame(torch::zeros({1, 4, 4})), ShapeError);
  EXPECT_THROW(Frame(torch::zeros({3, 4})), ShapeError);
  EXPECT_THROW(Clip(torch::zeros({0, 3, 4, 4})), ShapeError);
  EXPECT_THROW(Clip(torch::zeros({2, 4, 4, 4})), ShapeError);
  EXPECT_NO_THROW(Clip(torch::zeros({1, 3, 4, 4})));
}

TEST(Validate, WellFormedSampleSucceeds) {
  const auto sample = random_sample(3, 8, 1);
  const auto r = validate_paired_sample(sample);
  EXPECT_TRUE(r.ok());
}

TEST(Validate, ShortSemanticSequenceReported) {
  auto sample = random_sample(4, 8, 2);
  sample.sem = SemanticMapSequence(uniform_pm1({3, 3, 8, 8}, 9));
  const auto r = validate_paired_sample(sample);
  ASSERT_FALSE(r.ok());
  EXPECT_NE(std::find(r.violations.begin(), r.violations.end(), "sem/ego length mismatch"), r.violations.end());
}

TEST(Validate, NonFinitePixelReported) {
  auto sample = random_sample(2, 8, 3);
  auto ego = sample.ego.tensor().clone();
  ego[1][2][3][4] = std::numeric_limits<float>::quiet_NaN();
  sample.ego = Clip(ego);
  const auto r = validate_paired_sample(sample);
  ASSERT_FALSE(r.ok());
  bool found = false;
  for (const auto& v : r.violations) found = found || v.find("non-finite pixel") != std::string::npos;
  EXPECT_TRUE(found);
}

TEST(Validate, ExpectationsChecked) {
  const auto sample = random_sample(3, 8, 4);
  SampleExpectations expect;
  expect.image_size = 16;
  expect.clip_length = 3;
  EXPECT_FALSE(validate_paired_sample(sample, expect).ok());
  expect.image_size = 8;
  EXPECT_TRUE(validate_paired_sample(sample, expect).ok());
}

TEST(Normalize, Endpoints) {
  Image8 img(1, 2, 3);
  for (int c = 0; c < 3; ++c) img.at(0, 1, c) = 255;
  const auto f = normalize_frame(img).tensor();
  EXPECT_FLOAT_EQ(f[0][0][0].item<float>(), -1.0f);
  EXPECT_FLOAT_EQ(f[2][0][1].item<float>(), 1.0f);
}

TEST(Normalize, RoundTripsEvery8BitValue) {
  Image8 img(16, 16, 3);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<std::uint8_t>((y * 16 + x + 85 * c) % 256);
    }
  }
  EXPECT_EQ(denormalize_frame(normalize_frame(img)), img);
}

TEST(Normalize, RejectsNonRgb) { EXPECT_THROW(normalize_frame(Image8(4, 4, 1)), ShapeError); }

TEST(Normalize, DenormalizeClampsOutOfRange) {
  auto t = torch::full({3, 1, 2}, 0.0f);
  t[0][0][0] = 3.0f;
  t[1][0][1] = -3.0f;
  const auto img = denormalize_frame(Frame(t));
  EXPECT_EQ(img.at(0, 0, 0), 255);
  EXPECT_EQ(img.at(0, 1, 1), 0);
}

TEST(Png, RoundTripRgbAndGray) {
  stagan::testing::TempDir dir("png");
  Image8 rgb(5, 7, 3);
  for (std::size_t i = 0; i < rgb.data.size(); ++i) rgb.data[i] = static_cast<std::uint8_t>(i * 37);
  write_png(dir / "rgb.png", rgb);
  EXPECT_EQ(read_png(dir / "rgb.png"), rgb);

  Image8 gray(3, 4, 1);
  for (std::size_t i = 0; i < gray.data.size(); ++i) gray.data[i] = static_cast<std::uint8_t>(i * 20);
  write_png(dir / "gray.png", gray);
  const auto back = read_png(dir / "gray.png");
  ASSERT_EQ(back.channels, 3);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 4; ++x) EXPECT_EQ(back.at(y, x, 1), gray.at(y, x, 0));
  }
}

TEST(Png, MissingFileIsIoError) {
  try {
    read_png("/nonexistent/dir/frame.png");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_EQ(e.path(), "/nonexistent/dir/frame.png");
  }
}
