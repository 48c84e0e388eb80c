#include <gtest/gtest.h>

#include "asvp/analysis.hpp"
#include "asvp/data.hpp"
#include "asvp/error.hpp"
#include "asvp/tensor_file.hpp"

using namespace asvp;

namespace {

DegradationSpec task(Task t) {
  DegradationSpec s;
  s.task = t;
  return s;
}

}  // namespace

TEST(Degrade, LowLightClosedForm) {
  DegradationSpec s = task(Task::low_light);
  s.gamma = 2.0;
  s.gain = 1.0;
  const Tensor x(Shape{1, 2, 2}, 0.81);
  const Tensor y = degrade(x, s);
  for (double v : y.data()) EXPECT_NEAR(v, 0.6561, 1e-12);
}

TEST(Degrade, HazeClosedForm) {
  DegradationSpec s = task(Task::haze);
  s.transmission = 0.5;
  s.airlight = 1.0;
  const Tensor y = degrade(Tensor(Shape{1, 2, 2}, 0.2), s);
  for (double v : y.data()) EXPECT_NEAR(v, 0.6, 1e-12);
  // tinted airlight per channel
  s.color_cast = 0.5;
  const Tensor z = degrade(Tensor(Shape{3, 1, 1}, 0.0), s);
  EXPECT_NEAR(z[0], 0.5, 1e-12);
  EXPECT_NEAR(z[1], 0.375, 1e-12);
  EXPECT_NEAR(z[2], 0.25, 1e-12);
}

TEST(Degrade, DenoiseNoiseLevel) {
  const Tensor clean(Shape{1, 64, 64}, 0.5);
  const Tensor noisy = degrade(clean, task(Task::denoise));
  EXPECT_NEAR(psnr(noisy, clean), 20.0, 0.5);
  EXPECT_EQ(degrade(clean, task(Task::denoise)), noisy);
}

TEST(Degrade, SuperResolution) {
  DegradationSpec s = task(Task::super_resolution);
  const Tensor flat(Shape{1, 8, 8}, 0.3);
  EXPECT_LE(max_abs_diff(degrade(flat, s), flat), 1e-12);
  s.upsample = UpsampleMode::nearest;
  Tensor checker({1, 4, 4});
  for (std::size_t i = 0; i < 16; ++i) checker[i] = ((i / 4 + i % 4) % 2) ? 1.0 : 0.0;
  const Tensor y = degrade(checker, s);
  for (double v : y.data()) EXPECT_NEAR(v, 0.5, 1e-12);
  s.scale = 3;
  EXPECT_THROW(degrade(checker, s), ConfigError);
}

TEST(Degrade, RainAddsStreaksAndClips) {
  const Tensor clean(Shape{1, 32, 32}, 0.5);
  const Tensor y = degrade(clean, task(Task::rain));
  EXPECT_GT(mean(y), 0.5);
  for (double v : y.data()) {
    EXPECT_GE(v, 0.5);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Degrade, RejectsNonImage) {
  EXPECT_THROW(degrade(Tensor(Shape{4, 4}), task(Task::haze)), ShapeError);
  EXPECT_THROW(parse_task("deblur"), ConfigError);
}

TEST(SynthImage, RangeAndDeterminism) {
  const Tensor a = synth_clean_image(3, 32, 5);
  EXPECT_EQ(a.dims(), (Shape{3, 32, 32}));
  for (double v : a.data()) {
    EXPECT_GE(v, 0.05);
    EXPECT_LE(v, 0.95);
  }
  EXPECT_EQ(synth_clean_image(3, 32, 5), a);
  EXPECT_NE(synth_clean_image(3, 32, 6), a);
  EXPECT_GT(stddev(a), 0.02);
}

TEST(Dataset, SplitIsDisjointAndReproducible) {
  const DatasetSplit s = make_split(task(Task::denoise), 4, 2, 16, 1, 7);
  ASSERT_EQ(s.train.size(), 4u);
  ASSERT_EQ(s.test.size(), 2u);
  const Dataset tail = make_dataset(task(Task::denoise), 4, 2, 16, 1, 7);
  EXPECT_EQ(tail[0].clean, s.test[0].clean);
  EXPECT_EQ(tail[1].degraded, s.test[1].degraded);
  EXPECT_NE(s.train[0].clean, s.test[0].clean);
  const DatasetSplit again = make_split(task(Task::denoise), 4, 2, 16, 1, 7);
  EXPECT_EQ(encode_tensor(stack_degraded(again.train, 0, 4)), encode_tensor(stack_degraded(s.train, 0, 4)));
}

TEST(Dataset, StackRoundTrip) {
  const Dataset d = make_dataset(task(Task::haze), 0, 3, 8, 2, 1);
  const Tensor c = stack_clean(d, 0, 3);
  EXPECT_EQ(c.dims(), (Shape{3, 2, 8, 8}));
  const Dataset back = unstack_pairs(c, stack_degraded(d, 0, 3));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].clean, d[i].clean);
    EXPECT_EQ(back[i].degraded, d[i].degraded);
  }
}

TEST(Pnm, TwoByTwoBytes) {
  const Tensor img(Shape{1, 2, 2}, std::vector<double>{0.0, 1.0, 0.5, 2.0});
  const auto bytes = encode_pnm(img);
  const std::string header = "P5\n2 2\n255\n";
  ASSERT_EQ(bytes.size(), header.size() + 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(header.size())), header);
  EXPECT_EQ(bytes[header.size() + 0], 0);
  EXPECT_EQ(bytes[header.size() + 1], 255);
  EXPECT_EQ(bytes[header.size() + 2], 128);
  EXPECT_EQ(bytes[header.size() + 3], 255);
  const Tensor back = decode_pnm(bytes);
  EXPECT_NEAR(back[2], 128.0 / 255.0, 1e-15);
}

TEST(Pnm, ColorRoundTripAndErrors) {
  Tensor img({3, 2, 3});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i * 13 % 256) / 255.0;
  EXPECT_LE(max_abs_diff(decode_pnm(encode_pnm(img)), img), 1e-12);
  const std::string comment = "P5\n# note\n1 1\n255\n\x07";
  EXPECT_NEAR(decode_pnm(std::vector<std::uint8_t>(comment.begin(), comment.end()))[0], 7.0 / 255.0, 1e-15);
  const std::string short_data = "P5\n2 2\n255\n\x01";
  EXPECT_THROW(decode_pnm(std::vector<std::uint8_t>(short_data.begin(), short_data.end())), FormatError);
  const std::string bad = "P2\n1 1\n255\n0";
  EXPECT_THROW(decode_pnm(std::vector<std::uint8_t>(bad.begin(), bad.end())), FormatError);
  EXPECT_THROW(encode_pnm(Tensor(Shape{2, 2, 2})), ShapeError);
}
