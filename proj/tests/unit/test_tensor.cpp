#include <gtest/gtest.h>

#include <random>

#include "asvp/error.hpp"
#include "asvp/svd.hpp"
#include "asvp/tensor.hpp"

using namespace asvp;

namespace {

Tensor random_tensor(Shape dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Tensor t(std::move(dims));
  for (double& v : t.data()) v = n(rng);
  return t;
}

}  // namespace

TEST(Tensor, ConstructionChecksProduct) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  EXPECT_THROW(Tensor(Shape{}), ShapeError);
  EXPECT_THROW(Tensor({1, 1, 1, 1, 1}), ShapeError);
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_DOUBLE_EQ(t[5], 1.5);
}

TEST(Tensor, MatricizeSmallExample) {
  // one batch, two channels, 1x2 spatial: channel 0 = [a, b], channel 1 = [c, d]
  Tensor t({1, 2, 1, 2}, std::vector<double>{1, 2, 3, 4});
  const Matricized m = matricize(t);
  ASSERT_EQ(m.blocks.size(), 1u);
  EXPECT_EQ(m.rows(), 2);
  EXPECT_EQ(m.cols(), 2);
  EXPECT_EQ(m.blocks[0](0, 0), 1);
  EXPECT_EQ(m.blocks[0](1, 0), 2);
  EXPECT_EQ(m.blocks[0](0, 1), 3);
  EXPECT_EQ(m.blocks[0](1, 1), 4);
}

TEST(Tensor, MatricizeIndexBijection) {
  const Tensor t = random_tensor({2, 3, 4, 5}, 1);
  const Matricized m = matricize(t);
  ASSERT_EQ(m.blocks.size(), 2u);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t p = 0; p < 4; ++p)
        for (std::size_t q = 0; q < 5; ++q) {
          EXPECT_EQ(m.blocks[b](static_cast<Eigen::Index>(p * 5 + q), static_cast<Eigen::Index>(c)), t.at(b, c, p, q));
        }
}

TEST(Tensor, MatricizeRoundTripIsExact) {
  const Tensor t = random_tensor({2, 3, 4, 4}, 2);
  EXPECT_EQ(dematricize(matricize(t)), t);
  const Tensor r3 = random_tensor({5, 3, 4}, 3);
  const Matricized m = matricize(r3);
  EXPECT_FALSE(m.batched);
  EXPECT_EQ(m.rows(), 12);
  EXPECT_EQ(m.cols(), 5);
  EXPECT_EQ(dematricize(m), r3);
}

TEST(Tensor, MatricizeDeskScaleDims) {
  const Matricized m = matricize(Tensor({1, 64, 8, 8}));
  EXPECT_EQ(m.rows(), 64);
  EXPECT_EQ(m.cols(), 64);
}

TEST(Tensor, MatricizeRejectsBadRank) {
  EXPECT_THROW(matricize(Tensor({4, 4})), ShapeError);
  Matricized m = matricize(Tensor({1, 2, 2, 2}));
  m.origin = {1, 3, 2, 2};
  EXPECT_THROW(dematricize(m), ShapeError);
}

TEST(Tensor, DematricizeZero) {
  Matricized m = matricize(Tensor({1, 3, 2, 2}, 1.0));
  m.blocks[0].setZero();
  const Tensor z = dematricize(m);
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
}

TEST(Tensor, FrobeniusNorm) {
  EXPECT_EQ(frobenius_norm_sq(Tensor({3, 3})), 0.0);
  EXPECT_EQ(frobenius_norm_sq(Tensor({2, 1}, std::vector<double>{3, 4})), 25.0);
  Tensor bad({2}, std::vector<double>{1, std::numeric_limits<double>::quiet_NaN()});
  EXPECT_THROW(frobenius_norm_sq(bad), NumericError);
}

TEST(Tensor, FrobeniusEqualsSpectrumEnergy) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor t = random_tensor({1, 6, 3, 5}, seed);
    const Matrix x = matricize(t).blocks[0];
    const SvdFactors f = svd(x);
    const double spectral = f.sigma.squaredNorm();
    EXPECT_NEAR(frobenius_norm_sq(t), spectral, 1e-6 * spectral);
  }
}

TEST(Tensor, ArithmeticAndStats) {
  const Tensor a({3}, std::vector<double>{1, 2, 3});
  const Tensor b({3}, std::vector<double>{1, 1, 1});
  EXPECT_EQ((a - b)[2], 2.0);
  EXPECT_EQ((a + b)[0], 2.0);
  EXPECT_EQ((2.0 * a)[1], 4.0);
  EXPECT_DOUBLE_EQ(mean(a), 2.0);
  EXPECT_DOUBLE_EQ(stddev(a), std::sqrt(2.0 / 3.0));
  EXPECT_DOUBLE_EQ(max_abs_diff(a, b), 2.0);
  EXPECT_THROW(a + Tensor({2}), ShapeError);
}

TEST(Tensor, BatchSliceAndStack) {
  const Tensor t = random_tensor({4, 2, 3, 3}, 9);
  const Tensor s = t.batch_slice(1, 2);
  EXPECT_EQ(s.dims(), (Shape{2, 2, 3, 3}));
  EXPECT_EQ(s.at(0, 1, 2, 2), t.at(1, 1, 2, 2));
  std::vector<Tensor> parts{t.batch_slice(0, 1).reshaped({2, 3, 3}), t.batch_slice(1, 1).reshaped({2, 3, 3})};
  EXPECT_EQ(Tensor::stack(parts), t.batch_slice(0, 2));
  EXPECT_THROW(t.batch_slice(3, 2), ShapeError);
}
