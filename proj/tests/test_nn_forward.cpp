#include <gtest/gtest.h>

#include <cmath>

#include "cluttermap/nn/layers.hpp"
#include "cluttermap/nn/network.hpp"
#include "cluttermap/nn/ops.hpp"
#include "oracles.hpp"

using namespace cluttermap;
using nn::Mode;

namespace {

ThreadPool& pool() {
  static ThreadPool p(2);
  return p;
}

template <typename T>
Tensor<T> random_tensor(std::vector<int> shape, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  return t;
}

}  // namespace

TEST(Conv2dForward, IdentityKernelReproducesInput) {
  Tensor<double> in({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor<double> w({1, 1, 3, 3}, {0, 0, 0, 0, 1, 0, 0, 0, 0});
  Tensor<double> b({1});
  auto out = nn::conv2d_forward(in, w, b, true);
  ASSERT_EQ(out.shape, in.shape);
  for (std::size_t i = 0; i < in.size(); ++i) EXPECT_DOUBLE_EQ(out[i], in[i]);
}

TEST(Conv2dForward, AllOnesTapCounts) {
  Tensor<double> in = Tensor<double>::full({1, 4, 4}, 1.0);
  Tensor<double> w = Tensor<double>::full({1, 1, 3, 3}, 1.0);
  Tensor<double> b({1});
  auto out = nn::conv2d_forward(in, w, b, true);
  // Interior taps see the full 3x3 window, corners 2x2, edges 2x3.
  EXPECT_DOUBLE_EQ(out[5], 9.0);
  EXPECT_DOUBLE_EQ(out[0], 4.0);
  EXPECT_DOUBLE_EQ(out[1], 6.0);
}

TEST(Conv2dForward, MatchesNestedLoopOracle) {
  Rng rng(101);
  Tensor<double> in = random_tensor<double>({3, 8, 8}, rng);
  Tensor<double> w = random_tensor<double>({4, 3, 3, 3}, rng);
  Tensor<double> b = random_tensor<double>({4}, rng);
  auto fast = nn::conv2d_forward(in, w, b, true);
  auto ref = oracle::conv2d_ref(in, w, b, true);
  ASSERT_EQ(fast.shape, ref.shape);
  for (std::size_t i = 0; i < ref.size(); ++i)
    EXPECT_NEAR(fast[i], ref[i], 1e-12);
}

TEST(Conv2dForward, RandomShapesMatchOracleBothPaddings) {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const int C = 1 + static_cast<int>(rng.uniform_int(4));
    const int O = 1 + static_cast<int>(rng.uniform_int(6));
    const int K = 1 + 2 * static_cast<int>(rng.uniform_int(3));  // 1,3,5
    const int H = K + static_cast<int>(rng.uniform_int(12));
    const int W = K + static_cast<int>(rng.uniform_int(12));
    const bool same = rng.uniform() < 0.5;
    Tensor<double> in = random_tensor<double>({C, H, W}, rng);
    Tensor<double> w = random_tensor<double>({O, C, K, K}, rng);
    Tensor<double> b = random_tensor<double>({O}, rng);
    auto fast = nn::conv2d_forward(in, w, b, same);
    auto ref = oracle::conv2d_ref(in, w, b, same);
    ASSERT_EQ(fast.shape, ref.shape);
    for (std::size_t i = 0; i < ref.size(); ++i)
      ASSERT_NEAR(fast[i], ref[i], 1e-12);
  }
}

TEST(Conv2dForward, ChannelMismatchRejected) {
  Tensor<double> in({2, 4, 4});
  Tensor<double> w({1, 3, 3, 3});
  Tensor<double> b({1});
  EXPECT_THROW(nn::conv2d_forward(in, w, b, true), Error);
}

TEST(Conv2dForward, EvenKernelWithSamePaddingRejected) {
  Tensor<double> in({1, 4, 4});
  Tensor<double> w({1, 1, 2, 2});
  Tensor<double> b({1});
  EXPECT_THROW(nn::conv2d_forward(in, w, b, true), Error);
}

TEST(MaxPoolForward, TwoByTwoWindow) {
  Tensor<double> in({1, 2, 2}, {1, 2, 3, 4});
  auto res = nn::maxpool_forward(in);
  ASSERT_EQ(res.output.shape, (std::vector<int>{1, 1, 1}));
  EXPECT_DOUBLE_EQ(res.output[0], 4.0);
}

TEST(MaxPoolForward, OddSideUsesFloorSemantics) {
  Rng rng(3);
  Tensor<double> in = random_tensor<double>({1, 7, 7}, rng);
  auto res = nn::maxpool_forward(in);
  EXPECT_EQ(res.output.shape, (std::vector<int>{1, 3, 3}));
}

TEST(MaxPoolForward, MatchesOracleExactly) {
  Rng rng(11);
  Tensor<double> in = random_tensor<double>({2, 6, 6}, rng);
  auto res = nn::maxpool_forward(in);
  auto ref = oracle::maxpool_ref(in, 2, 2);
  ASSERT_EQ(res.output.shape, ref.shape);
  for (std::size_t i = 0; i < ref.size(); ++i)
    EXPECT_EQ(res.output[i], ref[i]);
}

TEST(MaxPoolForward, InputSmallerThanWindowRejected) {
  Tensor<double> in({1, 1, 4});
  EXPECT_THROW(nn::maxpool_forward(in), Error);
}

TEST(FullyConnectedForward, IdentityWeights) {
  Tensor<double> in({3}, {1, 2, 3});
  Tensor<double> w({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor<double> b({3});
  auto out = nn::fully_connected_forward(in, w, b);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(out[(std::size_t)i], in[(std::size_t)i]);
}

TEST(FullyConnectedForward, MatchesOracle) {
  Rng rng(5);
  Tensor<double> in = random_tensor<double>({17}, rng);
  Tensor<double> w = random_tensor<double>({6, 17}, rng);
  Tensor<double> b = random_tensor<double>({6}, rng);
  auto fast = nn::fully_connected_forward(in, w, b);
  auto ref = oracle::fully_connected_ref(in, w, b);
  for (std::size_t i = 0; i < ref.size(); ++i)
    EXPECT_NEAR(fast[i], ref[i], 1e-12);
}

TEST(FullyConnectedForward, LengthMismatchRejected) {
  Tensor<double> in({4});
  Tensor<double> w({2, 5});
  Tensor<double> b({2});
  EXPECT_THROW(nn::fully_connected_forward(in, w, b), Error);
}

TEST(Softmax, UniformLogits) {
  auto p = nn::softmax(std::vector<double>{0, 0, 0});
  for (double v : p) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Softmax, ExtremeLogitsStayFinite) {
  auto p = nn::softmax(std::vector<double>{1000, 0});
  EXPECT_TRUE(std::isfinite(p[0]));
  EXPECT_NEAR(p[0], 1.0, 1e-9);
  EXPECT_NEAR(p[0] + p[1], 1.0, 1e-9);
}

TEST(Softmax, NormalizesForRandomLargeMagnitudeLogits) {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> z(2 + rng.uniform_int(8));
    for (auto& v : z) v = rng.uniform(-1e3, 1e3);
    auto p = nn::softmax(z);
    double sum = 0;
    for (double v : p) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0 + 1e-12);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Softmax, StrictlyInsideUnitIntervalForModerateLogits) {
  Rng rng(29);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> z(2 + rng.uniform_int(8));
    for (auto& v : z) v = rng.uniform(-15.0, 15.0);
    auto p = nn::softmax(z);
    for (double v : p) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(Sigmoid, ZeroLogitIsHalf) {
  EXPECT_DOUBLE_EQ(nn::sigmoid(0.0), 0.5);
  EXPECT_NEAR(nn::sigmoid(1000.0), 1.0, 1e-12);
  EXPECT_NEAR(nn::sigmoid(-1000.0), 0.0, 1e-12);
}

TEST(CrossEntropy, ConfidentCorrectPredictionApproachesZero) {
  EXPECT_NEAR(nn::cross_entropy_loss(std::vector<double>{50, 0, 0}, 0), 0.0,
              1e-12);
}

TEST(CrossEntropy, UniformThreeClassIsLogThree) {
  EXPECT_NEAR(nn::cross_entropy_loss(std::vector<double>{0, 0, 0}, 1),
              std::log(3.0), 1e-12);
}

TEST(CrossEntropy, BinaryHalfIsLogTwo) {
  EXPECT_NEAR(nn::binary_cross_entropy_from_logit(0.0, 1), std::log(2.0),
              1e-12);
  EXPECT_NEAR(nn::binary_cross_entropy(0.5, 0), std::log(2.0), 1e-12);
}

TEST(BatchNorm, EvalWithUnitRunningStatsIsNearIdentity) {
  nn::BatchNorm2d<double> bn(nn::BatchNormSpec{2, 0.1, 1e-5});
  Rng rng(2);
  Tensor<double> x = random_tensor<double>({1, 2, 4, 4}, rng);
  auto y = bn.forward(x, Mode::Eval, pool());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-4);
}

TEST(BatchNorm, TrainModeNormalizesPerChannel) {
  nn::BatchNorm2d<double> bn(nn::BatchNormSpec{3, 0.1, 1e-5});
  Rng rng(4);
  Tensor<double> x({4, 3, 5, 5});
  for (auto& v : x.data) v = rng.uniform(-3.0, 7.0);
  auto y = bn.forward(x, Mode::Train, pool());
  const int N = 4, C = 3, HW = 25;
  for (int c = 0; c < C; ++c) {
    double mean = 0, var = 0;
    for (int n = 0; n < N; ++n)
      for (int i = 0; i < HW; ++i)
        mean += y[((std::size_t)n * C + c) * HW + i];
    mean /= N * HW;
    for (int n = 0; n < N; ++n)
      for (int i = 0; i < HW; ++i) {
        const double d = y[((std::size_t)n * C + c) * HW + i] - mean;
        var += d * d;
      }
    var /= N * HW;
    EXPECT_LE(std::abs(mean), 1e-10);
    EXPECT_NEAR(var, 1.0, 1e-3);
  }
}

TEST(BatchNorm, SingleSampleTrainBatchRejected) {
  nn::BatchNorm2d<double> bn(nn::BatchNormSpec{1, 0.1, 1e-5});
  Tensor<double> x({1, 1, 3, 3});
  EXPECT_THROW(bn.forward(x, Mode::Train, pool()), Error);
}

TEST(BatchNorm, SixteenChannelsHaveThirtyTwoParameters) {
  nn::BatchNorm2d<double> bn(nn::BatchNormSpec{16, 0.1, 1e-5});
  std::vector<nn::NamedParam<double>> params;
  bn.collect_params("bn", params);
  std::size_t total = 0;
  for (const auto& p : params) total += p.tensor->size();
  EXPECT_EQ(total, 32u);
}

TEST(Dropout, EvalModeIsIdentity) {
  nn::Dropout<double> drop(nn::DropoutSpec{0.5}, 9);
  Rng rng(8);
  Tensor<double> x = random_tensor<double>({2, 1, 4, 4}, rng);
  auto y = drop.forward(x, Mode::Eval, pool());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(y[i], x[i]);
}

TEST(Dropout, ZeroProbabilityTrainIsIdentity) {
  nn::Dropout<double> drop(nn::DropoutSpec{0.0}, 9);
  Rng rng(8);
  Tensor<double> x = random_tensor<double>({2, 1, 4, 4}, rng);
  auto y = drop.forward(x, Mode::Train, pool());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(y[i], x[i]);
}

TEST(Dropout, HalfProbabilityPreservesMeanWithinThreeStandardErrors) {
  const int n = 100000;
  nn::Dropout<double> drop(nn::DropoutSpec{0.5}, 1234);
  Tensor<double> x = Tensor<double>::full({1, 1, 1, n}, 1.0);
  auto y = drop.forward(x, Mode::Train, pool());
  double mean = 0;
  for (double v : y.data) mean += v;
  mean /= n;
  // Survivors carry value 2, so the per-element variance is 1.
  const double se = 1.0 / std::sqrt(static_cast<double>(n));
  EXPECT_NEAR(mean, 1.0, 3 * se);
}

TEST(Dropout, InvalidProbabilityRejected) {
  EXPECT_THROW(validate(nn::LayerKind{nn::DropoutSpec{1.0}}), Error);
  EXPECT_THROW(validate(nn::LayerKind{nn::DropoutSpec{-0.1}}), Error);
}
