#include <gtest/gtest.h>

#include <cmath>

#include "cluttermap/nn/adam.hpp"

using namespace cluttermap;

namespace {

nn::NamedParam<double> named(Tensor<double>& t, const char* name) {
  return {name, &t};
}

}  // namespace

TEST(Adam, FirstStepMovesByLearningRateTimesSign) {
  Tensor<double> x({2}, {1.0, -2.0});
  x.ensure_grad();
  x.grad = {0.37, -5.0};
  nn::AdamConfig cfg;
  cfg.learning_rate = 0.01;
  std::vector<nn::NamedParam<double>> params{named(x, "x")};
  nn::AdamState<double> state(params, cfg);
  auto res = state.step(params);
  ASSERT_TRUE(res.applied);
  EXPECT_EQ(state.step_count(), 1);
  // Bias correction makes the very first update ~ lr * sign(g).
  EXPECT_NEAR(x[0], 1.0 - 0.01, 1e-6);
  EXPECT_NEAR(x[1], -2.0 + 0.01, 1e-6);
}

TEST(Adam, QuadraticConvergesToMinimum) {
  Tensor<double> x({1}, {0.0});
  x.ensure_grad();
  nn::AdamConfig cfg;
  cfg.learning_rate = 0.1;
  std::vector<nn::NamedParam<double>> params{named(x, "x")};
  nn::AdamState<double> state(params, cfg);
  for (int i = 0; i < 500; ++i) {
    x.grad[0] = 2.0 * (x[0] - 3.0);
    ASSERT_TRUE(state.step(params).applied);
  }
  EXPECT_LT(std::abs(x[0] - 3.0), 0.05);
  EXPECT_EQ(state.step_count(), 500);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Tensor<double> x({3}, {1.0, 2.0, 3.0});
  x.ensure_grad();
  std::vector<nn::NamedParam<double>> params{named(x, "x")};
  nn::AdamState<double> state(params, {});
  for (int i = 0; i < 5; ++i) ASSERT_TRUE(state.step(params).applied);
  EXPECT_DOUBLE_EQ(x[0], 1.0);
  EXPECT_DOUBLE_EQ(x[1], 2.0);
  EXPECT_DOUBLE_EQ(x[2], 3.0);
}

TEST(Adam, NonFiniteGradientRejectsStep) {
  Tensor<double> x({2}, {1.0, 2.0});
  x.ensure_grad();
  x.grad = {1.0, std::numeric_limits<double>::quiet_NaN()};
  std::vector<nn::NamedParam<double>> params{named(x, "x")};
  nn::AdamState<double> state(params, {});
  auto res = state.step(params);
  EXPECT_FALSE(res.applied);
  EXPECT_NE(res.diagnostic.find("non-finite"), std::string::npos);
  EXPECT_EQ(state.step_count(), 0);
  EXPECT_DOUBLE_EQ(x[0], 1.0);
  EXPECT_DOUBLE_EQ(x[1], 2.0);
}

TEST(Adam, InvalidHyperparametersRejected) {
  Tensor<double> x({1});
  x.ensure_grad();
  std::vector<nn::NamedParam<double>> params{named(x, "x")};
  nn::AdamConfig bad;
  bad.learning_rate = 0.0;
  EXPECT_THROW(nn::AdamState<double>(params, bad), Error);
  bad = {};
  bad.beta1 = 1.0;
  EXPECT_THROW(nn::AdamState<double>(params, bad), Error);
}
