// Copyright 2026 The cassnat Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <vector>

#include "gtest/gtest.h"

#include "cassnat/common/error.h"
#include "cassnat/nn/layers.h"
#include "cassnat/nn/tape.h"
#include "oracles.h"

namespace cassnat::nn {
namespace {

Tensor RandomTensor(Rng& rng, std::vector<std::size_t> shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.Normal();
  return t;
}

TEST(TensorTest, PositionalEncodingAtZeroAlternates) {
  Tensor pe = SinusoidalPositionalEncoding(3, 8);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(pe.at(0, i), i % 2 == 0 ? 0.0 : 1.0);
  EXPECT_NEAR(pe.at(1, 0), std::sin(1.0), 1e-15);
  EXPECT_NEAR(pe.at(1, 2), std::sin(std::pow(10000.0, -2.0 / 8.0)), 1e-15);
}

TEST(TensorTest, PositionalEncodingRejectsZeroLength) {
  EXPECT_THROW(SinusoidalPositionalEncoding(0, 8), Error);
}

TEST(TensorTest, SoftmaxOfUniformLogitsIsUniform) {
  Tensor x({2, 5}, std::vector<double>(10, 3.25));
  Tensor y = SoftmaxRows(x);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_DOUBLE_EQ(y[i], 0.2);
}

TEST(TensorTest, ShapeMismatchThrows) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), Error);
}

TEST(OpsTest, LayerNormOfConstantRowIsZero) {
  Tape tape;
  Var x = tape.Constant(Tensor({1, 6}, std::vector<double>(6, 4.5)));
  Var g = tape.Constant(Tensor({6}, std::vector<double>(6, 1.0)));
  Var b = tape.Constant(Tensor({6}));
  const Tensor& y = tape.value(tape.LayerNorm(x, g, b));
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(y[i], 0.0);
}

TEST(OpsTest, LossSumGivesAllOnesGradient) {
  Tape tape;
  Parameter p{"p", Tensor({2, 3}, {1, 2, 3, 4, 5, 6}), Tensor({2, 3})};
  Var loss = tape.Sum(tape.Leaf(p));
  tape.Backward(loss);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(p.grad[i], 1.0);
}

TEST(OpsTest, BackwardTwiceIsAnError) {
  Tape tape;
  Parameter p{"p", Tensor({1}, {2.0}), Tensor({1})};
  Var loss = tape.Sum(tape.Leaf(p));
  tape.Backward(loss);
  try {
    tape.Backward(loss);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kState);
  }
}

TEST(OpsTest, CrossEntropyPerfectPredictionIsNearZero) {
  Tape tape;
  Tensor logits = Tensor::Zeros(2, 4);
  logits.at(0, 1) = 60.0;
  logits.at(1, 3) = 60.0;
  std::vector<int> targets{1, 3};
  const double loss = tape.value(tape.CrossEntropy(tape.Constant(logits), targets, 0.0))[0];
  EXPECT_LT(loss, 1e-20);
}

TEST(OpsTest, CrossEntropyUniformPredictionIsLogV) {
  Tape tape;
  std::vector<int> targets{0, 2};
  const double loss =
      tape.value(tape.CrossEntropy(tape.Constant(Tensor::Zeros(2, 4)), targets, 0.1))[0];
  EXPECT_NEAR(loss, std::log(4.0), 1e-15);
}

TEST(OpsTest, CrossEntropyMatchesScalarReference) {
  Rng rng(5);
  Tensor logits = RandomTensor(rng, {2, 4});
  std::vector<int> targets{3, 0};
  Tape tape;
  const double loss = tape.value(tape.CrossEntropy(tape.Constant(logits), targets, 0.1))[0];
  EXPECT_NEAR(loss, oracle::ReferenceSmoothedCe(logits, targets, 0.1), 1e-12);
}

TEST(OpsTest, CrossEntropyRejectsOutOfRangeTarget) {
  Tape tape;
  std::vector<int> targets{4};
  EXPECT_THROW(tape.CrossEntropy(tape.Constant(Tensor::Zeros(1, 4)), targets, 0.1), Error);
}

TEST(OpsTest, DropoutIsIdentityAtRateZeroAndSeeded) {
  Rng a(9), b(9);
  Tape tape;
  Var x = tape.Constant(Tensor({1, 64}, std::vector<double>(64, 1.0)));
  EXPECT_EQ(tape.Dropout(x, 0.0, a).id, x.id);
  const Tensor y1 = tape.value(tape.Dropout(x, 0.1, a));
  const Tensor y2 = tape.value(tape.Dropout(x, 0.1, b));
  // `a` already advanced by nothing (rate 0 short-circuits), so both draws
  // start from the same state.
  EXPECT_EQ(y1.values(), y2.values());
  for (std::size_t i = 0; i < 64; ++i)
    EXPECT_TRUE(y1[i] == 0.0 || std::abs(y1[i] - 1.0 / 0.9) < 1e-15);
}

TEST(MultiHeadAttentionTest, RejectsHeadsNotDividingWidth) {
  ParameterSet params;
  Rng rng(1);
  EXPECT_THROW(MultiHeadAttention::Create(params, "mha", 8, 3, rng), Error);
}

}  // namespace
}  // namespace cassnat::nn
