/*
 * Copyright 2026 The Maskfed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "maskfed/kernels.h"

#include <gtest/gtest.h>

#include <random>
#include <vector>

namespace maskfed {
namespace {

ChaChaKey TestKey() {
  ChaChaKey key;
  for (size_t i = 0; i < key.size(); ++i) key[i] = static_cast<uint8_t>(i * 7 + 3);
  return key;
}

class KernelSizes : public ::testing::TestWithParam<size_t> {};

TEST_P(KernelSizes, ChaChaWordsAgree) {
  std::vector<uint64_t> s(GetParam()), p(GetParam());
  kernels::serial::ChaChaWords(TestKey(), RoundNonce(11), s);
  kernels::parallel::ChaChaWords(TestKey(), RoundNonce(11), p);
  EXPECT_EQ(s, p);
}

TEST_P(KernelSizes, ChaChaWordsArePrefixStable) {
  // A shorter request must be a prefix of a longer one.
  std::vector<uint64_t> shorter(GetParam()), longer(GetParam() + 13);
  kernels::parallel::ChaChaWords(TestKey(), RoundNonce(2), shorter);
  kernels::parallel::ChaChaWords(TestKey(), RoundNonce(2), longer);
  EXPECT_TRUE(std::equal(shorter.begin(), shorter.end(), longer.begin()));
}

TEST_P(KernelSizes, WrappingAccumulateAgrees) {
  std::mt19937_64 gen(GetParam());
  std::vector<uint64_t> src(GetParam());
  std::vector<FixedWord> s(GetParam()), p;
  for (auto& v : src) v = gen();
  for (auto& v : s) v = FixedWord::FromBits(gen());
  p = s;
  for (int sign : {1, -1}) {
    kernels::serial::AccumulateWrapping(s, src, sign);
    kernels::parallel::AccumulateWrapping(p, src, sign);
    EXPECT_EQ(s, p);
  }
  std::vector<FixedWord> other(GetParam(), FixedWord(-3));
  kernels::serial::AddWrapping(s, other);
  kernels::parallel::AddWrapping(p, other);
  EXPECT_EQ(s, p);
}

TEST_P(KernelSizes, PredictRowsAgree) {
  const size_t rows = GetParam(), dim = 7;
  std::mt19937_64 gen(rows + 1);
  std::normal_distribution<double> nd;
  std::vector<double> x(rows * dim), w(dim), s(rows), p(rows);
  for (auto& v : x) v = nd(gen);
  for (auto& v : w) v = nd(gen);
  kernels::serial::PredictRows(x, dim, w, 0.25, s);
  kernels::parallel::PredictRows(x, dim, w, 0.25, p);
  EXPECT_EQ(s, p);
}

INSTANTIATE_TEST_SUITE_P(Sizes, KernelSizes, ::testing::Values(0, 1, 7, 8, 9, 1000, 65537));

TEST(KernelsTest, SigmoidIsStableAtExtremes) {
  EXPECT_EQ(kernels::Sigmoid(0.0), 0.5);
  EXPECT_EQ(kernels::Sigmoid(1000.0), 1.0);
  EXPECT_EQ(kernels::Sigmoid(-1000.0), 0.0);
  EXPECT_NEAR(kernels::Sigmoid(1.5), 0.8175744761936437, 1e-16);
  EXPECT_NEAR(kernels::Sigmoid(-1.5), 1 - 0.8175744761936437, 1e-16);
}

}  // namespace
}  // namespace maskfed
