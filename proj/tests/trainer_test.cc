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

#include "maskfed/trainer.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "gradcheck.h"
#include "maskfed/datadist.h"
#include "maskfed/errors.h"

namespace maskfed {
namespace {

Dataset FourPoints() {
  Dataset d(1, {});
  const double xs[] = {1, 2, -1, 0};
  const uint8_t ys[] = {1, 0, 0, 1};
  for (int i = 0; i < 4; ++i) d.AddRow({&xs[i], 1}, ys[i], {});
  return d;
}

std::vector<size_t> AllRows(const Dataset& d) {
  std::vector<size_t> rows(d.rows());
  std::iota(rows.begin(), rows.end(), size_t{0});
  return rows;
}

TEST(TrainerTest, PredictIsSigmoidOfLogit) {
  ModelVector m{{{"weights", {1.0, 0.5}}, {"bias", {0.5}}}};
  const double x[] = {0.5, 1.0};
  EXPECT_NEAR(Predict(m, x), 0.8175744761936437, 1e-15);
}

TEST(TrainerTest, FourPointGradientAndLoss) {
  const Dataset d = FourPoints();
  const ModelVector m{{{"weights", {0.5}}, {"bias", {-0.375}}}};
  const auto rows = AllRows(d);
  const ModelVector g = LogisticLossGradient(m, d, rows);
  EXPECT_NEAR(g.layers[0].values[0], 0.13492603263571899255, 1e-15);
  EXPECT_NEAR(g.layers[1].values[0], -0.028971847437817620904, 1e-15);
  EXPECT_NEAR(LogisticLoss(m, d), 0.73321688968464586488, 1e-15);
}

TEST(TrainerTest, GradientMatchesFiniteDifferences) {
  const Dataset d = GenerateSynthetic({.rows = 300, .dim = 6, .separation = 1.0, .seed = 4});
  std::mt19937_64 gen(1);
  std::normal_distribution<double> nd(0.0, 0.5);
  for (int trial = 0; trial < 20; ++trial) {
    ModelVector m = ModelVector::Zeros(LogisticSchema(6));
    for (auto& l : m.layers) {
      for (auto& v : l.values) v = nd(gen);
    }
    std::vector<size_t> rows(32);
    for (auto& r : rows) r = gen() % d.rows();
    EXPECT_LT(testing::MaxGradientRelError(m, d, rows), 1e-5);
  }
}

TEST(TrainerTest, LossIsStableForLargeLogits) {
  const Dataset d = FourPoints();
  const ModelVector m{{{"weights", {800.0}}, {"bias", {0.0}}}};
  const double loss = LogisticLoss(m, d);
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_NEAR(loss, (1600.0 + std::log(2.0)) / 4, 1e-9);
}

TEST(TrainerTest, MiniBatchSgdMatchesReference) {
  const Dataset d = GenerateSynthetic({.rows = 200, .dim = 3, .seed = 11});
  EXPECT_NEAR(d.Features(0)[0], -1.3516145090716671, 1e-15);
  EXPECT_NEAR(d.Features(1)[1], -2.4685456473320153, 1e-15);
  EXPECT_EQ(d.Attribute(1, "age"), 23.0);
  const LogisticTrainer trainer(3);
  TrainerConfig cfg{.learning_rate = 0.1, .local_epochs = 3, .batch_size = 32, .seed = 5};
  const ModelVector m = trainer.TrainLocal(ModelVector::Zeros(trainer.Schema()), d, cfg);
  const double expected[] = {0.5062538057232554, 0.5713183726702937, 0.483712202969369};
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(m.layers[0].values[i], expected[i], 1e-12);
  EXPECT_NEAR(m.layers[1].values[0], -0.01566102556739745, 1e-12);
}

TEST(TrainerTest, EpochIndexOffsetsShuffle) {
  const Dataset d = GenerateSynthetic({.rows = 100, .dim = 2, .seed = 3});
  const LogisticTrainer trainer(2);
  const ModelVector zero = ModelVector::Zeros(trainer.Schema());
  TrainerConfig two{.learning_rate = 0.1, .local_epochs = 2, .batch_size = 8, .seed = 9};
  TrainerConfig first = two, second = two;
  first.local_epochs = second.local_epochs = 1;
  second.first_epoch_index = 1;
  EXPECT_EQ(trainer.TrainLocal(zero, d, two),
            trainer.TrainLocal(trainer.TrainLocal(zero, d, first), d, second));
}

TEST(TrainerTest, ZeroLearningRateIsIdentity) {
  const Dataset d = GenerateSynthetic({.rows = 50, .dim = 4});
  const LogisticTrainer trainer(4);
  ModelVector m{{{"weights", {0.1, 0.2, 0.3, 0.4}}, {"bias", {-1}}}};
  EXPECT_EQ(trainer.TrainLocal(m, d, {.learning_rate = 0.0, .local_epochs = 3}), m);
}

TEST(TrainerTest, ReducesLoss) {
  const Dataset d = GenerateSynthetic({.rows = 400, .dim = 5});
  const LogisticTrainer trainer(5);
  const ModelVector zero = ModelVector::Zeros(trainer.Schema());
  const ModelVector m = trainer.TrainLocal(zero, d, {.learning_rate = 0.05, .local_epochs = 2});
  EXPECT_LT(LogisticLoss(m, d), LogisticLoss(zero, d));
}

TEST(TrainerTest, Errors) {
  const LogisticTrainer trainer(1);
  const ModelVector zero = ModelVector::Zeros(trainer.Schema());
  EXPECT_THROW(trainer.TrainLocal(zero, Dataset(1, {}), {}), EmptyDataset);
  EXPECT_THROW(trainer.TrainLocal(ModelVector::Zeros(LogisticSchema(2)), FourPoints(), {}),
               SchemaMismatch);
  const ModelVector start{{{"weights", {0.5}}, {"bias", {-0.375}}}};
  EXPECT_THROW(trainer.TrainLocal(start, FourPoints(), {.learning_rate = 1e300}), DivergenceError);
  EXPECT_THROW(trainer.TrainLocal(start, FourPoints(), {.learning_rate = 1e13}), DivergenceError);
  EXPECT_THROW(trainer.TrainLocal(zero, FourPoints(), {.learning_rate = -1}),
               std::invalid_argument);
}

TEST(TrainerTest, LargeSeparationIsLearnable) {
  const Dataset d = GenerateSynthetic({.rows = 2000, .dim = 10, .separation = 10.0, .seed = 42});
  const LogisticTrainer trainer(10);
  const ModelVector m = trainer.TrainLocal(ModelVector::Zeros(trainer.Schema()), d,
                                           {.learning_rate = 0.01, .local_epochs = 1});
  const auto p = PredictAll(m, d);
  size_t correct = 0;
  for (size_t i = 0; i < d.rows(); ++i) correct += (p[i] >= 0.5) == (d.Label(i) == 1);
  EXPECT_GE(correct / double(d.rows()), 0.99);
}

}  // namespace
}  // namespace maskfed
