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

#ifndef MASKFED_TRAINER_H_
#define MASKFED_TRAINER_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "maskfed/dataset.h"
#include "maskfed/model.h"

namespace maskfed {

struct TrainerConfig {
  double learning_rate = 0.01;
  uint32_t local_epochs = 1;
  size_t batch_size = 32;
  uint64_t seed = 0;
  // Global index of the first pass; epoch k shuffles with seed ^ (first + k).
  uint64_t first_epoch_index = 0;
};

// Local training over a ModelVector. Implementations must be deterministic
// in (model, data order, config).
class Trainer {
 public:
  virtual ~Trainer() = default;

  virtual ModelSchema Schema() const = 0;
  virtual ModelVector TrainLocal(const ModelVector& m, const Dataset& train,
                                 const TrainerConfig& cfg) const = 0;
};

// Layers "weights" (dim) and "bias" (1).
ModelSchema LogisticSchema(size_t dim);

double Predict(const ModelVector& m, std::span<const double> features);
std::vector<double> PredictAll(const ModelVector& m, const Dataset& data);

// Mean binary cross-entropy over the selected rows.
double LogisticLoss(const ModelVector& m, const Dataset& data,
                    std::span<const size_t> rows);
double LogisticLoss(const ModelVector& m, const Dataset& data);

// Mean gradient of LogisticLoss over `rows`, shaped like the model.
ModelVector LogisticLossGradient(const ModelVector& m, const Dataset& data,
                                 std::span<const size_t> rows);

// Mini-batch SGD on logistic loss. Each pass shuffles row order with a
// seeded Fisher-Yates; the last partial batch is kept and averaged over its
// actual size.
class LogisticTrainer : public Trainer {
 public:
  explicit LogisticTrainer(size_t dim) : dim_(dim) {}

  ModelSchema Schema() const override { return LogisticSchema(dim_); }
  // Throws EmptyDataset, SchemaMismatch, DivergenceError (a parameter left
  // |x| < 2^39 or became non-finite) and std::invalid_argument for a
  // negative learning rate or zero batch size.
  ModelVector TrainLocal(const ModelVector& m, const Dataset& train,
                         const TrainerConfig& cfg) const override;

 private:
  size_t dim_;
};

}  // namespace maskfed

#endif  // MASKFED_TRAINER_H_
