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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "maskfed/chacha20.h"
#include "maskfed/errors.h"
#include "maskfed/fixedpoint.h"
#include "maskfed/kernels.h"

namespace maskfed {
namespace {

struct LogisticView {
  std::span<const double> weights;
  double bias;
};

LogisticView View(const ModelVector& m) {
  if (m.layers.size() != 2 || m.layers[0].name != "weights" ||
      m.layers[1].name != "bias" || m.layers[1].values.size() != 1) {
    throw SchemaMismatch("expected logistic model layers (weights, bias[1])");
  }
  return {m.layers[0].values, m.layers[1].values[0]};
}

double Logit(LogisticView v, std::span<const double> x) {
  double z = v.bias;
  for (size_t j = 0; j < x.size(); ++j) z += v.weights[j] * x[j];
  return z;
}

// log(1 + e^z) without overflow.
double Softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

}  // namespace

ModelSchema LogisticSchema(size_t dim) { return {{"weights", dim}, {"bias", 1}}; }

double Predict(const ModelVector& m, std::span<const double> features) {
  const auto v = View(m);
  if (features.size() != v.weights.size()) {
    throw SchemaMismatch("feature dimension does not match weights");
  }
  return kernels::Sigmoid(Logit(v, features));
}

std::vector<double> PredictAll(const ModelVector& m, const Dataset& data) {
  const auto v = View(m);
  if (data.dim() != v.weights.size()) {
    throw SchemaMismatch("dataset dimension does not match weights");
  }
  std::vector<double> out(data.rows());
  kernels::parallel::PredictRows(data.features(), data.dim(), v.weights, v.bias, out);
  return out;
}

double LogisticLoss(const ModelVector& m, const Dataset& data,
                    std::span<const size_t> rows) {
  const auto v = View(m);
  double total = 0.0;
  for (size_t r : rows) {
    const double z = Logit(v, data.Features(r));
    // -[y log s(z) + (1-y) log(1-s(z))] = softplus(z) - y z
    total += Softplus(z) - (data.Label(r) ? z : 0.0);
  }
  return rows.empty() ? 0.0 : total / static_cast<double>(rows.size());
}

double LogisticLoss(const ModelVector& m, const Dataset& data) {
  std::vector<size_t> all(data.rows());
  std::iota(all.begin(), all.end(), size_t{0});
  return LogisticLoss(m, data, all);
}

ModelVector LogisticLossGradient(const ModelVector& m, const Dataset& data,
                                 std::span<const size_t> rows) {
  const auto v = View(m);
  ModelVector grad = ModelVector::Zeros(m.Schema());
  auto& gw = grad.layers[0].values;
  double gb = 0.0;
  for (size_t r : rows) {
    const auto x = data.Features(r);
    const double residual = kernels::Sigmoid(Logit(v, x)) - data.Label(r);
    for (size_t j = 0; j < gw.size(); ++j) gw[j] += residual * x[j];
    gb += residual;
  }
  if (!rows.empty()) {
    const double inv = 1.0 / static_cast<double>(rows.size());
    for (auto& g : gw) g *= inv;
    gb *= inv;
  }
  grad.layers[1].values[0] = gb;
  return grad;
}

ModelVector LogisticTrainer::TrainLocal(const ModelVector& m, const Dataset& train,
                                        const TrainerConfig& cfg) const {
  CheckSchema(Schema(), m.Schema(), "LogisticTrainer");
  if (train.empty()) throw EmptyDataset();
  if (train.dim() != dim_) throw SchemaMismatch("dataset dimension mismatch");
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw std::invalid_argument("learning rate must be finite and >= 0");
  }
  if (cfg.batch_size == 0) throw std::invalid_argument("batch size must be positive");

  ModelVector model = m;
  std::vector<size_t> order(train.rows());
  for (uint32_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), size_t{0});
    KeystreamRng rng(cfg.seed ^ (cfg.first_epoch_index + epoch));
    rng.Shuffle(order);
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      const ModelVector grad = LogisticLossGradient(
          model, train, std::span(order).subspan(start, end - start));
      for (size_t l = 0; l < model.layers.size(); ++l) {
        auto& values = model.layers[l].values;
        for (size_t i = 0; i < values.size(); ++i) {
          values[i] -= cfg.learning_rate * grad.layers[l].values[i];
        }
      }
    }
  }

  for (const auto& layer : model.layers) {
    for (size_t i = 0; i < layer.values.size(); ++i) {
      const double x = layer.values[i];
      if (!std::isfinite(x) || std::fabs(x) >= kEncodeLimit) {
        throw DivergenceError("parameter " + layer.name + "[" + std::to_string(i) +
                              "] diverged to " + std::to_string(x));
      }
    }
  }
  return model;
}

}  // namespace maskfed
