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

#ifndef MASKFED_METRICS_H_
#define MASKFED_METRICS_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "maskfed/dataset.h"
#include "maskfed/model.h"

namespace maskfed {

inline constexpr double kDecisionThreshold = 0.5;

struct RocCurve {
  // (fpr, tpr) from (0,0) to (1,1), ordered by decreasing threshold.
  std::vector<std::pair<double, double>> points;
  double auc = 0.0;
};

// Sweeps every distinct score as a threshold; equal scores form one step.
// AUC by the trapezoidal rule. Throws DegenerateLabels for single-class input.
RocCurve RocAuc(std::span<const double> scores, std::span<const uint8_t> labels);

struct Confusion {
  size_t tp = 0;
  size_t fp = 0;
  size_t tn = 0;
  size_t fn = 0;

  size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

// Predicted positive iff score >= threshold.
Confusion ConfusionAtThreshold(std::span<const double> scores,
                               std::span<const uint8_t> labels, double threshold);

struct EvalReport {
  uint64_t epoch = 0;
  double auc = 0.0;
  std::vector<std::pair<double, double>> roc;
  Confusion confusion;
  size_t n_eval = 0;
  std::string config_digest;
};

EvalReport Evaluate(const ModelVector& m, const Dataset& test, uint64_t epoch,
                    const std::string& config_digest);

// {epoch, auc, roc: [[fpr,tpr]...], confusion: {tp,fp,tn,fn}, config_digest,
//  n_eval, threshold, threshold_rule}
nlohmann::json ReportToJson(const EvalReport& r);
EvalReport ReportFromJson(const nlohmann::json& j);

// Fixed-width plain-text table, one row per report.
std::string FormatReportTable(std::span<const EvalReport> reports);

}  // namespace maskfed

#endif  // MASKFED_METRICS_H_
