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

#include "maskfed/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "maskfed/errors.h"
#include "maskfed/trainer.h"

namespace maskfed {

RocCurve RocAuc(std::span<const double> scores, std::span<const uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("scores and labels differ in length");
  }
  const size_t pos = static_cast<size_t>(std::count(labels.begin(), labels.end(), 1));
  const size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw DegenerateLabels();
  if (std::any_of(scores.begin(), scores.end(), [](double s) { return std::isnan(s); })) {
    throw DomainError("NaN score");
  }

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.points.emplace_back(0.0, 0.0);
  size_t tp = 0, fp = 0;
  double area = 0.0;
  double prev_fpr = 0.0, prev_tpr = 0.0;
  for (size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) {
      (labels[order[i]] ? tp : fp) += 1;
    }
    const double fpr = static_cast<double>(fp) / static_cast<double>(neg);
    const double tpr = static_cast<double>(tp) / static_cast<double>(pos);
    area += (fpr - prev_fpr) * (tpr + prev_tpr) * 0.5;
    roc.points.emplace_back(fpr, tpr);
    prev_fpr = fpr;
    prev_tpr = tpr;
  }
  roc.auc = area;
  return roc;
}

Confusion ConfusionAtThreshold(std::span<const double> scores,
                               std::span<const uint8_t> labels, double threshold) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("scores and labels differ in length");
  }
  Confusion c;
  for (size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (predicted) {
      (labels[i] ? c.tp : c.fp) += 1;
    } else {
      (labels[i] ? c.fn : c.tn) += 1;
    }
  }
  return c;
}

EvalReport Evaluate(const ModelVector& m, const Dataset& test, uint64_t epoch,
                    const std::string& config_digest) {
  const auto scores = PredictAll(m, test);
  const auto roc = RocAuc(scores, test.labels());
  EvalReport r;
  r.epoch = epoch;
  r.auc = roc.auc;
  r.roc = roc.points;
  r.confusion = ConfusionAtThreshold(scores, test.labels(), kDecisionThreshold);
  r.n_eval = test.rows();
  r.config_digest = config_digest;
  return r;
}

nlohmann::json ReportToJson(const EvalReport& r) {
  nlohmann::json roc = nlohmann::json::array();
  for (const auto& [fpr, tpr] : r.roc) roc.push_back({fpr, tpr});
  return {
      {"epoch", r.epoch},
      {"auc", r.auc},
      {"roc", std::move(roc)},
      {"confusion",
       {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn},
        {"fn", r.confusion.fn}}},
      {"config_digest", r.config_digest},
      {"n_eval", r.n_eval},
      {"threshold", kDecisionThreshold},
      {"threshold_rule", "positive iff score >= threshold"},
  };
}

EvalReport ReportFromJson(const nlohmann::json& j) {
  EvalReport r;
  r.epoch = j.at("epoch").get<uint64_t>();
  r.auc = j.at("auc").get<double>();
  for (const auto& p : j.at("roc")) r.roc.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  const auto& c = j.at("confusion");
  r.confusion = {c.at("tp").get<size_t>(), c.at("fp").get<size_t>(),
                 c.at("tn").get<size_t>(), c.at("fn").get<size_t>()};
  r.config_digest = j.at("config_digest").get<std::string>();
  r.n_eval = j.value("n_eval", r.confusion.total());
  return r;
}

std::string FormatReportTable(std::span<const EvalReport> reports) {
  std::string out = "epoch       auc      tp      fp      tn      fn\n";
  char line[128];
  for (const auto& r : reports) {
    std::snprintf(line, sizeof(line), "%5llu  %8.5f  %6zu  %6zu  %6zu  %6zu\n",
                  static_cast<unsigned long long>(r.epoch), r.auc, r.confusion.tp,
                  r.confusion.fp, r.confusion.tn, r.confusion.fn);
    out += line;
  }
  return out;
}

}  // namespace maskfed
