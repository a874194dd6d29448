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

#include "maskfed/datadist.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <stdexcept>

#include "maskfed/chacha20.h"
#include "maskfed/errors.h"

namespace maskfed {
namespace {

size_t TestCount(size_t size, double test_fraction) {
  // Slack absorbs products like 0.7 * 10 landing just above an integer.
  const double raw = test_fraction * static_cast<double>(size) - 1e-9;
  const auto n = static_cast<size_t>(std::max(0.0, std::ceil(raw)));
  return std::min(n, size);
}

void CheckFraction(double test_fraction) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("test_fraction must lie in [0, 1)");
  }
}

// Appends `chunk` to `split`, the last TestCount rows as test.
void AssignChunk(std::span<const size_t> chunk, double test_fraction,
                 ClientSplit& split) {
  const size_t test = TestCount(chunk.size(), test_fraction);
  const size_t train = chunk.size() - test;
  split.train.insert(split.train.end(), chunk.begin(), chunk.begin() + static_cast<ptrdiff_t>(train));
  split.test.insert(split.test.end(), chunk.begin() + static_cast<ptrdiff_t>(train), chunk.end());
}

// Near-equal contiguous chunks of an already-shuffled list.
std::vector<std::span<const size_t>> Chunks(std::span<const size_t> rows, size_t n) {
  std::vector<std::span<const size_t>> out;
  const size_t base = rows.size() / n;
  const size_t extra = rows.size() % n;
  size_t at = 0;
  for (size_t c = 0; c < n; ++c) {
    const size_t len = base + (c < extra ? 1 : 0);
    out.push_back(rows.subspan(at, len));
    at += len;
  }
  return out;
}

std::vector<size_t> ShuffledRange(size_t rows, uint64_t seed) {
  std::vector<size_t> order(rows);
  std::iota(order.begin(), order.end(), size_t{0});
  KeystreamRng rng(seed);
  rng.Shuffle(order);
  return order;
}

}  // namespace

const char* RegimeName(Regime r) {
  switch (r) {
    case Regime::kIID: return "iid";
    case Regime::kNonIIDByAttribute: return "non_iid";
    case Regime::kIIDShiftedTrainTest: return "iid_shifted";
  }
  return "?";
}

Regime ParseRegime(const std::string& name) {
  if (name == "iid") return Regime::kIID;
  if (name == "non_iid") return Regime::kNonIIDByAttribute;
  if (name == "iid_shifted") return Regime::kIIDShiftedTrainTest;
  throw std::invalid_argument("unknown regime '" + name +
                              "' (expected iid, non_iid or iid_shifted)");
}

std::vector<Band> DefaultAgeBands() {
  return {{0, 30}, {31, 44}, {45, 58}, {59, 72}, {73, 86}, {87, 90}};
}

SplitPlan SplitIID(const Dataset& data, size_t n, uint64_t seed,
                   double test_fraction) {
  if (n == 0) throw std::invalid_argument("client count must be >= 1");
  CheckFraction(test_fraction);
  if (data.rows() < n) throw TooFewRows(data.rows(), n);

  SplitPlan plan;
  plan.regime = Regime::kIID;
  plan.clients.resize(n);
  const auto order = ShuffledRange(data.rows(), seed);
  const auto chunks = Chunks(order, n);
  for (size_t c = 0; c < n; ++c) AssignChunk(chunks[c], test_fraction, plan.clients[c]);
  return plan;
}

SplitPlan SplitNonIIDByAttribute(const Dataset& data, size_t n,
                                 const std::string& attribute,
                                 const std::vector<Band>& bands, uint64_t seed,
                                 double test_fraction, BandMapping mapping) {
  if (n == 0) throw std::invalid_argument("client count must be >= 1");
  CheckFraction(test_fraction);
  if (bands.size() < n) {
    throw std::invalid_argument("need at least as many bands as clients");
  }
  if (!data.HasAttribute(attribute)) {
    throw std::invalid_argument("dataset has no attribute '" + attribute + "'");
  }

  SplitPlan plan;
  plan.regime = Regime::kNonIIDByAttribute;
  plan.attribute = attribute;
  plan.bands = bands;
  for (size_t b = 0; b < bands.size(); ++b) {
    plan.band_to_client.push_back(static_cast<uint32_t>(
        mapping == BandMapping::kMergeTail ? std::min(b, n - 1) : b % n));
  }

  std::vector<std::vector<size_t>> members(n);
  for (size_t r = 0; r < data.rows(); ++r) {
    const double v = data.Attribute(r, attribute);
    auto it = std::find_if(bands.begin(), bands.end(),
                           [v](const Band& b) { return b.Contains(v); });
    if (it == bands.end()) throw UncoveredValue(v);
    members[plan.band_to_client[static_cast<size_t>(it - bands.begin())]].push_back(r);
  }

  plan.clients.resize(n);
  KeystreamRng rng(seed);
  for (size_t c = 0; c < n; ++c) {
    if (members[c].empty()) throw EmptyClientPartition(static_cast<uint32_t>(c));
    rng.Shuffle(members[c]);
    AssignChunk(members[c], test_fraction, plan.clients[c]);
  }
  return plan;
}

SplitPlan SplitIIDShifted(const Dataset& data, size_t n,
                          const std::string& attribute, double boundary,
                          uint64_t seed) {
  if (n == 0) throw std::invalid_argument("client count must be >= 1");
  if (!data.HasAttribute(attribute)) {
    throw std::invalid_argument("dataset has no attribute '" + attribute + "'");
  }
  std::vector<size_t> train_pool, test_pool;
  for (size_t r = 0; r < data.rows(); ++r) {
    (data.Attribute(r, attribute) >= boundary ? train_pool : test_pool).push_back(r);
  }
  if (train_pool.empty()) throw EmptyPool(EmptyPool::Side::kTrain);
  if (test_pool.empty()) throw EmptyPool(EmptyPool::Side::kTest);
  if (train_pool.size() < n) throw TooFewRows(train_pool.size(), n);
  if (test_pool.size() < n) throw TooFewRows(test_pool.size(), n);

  SplitPlan plan;
  plan.regime = Regime::kIIDShiftedTrainTest;
  plan.attribute = attribute;
  plan.shift_boundary = boundary;
  plan.clients.resize(n);
  KeystreamRng rng(seed);
  rng.Shuffle(train_pool);
  rng.Shuffle(test_pool);
  const auto train_chunks = Chunks(train_pool, n);
  const auto test_chunks = Chunks(test_pool, n);
  for (size_t c = 0; c < n; ++c) {
    plan.clients[c].train.assign(train_chunks[c].begin(), train_chunks[c].end());
    plan.clients[c].test.assign(test_chunks[c].begin(), test_chunks[c].end());
  }
  return plan;
}

void ValidateSplitPlan(const SplitPlan& plan, size_t rows) {
  std::vector<uint8_t> used(rows, 0);
  for (size_t c = 0; c < plan.clients.size(); ++c) {
    for (const auto* list : {&plan.clients[c].train, &plan.clients[c].test}) {
      for (size_t r : *list) {
        if (r >= rows) {
          throw std::logic_error("client " + std::to_string(c) + " has row " +
                                 std::to_string(r) + " beyond dataset");
        }
        if (used[r]++) {
          throw std::logic_error("row " + std::to_string(r) + " assigned twice");
        }
      }
    }
  }
}

Dataset GenerateSynthetic(const SyntheticSpec& spec) {
  if (spec.rows < 2 || spec.dim < 1) {
    throw std::invalid_argument("synthetic data needs rows >= 2 and dim >= 1");
  }
  constexpr int kMaxAge = 90;
  // Variance of u = age/90 under the discrete uniform age.
  double mean = 0, var = 0;
  for (int a = 0; a <= kMaxAge; ++a) mean += a / double(kMaxAge);
  mean /= kMaxAge + 1;
  for (int a = 0; a <= kMaxAge; ++a) {
    const double d = a / double(kMaxAge) - mean;
    var += d * d;
  }
  var /= kMaxAge + 1;
  // P(y=1|u) = 1/2 + slope (u - 1/2) gives corr(u, y) = 2 slope sd(u).
  const double slope = spec.age_label_correlation / (2.0 * std::sqrt(var));
  if (std::fabs(slope) > 1.0) {
    throw std::invalid_argument("age_label_correlation too large for a valid label model");
  }

  Dataset data(spec.dim, {"age"});
  KeystreamRng rng(spec.seed);
  std::vector<double> x(spec.dim);
  for (size_t r = 0; r < spec.rows; ++r) {
    const double age = static_cast<double>(rng.UniformBelow(kMaxAge + 1));
    const double p = 0.5 + slope * (age / kMaxAge - 0.5);
    const uint8_t label = rng.UniformDouble() < p ? 1 : 0;
    const double center = (label ? 0.5 : -0.5) * spec.separation;
    for (auto& v : x) v = center + rng.Normal();
    const double attrs[] = {age};
    data.AddRow(x, label, attrs);
  }
  return data;
}

nlohmann::json SplitPlanToJson(const SplitPlan& plan) {
  nlohmann::json j;
  j["regime"] = RegimeName(plan.regime);
  nlohmann::json clients = nlohmann::json::object();
  for (size_t c = 0; c < plan.clients.size(); ++c) {
    clients[std::to_string(c)] = {{"train", plan.clients[c].train},
                                  {"test", plan.clients[c].test}};
  }
  j["clients"] = std::move(clients);
  if (!plan.attribute.empty()) j["attribute"] = plan.attribute;
  if (!plan.bands.empty()) {
    nlohmann::json bands = nlohmann::json::array();
    for (size_t b = 0; b < plan.bands.size(); ++b) {
      bands.push_back({{"lo", plan.bands[b].lo},
                       {"hi", plan.bands[b].hi},
                       {"client", plan.band_to_client[b]}});
    }
    j["bands"] = std::move(bands);
  }
  if (plan.regime == Regime::kIIDShiftedTrainTest) j["shift_boundary"] = plan.shift_boundary;
  return j;
}

std::string Fnv1aHex(const std::string& bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string SplitPlanDigest(const SplitPlan& plan) {
  return Fnv1aHex(SplitPlanToJson(plan).dump());
}

}  // namespace maskfed
