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

#ifndef MASKFED_DATADIST_H_
#define MASKFED_DATADIST_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "maskfed/dataset.h"

namespace maskfed {

enum class Regime { kIID, kNonIIDByAttribute, kIIDShiftedTrainTest };

const char* RegimeName(Regime r);
// Accepts "iid", "non_iid", "iid_shifted". Throws std::invalid_argument.
Regime ParseRegime(const std::string& name);

// Inclusive attribute range.
struct Band {
  double lo = 0;
  double hi = 0;

  bool Contains(double v) const { return v >= lo && v <= hi; }
  bool operator==(const Band&) const = default;
};

// 0-30, 31-44, 45-58, 59-72, 73-86, 87-90.
std::vector<Band> DefaultAgeBands();

// How surplus bands are assigned when there are more bands than clients.
enum class BandMapping {
  kMergeTail,   // band b -> client min(b, n-1); the oldest bands share a client
  kRoundRobin,  // band b -> client b mod n
};

struct ClientSplit {
  std::vector<size_t> train;
  std::vector<size_t> test;
};

struct SplitPlan {
  Regime regime = Regime::kIID;
  std::vector<ClientSplit> clients;
  std::string attribute;
  std::vector<Band> bands;
  std::vector<uint32_t> band_to_client;
  double shift_boundary = 0;

  size_t client_count() const { return clients.size(); }
};

// Seeded shuffle, then n contiguous chunks whose sizes differ by at most one
// (the first rows % n chunks are larger). The last ceil(test_fraction*size)
// rows of each chunk are test rows. Throws TooFewRows.
SplitPlan SplitIID(const Dataset& data, size_t n, uint64_t seed,
                   double test_fraction);

// Rows go to the band containing their attribute value, bands to clients per
// `mapping`; each client's rows are then shuffled and split train/test as in
// SplitIID. Throws UncoveredValue, EmptyClientPartition, and
// std::invalid_argument when there are fewer bands than clients or a row
// lacks the attribute.
SplitPlan SplitNonIIDByAttribute(const Dataset& data, size_t n,
                                 const std::string& attribute,
                                 const std::vector<Band>& bands, uint64_t seed,
                                 double test_fraction,
                                 BandMapping mapping = BandMapping::kMergeTail);

// Train pool = attribute >= boundary, test pool = attribute < boundary; each
// pool is split IID into n parts. Throws EmptyPool.
SplitPlan SplitIIDShifted(const Dataset& data, size_t n,
                          const std::string& attribute, double boundary,
                          uint64_t seed);

// Checks pairwise disjointness and that every index is a valid row.
// Throws std::logic_error describing the first violation.
void ValidateSplitPlan(const SplitPlan& plan, size_t rows);

struct SyntheticSpec {
  size_t rows = 2000;
  size_t dim = 10;
  double separation = 2.0;
  // Pearson correlation between age and label; |value| <= ~0.57.
  double age_label_correlation = 0.3;
  uint64_t seed = 42;
};

// Two unit-variance Gaussian clusters with means +-separation/2 on every
// coordinate, labelled by cluster. Integer "age" is uniform on 0..90 and the
// label is drawn with P(y=1 | age) linear in age, calibrated to the requested
// correlation. Fully determined by the seed.
Dataset GenerateSynthetic(const SyntheticSpec& spec);

// {"regime", "clients": {"<id>": {"train": [...], "test": [...]}}, ...}
nlohmann::json SplitPlanToJson(const SplitPlan& plan);
// Hex digest of the canonical JSON form.
std::string SplitPlanDigest(const SplitPlan& plan);

// 64-bit FNV-1a, rendered as 16 hex digits.
std::string Fnv1aHex(const std::string& bytes);

}  // namespace maskfed

#endif  // MASKFED_DATADIST_H_
