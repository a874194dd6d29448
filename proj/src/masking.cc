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

#include "maskfed/masking.h"

#include <sys/random.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <set>
#include <string>

#include "maskfed/errors.h"
#include "maskfed/kernels.h"

namespace maskfed {

IncompleteRound::IncompleteRound(uint64_t round, std::vector<uint32_t> missing,
                                 const std::string& detail)
    : Error([&] {
        std::string msg = "round " + std::to_string(round) + " incomplete";
        if (!missing.empty()) {
          msg += "; missing clients:";
          for (auto id : missing) msg += " " + std::to_string(id);
        }
        if (!detail.empty()) msg += " (" + detail + ")";
        return msg;
      }()),
      round_(round),
      missing_(std::move(missing)) {}

ChaChaKey PairKey::CipherKey() const {
  ChaChaKey key;
  std::copy_n(bytes.begin(), key.size(), key.begin());
  return key;
}

PairKey RandomPairKey() {
  PairKey key;
  size_t filled = 0;
  while (filled < key.bytes.size()) {
    const ssize_t got =
        getrandom(key.bytes.data() + filled, key.bytes.size() - filled, 0);
    if (got < 0) {
      if (errno == EINTR) continue;
      throw Error(std::string("getrandom failed: ") + std::strerror(errno));
    }
    filled += static_cast<size_t>(got);
  }
  return key;
}

std::vector<FixedWord> ExpandMask(const PairKey& key, uint64_t round,
                                  size_t count) {
  std::vector<uint64_t> words(count);
  kernels::parallel::ChaChaWords(key.CipherKey(), RoundNonce(round), words);
  std::vector<FixedWord> out(count);
  std::transform(words.begin(), words.end(), out.begin(), FixedWord::FromBits);
  return out;
}

MaskedUpdate MaskModel(const FixedModel& m, ClientId self,
                       std::span<const ClientId> peers, const KeyRing& keys,
                       uint64_t round) {
  const size_t total = m.ParameterCount();
  std::vector<FixedWord> flat;
  flat.reserve(total);
  for (const auto& layer : m.layers) {
    flat.insert(flat.end(), layer.values.begin(), layer.values.end());
  }

  std::vector<uint64_t> mask(total);
  for (ClientId peer : peers) {
    if (peer == self) continue;
    auto it = keys.find(peer);
    if (it == keys.end()) throw MissingKey(peer);
    kernels::parallel::ChaChaWords(it->second.CipherKey(), RoundNonce(round), mask);
    kernels::parallel::AccumulateWrapping(flat, mask, peer > self ? +1 : -1);
  }

  MaskedUpdate update{self, round, FixedModel{}};
  update.payload.layers.reserve(m.layers.size());
  size_t offset = 0;
  for (const auto& layer : m.layers) {
    auto begin = flat.begin() + static_cast<ptrdiff_t>(offset);
    update.payload.layers.push_back(
        {layer.name, std::vector<FixedWord>(begin, begin + layer.values.size())});
    offset += layer.values.size();
  }
  return update;
}

FixedModel SumPayloads(std::span<const MaskedUpdate> updates) {
  if (updates.empty()) throw Error("cannot sum zero updates");
  FixedModel sum = updates.front().payload;
  const ModelSchema schema = sum.Schema();
  for (size_t u = 1; u < updates.size(); ++u) {
    const auto& payload = updates[u].payload;
    CheckSchema(schema, payload.Schema(),
                "update from client " + std::to_string(updates[u].client_id));
    for (size_t l = 0; l < sum.layers.size(); ++l) {
      kernels::parallel::AddWrapping(sum.layers[l].values, payload.layers[l].values);
    }
  }
  return sum;
}

ModelVector Aggregate(std::span<const MaskedUpdate> updates, size_t n) {
  if (n == 0) throw Error("aggregate requires n >= 1");
  const uint64_t round = updates.empty() ? 0 : updates.front().round;
  std::set<ClientId> seen;
  for (const auto& u : updates) {
    if (u.round != round) {
      throw RoundMismatch("update from client " + std::to_string(u.client_id) +
                          " is for round " + std::to_string(u.round) +
                          ", expected " + std::to_string(round));
    }
    if (u.client_id >= n) {
      throw IncompleteRound(round, {},
                            "unexpected client " + std::to_string(u.client_id));
    }
    if (!seen.insert(u.client_id).second) throw DuplicateClientId(u.client_id);
  }
  if (seen.size() != n) {
    std::vector<uint32_t> missing;
    for (ClientId id = 0; id < n; ++id) {
      if (!seen.contains(id)) missing.push_back(id);
    }
    throw IncompleteRound(round, std::move(missing));
  }

  ModelVector avg = DecodeModel(SumPayloads(updates));
  const double count = static_cast<double>(n);
  for (auto& layer : avg.layers) {
    for (auto& v : layer.values) v /= count;
  }
  return avg;
}

}  // namespace maskfed
