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

#ifndef MASKFED_MASKING_H_
#define MASKFED_MASKING_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "maskfed/chacha20.h"
#include "maskfed/fixedpoint.h"
#include "maskfed/model.h"

namespace maskfed {

using ClientId = uint32_t;

inline constexpr size_t kPairKeyBytes = 128;

// 1024-bit secret shared by exactly one client pair. Only the first 32 bytes
// key the mask stream; the remainder is reserved.
struct PairKey {
  std::array<uint8_t, kPairKeyBytes> bytes{};

  ChaChaKey CipherKey() const;
  bool operator==(const PairKey&) const = default;
};

// Draws a key from the operating system's cryptographic randomness source.
PairKey RandomPairKey();

// Keys held by one client, indexed by peer id.
using KeyRing = std::map<ClientId, PairKey>;

// `count` mask words from ChaCha20(key, nonce = round || 0u32, counter 0).
// Both holders of `key` obtain bit-identical sequences.
std::vector<FixedWord> ExpandMask(const PairKey& key, uint64_t round,
                                  size_t count);

struct MaskedUpdate {
  ClientId client_id = 0;
  uint64_t round = 0;
  FixedModel payload;

  bool operator==(const MaskedUpdate&) const = default;
};

// payload = m + sum_{peer > self} mask(peer) - sum_{peer < self} mask(peer),
// with masks laid out over the flattened parameter vector in layer order.
// Throws MissingKey when a peer has no key in `keys`.
MaskedUpdate MaskModel(const FixedModel& m, ClientId self,
                       std::span<const ClientId> peers, const KeyRing& keys,
                       uint64_t round);

// Wrapping sum of all payloads. Requires at least one update and identical
// schemas (SchemaMismatch otherwise).
FixedModel SumPayloads(std::span<const MaskedUpdate> updates);

// Secure average of exactly one update per client id 0..n-1, all for the
// same round: decode(sum of payloads) / n. Throws IncompleteRound listing
// absent ids (never averages a subset) and RoundMismatch on mixed rounds.
ModelVector Aggregate(std::span<const MaskedUpdate> updates, size_t n);

}  // namespace maskfed

#endif  // MASKFED_MASKING_H_
