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

#ifndef MASKFED_CHACHA20_H_
#define MASKFED_CHACHA20_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace maskfed {

using ChaChaKey = std::array<uint8_t, 32>;
using ChaChaNonce = std::array<uint8_t, 12>;

// One 64-byte ChaCha20 block (RFC 8439 layout: 32-bit block counter followed
// by a 96-bit nonce), returned as the 16 little-endian output words.
std::array<uint32_t, 16> ChaCha20Block(const ChaChaKey& key, uint32_t counter,
                                       const ChaChaNonce& nonce);

// 12-byte nonce used for mask streams: `round` as 8 LE bytes, then 4 zeros.
ChaChaNonce RoundNonce(uint64_t round);

// Deterministic generator over the ChaCha20 keystream keyed by a 64-bit seed
// (8 LE bytes, zero-padded to 32), nonce zero. Every draw is specified
// bit-exactly so that shuffles and synthetic data agree across platforms.
class KeystreamRng {
 public:
  explicit KeystreamRng(uint64_t seed);

  uint64_t NextWord();
  // Uniform in [0, bound) by rejection; bound > 0.
  uint64_t UniformBelow(uint64_t bound);
  // Uniform in [0, 1) with 53 random bits.
  double UniformDouble();
  // Standard normal via Box-Muller; consumes two uniforms per pair.
  double Normal();
  // Fisher-Yates, highest index first.
  void Shuffle(std::span<size_t> items);

 private:
  void Refill();

  ChaChaKey key_{};
  uint32_t counter_ = 0;
  std::array<uint64_t, 8> block_{};
  size_t next_ = 8;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace maskfed

#endif  // MASKFED_CHACHA20_H_
