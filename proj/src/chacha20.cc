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

#include "maskfed/chacha20.h"

#include <bit>
#include <cmath>
#include <numbers>
#include <utility>

namespace maskfed {
namespace {

uint32_t LoadLe32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
         static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

inline void QuarterRound(uint32_t& a, uint32_t& b, uint32_t& c, uint32_t& d) {
  a += b; d ^= a; d = std::rotl(d, 16);
  c += d; b ^= c; b = std::rotl(b, 12);
  a += b; d ^= a; d = std::rotl(d, 8);
  c += d; b ^= c; b = std::rotl(b, 7);
}

}  // namespace

std::array<uint32_t, 16> ChaCha20Block(const ChaChaKey& key, uint32_t counter,
                                       const ChaChaNonce& nonce) {
  std::array<uint32_t, 16> in{0x61707865u, 0x3320646eu, 0x79622d32u,
                              0x6b206574u};
  for (int i = 0; i < 8; ++i) in[4 + i] = LoadLe32(key.data() + 4 * i);
  in[12] = counter;
  for (int i = 0; i < 3; ++i) in[13 + i] = LoadLe32(nonce.data() + 4 * i);

  std::array<uint32_t, 16> x = in;
  for (int i = 0; i < 10; ++i) {
    QuarterRound(x[0], x[4], x[8], x[12]);
    QuarterRound(x[1], x[5], x[9], x[13]);
    QuarterRound(x[2], x[6], x[10], x[14]);
    QuarterRound(x[3], x[7], x[11], x[15]);
    QuarterRound(x[0], x[5], x[10], x[15]);
    QuarterRound(x[1], x[6], x[11], x[12]);
    QuarterRound(x[2], x[7], x[8], x[13]);
    QuarterRound(x[3], x[4], x[9], x[14]);
  }
  for (int i = 0; i < 16; ++i) x[i] += in[i];
  return x;
}

ChaChaNonce RoundNonce(uint64_t round) {
  ChaChaNonce nonce{};
  for (int i = 0; i < 8; ++i) nonce[i] = static_cast<uint8_t>(round >> (8 * i));
  return nonce;
}

KeystreamRng::KeystreamRng(uint64_t seed) {
  for (int i = 0; i < 8; ++i) key_[i] = static_cast<uint8_t>(seed >> (8 * i));
}

void KeystreamRng::Refill() {
  const auto words = ChaCha20Block(key_, counter_++, ChaChaNonce{});
  for (size_t k = 0; k < 8; ++k) {
    block_[k] = static_cast<uint64_t>(words[2 * k]) |
                static_cast<uint64_t>(words[2 * k + 1]) << 32;
  }
  next_ = 0;
}

uint64_t KeystreamRng::NextWord() {
  if (next_ == block_.size()) Refill();
  return block_[next_++];
}

uint64_t KeystreamRng::UniformBelow(uint64_t bound) {
  // Reject the top partial bucket so every residue is equally likely.
  const uint64_t limit = bound * (UINT64_MAX / bound);
  for (;;) {
    const uint64_t w = NextWord();
    if (w < limit) return w % bound;
  }
}

double KeystreamRng::UniformDouble() {
  return static_cast<double>(NextWord() >> 11) * 0x1.0p-53;
}

double KeystreamRng::Normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  // 1 - U lies in (0, 1], keeping the log finite.
  const double u1 = 1.0 - UniformDouble();
  const double u2 = UniformDouble();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_normal_ = radius * std::sin(theta);
  has_spare_normal_ = true;
  return radius * std::cos(theta);
}

void KeystreamRng::Shuffle(std::span<size_t> items) {
  for (size_t i = items.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(UniformBelow(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace maskfed
