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

#ifndef MASKFED_FIXEDPOINT_H_
#define MASKFED_FIXEDPOINT_H_

#include <cstdint>
#include <type_traits>

#include "maskfed/model.h"

namespace maskfed {

// Signed 64-bit two's-complement fixed-point word with 24 fractional bits.
// Arithmetic wraps modulo 2^64 so that pairwise masks cancel exactly.
class FixedWord {
 public:
  constexpr FixedWord() = default;
  constexpr explicit FixedWord(int64_t raw) : raw_(raw) {}

  static constexpr FixedWord FromBits(uint64_t bits) {
    return FixedWord(static_cast<int64_t>(bits));
  }

  constexpr int64_t raw() const { return raw_; }
  constexpr uint64_t bits() const { return static_cast<uint64_t>(raw_); }

  friend constexpr FixedWord operator+(FixedWord a, FixedWord b) {
    return FromBits(a.bits() + b.bits());
  }
  friend constexpr FixedWord operator-(FixedWord a, FixedWord b) {
    return FromBits(a.bits() - b.bits());
  }
  constexpr FixedWord operator-() const { return FromBits(0 - bits()); }
  constexpr FixedWord& operator+=(FixedWord o) { return *this = *this + o; }
  constexpr FixedWord& operator-=(FixedWord o) { return *this = *this - o; }

  friend constexpr bool operator==(FixedWord, FixedWord) = default;

 private:
  int64_t raw_ = 0;
};

static_assert(sizeof(FixedWord) == 8);
static_assert(std::is_trivially_copyable_v<FixedWord>);

inline constexpr int kFractionalBits = 24;
inline constexpr double kFixedScale = 16777216.0;  // 2^24
// Encodable reals satisfy |x| < 2^39.
inline constexpr double kEncodeLimit = 549755813888.0;

// Round-to-nearest-even of x * 2^24. Throws DomainError for NaN/inf and
// RangeError for |x| >= 2^39.
FixedWord Encode(double x);

// Non-throwing form of Encode; false when x is non-finite or out of range.
bool TryEncode(double x, FixedWord* out) noexcept;

// Signed value / 2^24. Exact whenever |raw| <= 2^53, which covers every
// word produced by Encode.
double Decode(FixedWord w);

using FixedModel = LayeredModel<FixedWord>;

// Element-wise Encode. Errors name the offending layer and index.
FixedModel EncodeModel(const ModelVector& m);
ModelVector DecodeModel(const FixedModel& m);

// Element-wise addition modulo 2^64. Throws SchemaMismatch.
FixedModel WrappingAdd(const FixedModel& a, const FixedModel& b);
FixedModel WrappingSub(const FixedModel& a, const FixedModel& b);
FixedModel Negate(const FixedModel& m);

// Snaps every parameter onto the 2^-24 grid: DecodeModel(EncodeModel(m)).
ModelVector Quantize(const ModelVector& m);

}  // namespace maskfed

#endif  // MASKFED_FIXEDPOINT_H_
