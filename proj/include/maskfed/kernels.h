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

#ifndef MASKFED_KERNELS_H_
#define MASKFED_KERNELS_H_

// Data-parallel inner loops. Every kernel has a straightforward serial
// reference and an OpenMP version; the two must agree bit-for-bit, which
// the kernel tests check. Library code calls the parallel versions.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>

#include "maskfed/chacha20.h"
#include "maskfed/fixedpoint.h"

namespace maskfed::kernels {

inline constexpr size_t kNoError = std::numeric_limits<size_t>::max();

namespace serial {

// Keystream words starting at block 0; word k is bytes [8k, 8k+8) read LE.
void ChaChaWords(const ChaChaKey& key, const ChaChaNonce& nonce,
                 std::span<uint64_t> out);

// dst[i] += src[i] (sign > 0) or dst[i] -= src[i] (sign < 0), mod 2^64.
void AccumulateWrapping(std::span<FixedWord> dst, std::span<const uint64_t> src,
                        int sign);
void AddWrapping(std::span<FixedWord> dst, std::span<const FixedWord> src);

// Returns the first index that failed to encode, or kNoError.
size_t EncodeValues(std::span<const double> in, std::span<FixedWord> out);
void DecodeValues(std::span<const FixedWord> in, std::span<double> out);

// out[r] = sigmoid(dot(features[r*dim .. r*dim+dim), weights) + bias).
void PredictRows(std::span<const double> features, size_t dim,
                 std::span<const double> weights, double bias,
                 std::span<double> out);

}  // namespace serial

namespace parallel {

void ChaChaWords(const ChaChaKey& key, const ChaChaNonce& nonce,
                 std::span<uint64_t> out);
void AccumulateWrapping(std::span<FixedWord> dst, std::span<const uint64_t> src,
                        int sign);
void AddWrapping(std::span<FixedWord> dst, std::span<const FixedWord> src);
size_t EncodeValues(std::span<const double> in, std::span<FixedWord> out);
void DecodeValues(std::span<const FixedWord> in, std::span<double> out);
void PredictRows(std::span<const double> features, size_t dim,
                 std::span<const double> weights, double bias,
                 std::span<double> out);

}  // namespace parallel

double Sigmoid(double z);

}  // namespace maskfed::kernels

#endif  // MASKFED_KERNELS_H_
