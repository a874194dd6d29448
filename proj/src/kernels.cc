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

#include "maskfed/kernels.h"

#include <algorithm>
#include <cmath>

namespace maskfed::kernels {
namespace {

constexpr size_t kWordsPerBlock = 8;

void WriteBlockWords(const ChaChaKey& key, const ChaChaNonce& nonce,
                     size_t block, std::span<uint64_t> out) {
  const auto words = ChaCha20Block(key, static_cast<uint32_t>(block), nonce);
  const size_t base = block * kWordsPerBlock;
  const size_t n = std::min(kWordsPerBlock, out.size() - base);
  for (size_t k = 0; k < n; ++k) {
    out[base + k] = static_cast<uint64_t>(words[2 * k]) |
                    static_cast<uint64_t>(words[2 * k + 1]) << 32;
  }
}

size_t BlockCount(size_t words) {
  return (words + kWordsPerBlock - 1) / kWordsPerBlock;
}

}  // namespace

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace serial {

void ChaChaWords(const ChaChaKey& key, const ChaChaNonce& nonce,
                 std::span<uint64_t> out) {
  const size_t blocks = BlockCount(out.size());
  for (size_t b = 0; b < blocks; ++b) WriteBlockWords(key, nonce, b, out);
}

void AccumulateWrapping(std::span<FixedWord> dst, std::span<const uint64_t> src,
                        int sign) {
  for (size_t i = 0; i < dst.size(); ++i) {
    const FixedWord m = FixedWord::FromBits(src[i]);
    dst[i] = sign > 0 ? dst[i] + m : dst[i] - m;
  }
}

void AddWrapping(std::span<FixedWord> dst, std::span<const FixedWord> src) {
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

size_t EncodeValues(std::span<const double> in, std::span<FixedWord> out) {
  for (size_t i = 0; i < in.size(); ++i) {
    if (!TryEncode(in[i], &out[i])) return i;
  }
  return kNoError;
}

void DecodeValues(std::span<const FixedWord> in, std::span<double> out) {
  for (size_t i = 0; i < in.size(); ++i) out[i] = Decode(in[i]);
}

void PredictRows(std::span<const double> features, size_t dim,
                 std::span<const double> weights, double bias,
                 std::span<double> out) {
  for (size_t r = 0; r < out.size(); ++r) {
    double z = bias;
    for (size_t j = 0; j < dim; ++j) z += weights[j] * features[r * dim + j];
    out[r] = Sigmoid(z);
  }
}

}  // namespace serial

namespace parallel {

void ChaChaWords(const ChaChaKey& key, const ChaChaNonce& nonce,
                 std::span<uint64_t> out) {
  const auto blocks = static_cast<int64_t>(BlockCount(out.size()));
#pragma omp parallel for schedule(static) if (blocks > 64)
  for (int64_t b = 0; b < blocks; ++b) {
    WriteBlockWords(key, nonce, static_cast<size_t>(b), out);
  }
}

void AccumulateWrapping(std::span<FixedWord> dst, std::span<const uint64_t> src,
                        int sign) {
  const auto n = static_cast<int64_t>(dst.size());
  if (sign > 0) {
#pragma omp parallel for simd schedule(static) if (n > 4096)
    for (int64_t i = 0; i < n; ++i) dst[i] += FixedWord::FromBits(src[i]);
  } else {
#pragma omp parallel for simd schedule(static) if (n > 4096)
    for (int64_t i = 0; i < n; ++i) dst[i] -= FixedWord::FromBits(src[i]);
  }
}

void AddWrapping(std::span<FixedWord> dst, std::span<const FixedWord> src) {
  const auto n = static_cast<int64_t>(dst.size());
#pragma omp parallel for simd schedule(static) if (n > 4096)
  for (int64_t i = 0; i < n; ++i) dst[i] += src[i];
}

size_t EncodeValues(std::span<const double> in, std::span<FixedWord> out) {
  const auto n = static_cast<int64_t>(in.size());
  size_t first_bad = kNoError;
#pragma omp parallel for schedule(static) reduction(min : first_bad) if (n > 4096)
  for (int64_t i = 0; i < n; ++i) {
    if (!TryEncode(in[i], &out[i])) {
      first_bad = std::min(first_bad, static_cast<size_t>(i));
    }
  }
  return first_bad;
}

void DecodeValues(std::span<const FixedWord> in, std::span<double> out) {
  const auto n = static_cast<int64_t>(in.size());
#pragma omp parallel for simd schedule(static) if (n > 4096)
  for (int64_t i = 0; i < n; ++i) out[i] = Decode(in[i]);
}

void PredictRows(std::span<const double> features, size_t dim,
                 std::span<const double> weights, double bias,
                 std::span<double> out) {
  const auto rows = static_cast<int64_t>(out.size());
  // Each row keeps the serial summation order, so results match exactly.
#pragma omp parallel for schedule(static) if (rows > 256)
  for (int64_t r = 0; r < rows; ++r) {
    double z = bias;
    for (size_t j = 0; j < dim; ++j) z += weights[j] * features[r * dim + j];
    out[r] = Sigmoid(z);
  }
}

}  // namespace parallel
}  // namespace maskfed::kernels
