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

// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "maskfed/kernels.h"

namespace maskfed {
namespace {

ChaChaKey BenchKey() {
  ChaChaKey k{};
  for (size_t i = 0; i < k.size(); ++i) k[i] = static_cast<uint8_t>(i);
  return k;
}

template <void (*Fn)(const ChaChaKey&, const ChaChaNonce&, std::span<uint64_t>)>
void BM_ChaChaWords(benchmark::State& state) {
  std::vector<uint64_t> out(static_cast<size_t>(state.range(0)));
  for (auto _ : state) {
    Fn(BenchKey(), RoundNonce(1), out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetBytesProcessed(state.iterations() * state.range(0) * 8);
}
BENCHMARK(BM_ChaChaWords<kernels::serial::ChaChaWords>)->Name("chacha/serial")->Range(1 << 10, 1 << 22);
BENCHMARK(BM_ChaChaWords<kernels::parallel::ChaChaWords>)->Name("chacha/parallel")->Range(1 << 10, 1 << 22);

template <void (*Fn)(std::span<FixedWord>, std::span<const uint64_t>, int)>
void BM_Accumulate(benchmark::State& state) {
  const size_t n = static_cast<size_t>(state.range(0));
  std::vector<uint64_t> src(n, 0x9e3779b97f4a7c15ull);
  std::vector<FixedWord> dst(n);
  for (auto _ : state) {
    Fn(dst, src, 1);
    benchmark::DoNotOptimize(dst.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Accumulate<kernels::serial::AccumulateWrapping>)->Name("accumulate/serial")->Range(1 << 10, 1 << 22);
BENCHMARK(BM_Accumulate<kernels::parallel::AccumulateWrapping>)->Name("accumulate/parallel")->Range(1 << 10, 1 << 22);

template <size_t (*Fn)(std::span<const double>, std::span<FixedWord>)>
void BM_Encode(benchmark::State& state) {
  const size_t n = static_cast<size_t>(state.range(0));
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> d(-100, 100);
  std::vector<double> in(n);
  for (auto& v : in) v = d(gen);
  std::vector<FixedWord> out(n);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(in, out));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Encode<kernels::serial::EncodeValues>)->Name("encode/serial")->Range(1 << 10, 1 << 22);
BENCHMARK(BM_Encode<kernels::parallel::EncodeValues>)->Name("encode/parallel")->Range(1 << 10, 1 << 22);

template <void (*Fn)(std::span<const double>, size_t, std::span<const double>, double,
                     std::span<double>)>
void BM_Predict(benchmark::State& state) {
  const size_t rows = static_cast<size_t>(state.range(0)), dim = 64;
  std::mt19937_64 gen(2);
  std::normal_distribution<double> nd;
  std::vector<double> x(rows * dim), w(dim), out(rows);
  for (auto& v : x) v = nd(gen);
  for (auto& v : w) v = nd(gen);
  for (auto _ : state) {
    Fn(x, dim, w, 0.1, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Predict<kernels::serial::PredictRows>)->Name("predict/serial")->Range(1 << 8, 1 << 16);
BENCHMARK(BM_Predict<kernels::parallel::PredictRows>)->Name("predict/parallel")->Range(1 << 8, 1 << 16);

}  // namespace
}  // namespace maskfed

BENCHMARK_MAIN();
