// bench_kernels.cpp

// Copyright 2026 The ldstext Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Serial vs OpenMP kernels, plus the per-token filter cost in T and h.

#include <benchmark/benchmark.h>

#include "ldstext/kernels.hpp"
#include "ldstext/rng.hpp"
#include "ldstext/structured_linalg.hpp"
#include "ldstext/synth.hpp"

using namespace ldstext;

namespace {

std::vector<TokenIds> corpus(Index tokens) {
  return sample_hmm_text(8, 2000, tokens, 7, 25).sentences;
}

CsrMatrix random_csr(Index n, Index per_row) {
  Rng rng(3);
  std::vector<CsrMatrix::Entry> e;
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < per_row; ++k)
      e.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(rng.below(n)),
                   rng.normal()});
  return CsrMatrix::from_entries(n, n, std::move(e));
}

void BM_CountPairsSerial(benchmark::State &st) {
  const auto c = corpus(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::count_pairs_serial(c, 7));
}
void BM_CountPairs(benchmark::State &st) {
  const auto c = corpus(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::count_pairs(c, 7));
}

void BM_CsrApplySerial(benchmark::State &st) {
  const CsrMatrix s = random_csr(st.range(0), 20);
  Rng rng(1);
  const Matrix xt = rng.normal_matrix(16, s.cols);
  Matrix out;
  for (auto _ : st) kernels::dense_times_csr_transpose_serial(s, xt, out);
}
void BM_CsrApply(benchmark::State &st) {
  const CsrMatrix s = random_csr(st.range(0), 20);
  Rng rng(1);
  const Matrix xt = rng.normal_matrix(16, s.cols);
  Matrix out;
  for (auto _ : st) kernels::dense_times_csr_transpose(s, xt, out);
}

void BM_FilterBatch(benchmark::State &st) {
  const Index h = st.range(1);
  const auto c = corpus(st.range(0));
  Rng rng(2);
  Matrix f = rng.normal_matrix(h, h);
  f *= 0.9 / dense::spectral_radius(f);
  const Matrix gain = rng.normal_matrix(h, 2000);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::filter_batch(f, gain, c, 0));
}
void BM_FilterBatchSerial(benchmark::State &st) {
  const Index h = st.range(1);
  const auto c = corpus(st.range(0));
  Rng rng(2);
  Matrix f = rng.normal_matrix(h, h);
  f *= 0.9 / dense::spectral_radius(f);
  const Matrix gain = rng.normal_matrix(h, 2000);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::filter_batch_serial(f, gain, c, 0));
}

}  // namespace

BENCHMARK(BM_CountPairsSerial)->Arg(100000)->Arg(400000);
BENCHMARK(BM_CountPairs)->Arg(100000)->Arg(400000);
BENCHMARK(BM_CsrApplySerial)->Arg(20000)->Arg(80000);
BENCHMARK(BM_CsrApply)->Arg(20000)->Arg(80000);
BENCHMARK(BM_FilterBatchSerial)->Args({100000, 50})->Args({100000, 100});
BENCHMARK(BM_FilterBatch)->Args({100000, 50})->Args({100000, 100})->Args({200000, 100});

BENCHMARK_MAIN();
