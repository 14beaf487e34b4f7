// ldstext/kernels.hpp

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

#ifndef LDSTEXT_KERNELS_HPP_
#define LDSTEXT_KERNELS_HPP_

// Data-parallel inner loops.  Every OpenMP kernel has a `_serial` twin with
// identical arithmetic order per output element; the serial versions are the
// reference the tests and benchmarks compare against.

#include <cstdint>
#include <span>
#include <vector>

#include "ldstext/common.hpp"

namespace ldstext {

using TokenIds = std::vector<std::uint32_t>;

// Compressed sparse row matrix with sorted, duplicate-free column indices.
struct CsrMatrix {
  struct Entry {
    std::uint32_t row;
    std::uint32_t col;
    double value;
  };

  Index rows = 0;
  Index cols = 0;
  std::vector<std::int64_t> row_ptr{0};
  std::vector<std::uint32_t> col_idx;
  std::vector<double> values;

  // Sorts entries and sums duplicates.
  static CsrMatrix from_entries(Index rows, Index cols, std::vector<Entry> entries);
  static CsrMatrix from_dense(const Matrix &m);

  Index nnz() const { return static_cast<Index>(values.size()); }
  CsrMatrix transposed() const;
  // diag(left) * S * diag(right)
  CsrMatrix scaled(const Vector &left, const Vector &right) const;
  Matrix dense() const;
  double trace() const;
};

// One lag's worth of co-occurrence counts: `first` at position t, `second`
// at position t + k.
struct PairCount {
  std::uint32_t first;
  std::uint32_t second;
  std::uint64_t count;

  friend bool operator==(const PairCount &, const PairCount &) = default;
};

// Per-lag sorted triples; index 0 holds lag 1.
using LagPairCounts = std::vector<std::vector<PairCount>>;

namespace kernels {

// out = xt * S^T, i.e. out.col(i) = sum_j S(i, j) * xt.col(j).
// xt is p x S.cols; out is resized to p x S.rows.
void dense_times_csr_transpose_serial(const CsrMatrix &s, const Matrix &xt, Matrix &out);
void dense_times_csr_transpose(const CsrMatrix &s, const Matrix &xt, Matrix &out);

// Counts in-sentence pairs at lags 1..max_lag.
LagPairCounts count_pairs_serial(std::span<const TokenIds> sentences, int max_lag);
LagPairCounts count_pairs(std::span<const TokenIds> sentences, int max_lag);

// Merges sorted triple lists, summing counts of equal (first, second).
std::vector<PairCount> merge_sorted_counts(const std::vector<PairCount> &a,
                                           const std::vector<PairCount> &b);

// Steady-state filtering of many sentences: x_t = F x_{t-1} + gain.col(id_t),
// x_0 = 0.  Ids >= gain.cols() are replaced by `fallback_id`.  Each output is
// T x h (one row per token).
std::vector<Matrix> filter_batch_serial(const Matrix &transition, const Matrix &gain_columns,
                                        std::span<const TokenIds> sentences,
                                        std::uint32_t fallback_id);
std::vector<Matrix> filter_batch(const Matrix &transition, const Matrix &gain_columns,
                                 std::span<const TokenIds> sentences, std::uint32_t fallback_id);

// Single-sentence filter shared by both batch variants.
Matrix filter_tokens(const Matrix &transition, const Matrix &gain_columns, const TokenIds &ids,
                     std::uint32_t fallback_id);

}  // namespace kernels
}  // namespace ldstext

#endif  // LDSTEXT_KERNELS_HPP_
