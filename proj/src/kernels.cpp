// kernels.cpp

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

#include "ldstext/kernels.hpp"

#include <algorithm>
#include <unordered_map>

#include <omp.h>

namespace ldstext {

CsrMatrix CsrMatrix::from_entries(Index rows, Index cols, std::vector<Entry> entries) {
  std::sort(entries.begin(), entries.end(), [](const Entry &a, const Entry &b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  CsrMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.row_ptr.assign(static_cast<std::size_t>(rows) + 1, 0);
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const Entry &x = entries[e];
    if (x.row >= rows || x.col >= cols) throw Error("CsrMatrix: entry out of range");
    if (!m.col_idx.empty() && e > 0 && entries[e - 1].row == x.row &&
        entries[e - 1].col == x.col) {
      m.values.back() += x.value;
      continue;
    }
    m.col_idx.push_back(x.col);
    m.values.push_back(x.value);
    ++m.row_ptr[x.row + 1];
  }
  for (Index i = 0; i < rows; ++i) m.row_ptr[i + 1] += m.row_ptr[i];
  return m;
}

CsrMatrix CsrMatrix::from_dense(const Matrix &d) {
  std::vector<Entry> entries;
  for (Index i = 0; i < d.rows(); ++i)
    for (Index j = 0; j < d.cols(); ++j)
      if (d(i, j) != 0.0)
        entries.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), d(i, j)});
  return from_entries(d.rows(), d.cols(), std::move(entries));
}

CsrMatrix CsrMatrix::transposed() const {
  CsrMatrix t;
  t.rows = cols;
  t.cols = rows;
  t.row_ptr.assign(static_cast<std::size_t>(cols) + 1, 0);
  for (std::uint32_t c : col_idx) ++t.row_ptr[c + 1];
  for (Index j = 0; j < cols; ++j) t.row_ptr[j + 1] += t.row_ptr[j];
  t.col_idx.resize(col_idx.size());
  t.values.resize(values.size());
  std::vector<std::int64_t> cursor(t.row_ptr.begin(), t.row_ptr.end() - 1);
  for (Index i = 0; i < rows; ++i) {
    for (std::int64_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
      const std::int64_t dst = cursor[col_idx[p]]++;
      t.col_idx[dst] = static_cast<std::uint32_t>(i);
      t.values[dst] = values[p];
    }
  }
  return t;
}

CsrMatrix CsrMatrix::scaled(const Vector &left, const Vector &right) const {
  CsrMatrix s = *this;
  for (Index i = 0; i < rows; ++i)
    for (std::int64_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p)
      s.values[p] *= left(i) * right(col_idx[p]);
  return s;
}

Matrix CsrMatrix::dense() const {
  Matrix d = Matrix::Zero(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (std::int64_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) d(i, col_idx[p]) += values[p];
  return d;
}

double CsrMatrix::trace() const {
  double t = 0.0;
  for (Index i = 0; i < rows; ++i)
    for (std::int64_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p)
      if (col_idx[p] == i) t += values[p];
  return t;
}

namespace kernels {
namespace {

inline void csr_row_accumulate(const CsrMatrix &s, const Matrix &xt, Matrix &out, Index i) {
  auto dst = out.col(i);
  dst.setZero();
  for (std::int64_t p = s.row_ptr[i]; p < s.row_ptr[i + 1]; ++p)
    dst.noalias() += s.values[p] * xt.col(s.col_idx[p]);
}

// Fixed chunking keeps the reduction order independent of the thread count.
constexpr std::size_t kCountChunks = 64;

std::vector<PairCount> flatten_sorted(const std::unordered_map<std::uint64_t, std::uint64_t> &m) {
  std::vector<PairCount> v;
  v.reserve(m.size());
  for (const auto &[key, count] : m)
    v.push_back({static_cast<std::uint32_t>(key >> 32), static_cast<std::uint32_t>(key), count});
  std::sort(v.begin(), v.end(), [](const PairCount &a, const PairCount &b) {
    return a.first != b.first ? a.first < b.first : a.second < b.second;
  });
  return v;
}

LagPairCounts count_range(std::span<const TokenIds> sentences, int max_lag) {
  std::vector<std::unordered_map<std::uint64_t, std::uint64_t>> maps(max_lag);
  for (const TokenIds &s : sentences) {
    const std::size_t n = s.size();
    for (int k = 1; k <= max_lag; ++k) {
      auto &m = maps[k - 1];
      for (std::size_t t = 0; t + k < n; ++t)
        ++m[(static_cast<std::uint64_t>(s[t]) << 32) | s[t + k]];
    }
  }
  LagPairCounts out(max_lag);
  for (int k = 0; k < max_lag; ++k) out[k] = flatten_sorted(maps[k]);
  return out;
}

}  // namespace

void dense_times_csr_transpose_serial(const CsrMatrix &s, const Matrix &xt, Matrix &out) {
  if (xt.cols() != s.cols) throw Error("dense_times_csr_transpose: shape mismatch");
  out.resize(xt.rows(), s.rows);
  for (Index i = 0; i < s.rows; ++i) csr_row_accumulate(s, xt, out, i);
}

void dense_times_csr_transpose(const CsrMatrix &s, const Matrix &xt, Matrix &out) {
  if (xt.cols() != s.cols) throw Error("dense_times_csr_transpose: shape mismatch");
  out.resize(xt.rows(), s.rows);
  const Index rows = s.rows;
#pragma omp parallel for schedule(dynamic, 256)
  for (Index i = 0; i < rows; ++i) csr_row_accumulate(s, xt, out, i);
}

std::vector<PairCount> merge_sorted_counts(const std::vector<PairCount> &a,
                                           const std::vector<PairCount> &b) {
  std::vector<PairCount> out;
  out.reserve(a.size() + b.size());
  std::size_t i = 0, j = 0;
  auto less = [](const PairCount &x, const PairCount &y) {
    return x.first != y.first ? x.first < y.first : x.second < y.second;
  };
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && less(a[i], b[j]))) {
      out.push_back(a[i++]);
    } else if (i == a.size() || less(b[j], a[i])) {
      out.push_back(b[j++]);
    } else {
      out.push_back({a[i].first, a[i].second, a[i].count + b[j].count});
      ++i;
      ++j;
    }
  }
  return out;
}

LagPairCounts count_pairs_serial(std::span<const TokenIds> sentences, int max_lag) {
  return count_range(sentences, max_lag);
}

LagPairCounts count_pairs(std::span<const TokenIds> sentences, int max_lag) {
  const std::size_t n = sentences.size();
  const std::size_t chunks = std::max<std::size_t>(1, std::min(kCountChunks, n));
  std::vector<LagPairCounts> partial(chunks);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t begin = n * c / chunks;
    const std::size_t end = n * (c + 1) / chunks;
    partial[c] = count_range(sentences.subspan(begin, end - begin), max_lag);
  }
  LagPairCounts out(max_lag);
  for (int k = 0; k < max_lag; ++k)
    for (std::size_t c = 0; c < chunks; ++c) out[k] = merge_sorted_counts(out[k], partial[c][k]);
  return out;
}

Matrix filter_tokens(const Matrix &transition, const Matrix &gain_columns, const TokenIds &ids,
                     std::uint32_t fallback_id) {
  const Index h = transition.rows();
  const Index n = static_cast<Index>(ids.size());
  Matrix out(n, h);
  Vector x = Vector::Zero(h);
  Vector next(h);
  const std::uint32_t vocab = static_cast<std::uint32_t>(gain_columns.cols());
  for (Index t = 0; t < n; ++t) {
    const std::uint32_t id = ids[t] < vocab ? ids[t] : fallback_id;
    next.noalias() = transition * x;
    next += gain_columns.col(id);
    x.swap(next);
    out.row(t) = x.transpose();
  }
  return out;
}

std::vector<Matrix> filter_batch_serial(const Matrix &transition, const Matrix &gain_columns,
                                        std::span<const TokenIds> sentences,
                                        std::uint32_t fallback_id) {
  std::vector<Matrix> out(sentences.size());
  for (std::size_t s = 0; s < sentences.size(); ++s)
    out[s] = filter_tokens(transition, gain_columns, sentences[s], fallback_id);
  return out;
}

std::vector<Matrix> filter_batch(const Matrix &transition, const Matrix &gain_columns,
                                 std::span<const TokenIds> sentences, std::uint32_t fallback_id) {
  std::vector<Matrix> out(sentences.size());
  const std::int64_t n = static_cast<std::int64_t>(sentences.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t s = 0; s < n; ++s)
    out[s] = filter_tokens(transition, gain_columns, sentences[s], fallback_id);
  return out;
}

}  // namespace kernels
}  // namespace ldstext
