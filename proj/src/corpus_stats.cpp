// corpus_stats.cpp

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

#include "ldstext/corpus_stats.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

#include "ldstext/binary_io.hpp"

namespace ldstext {

namespace {

constexpr std::string_view kCountsMagic = "LDSCNT01";
constexpr std::uint32_t kCountsVersion = 1;

void split_whitespace(const std::string &line, Sentence &out) {
  out.clear();
  std::size_t i = 0;
  const std::size_t n = line.size();
  while (i < n) {
    while (i < n && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < n && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.emplace_back(line, i, j - i);
    i = j;
  }
}

void recompute_mu(CooccurrenceStats &s) {
  const double denom =
      static_cast<double>(s.total_tokens) + static_cast<double>(s.vocab_size) * s.pseudocount;
  s.mu = Vector::Zero(s.vocab_size);
  if (denom <= 0.0) return;
  for (Index i = 0; i < s.vocab_size; ++i)
    s.mu(i) = (static_cast<double>(s.unigram_counts[i]) + s.pseudocount) / denom;
}

}  // namespace

bool VectorSentenceStream::next(Sentence &out) {
  while (pos_ < sentences_.size()) {
    const Sentence &s = sentences_[pos_++];
    if (s.empty()) continue;
    out = s;
    return true;
  }
  return false;
}

FileSentenceStream::FileSentenceStream(std::string path) : path_(std::move(path)) { rewind(); }

bool FileSentenceStream::next(Sentence &out) {
  std::string line;
  while (std::getline(in_, line)) {
    split_whitespace(line, out);
    if (!out.empty()) return true;
  }
  return false;
}

void FileSentenceStream::rewind() {
  in_.close();
  in_.clear();
  in_.open(path_);
  if (!in_) throw Error("cannot open corpus " + path_);
}

std::string normalize_token(std::string_view raw) {
  for (char c : raw)
    if (c >= '0' && c <= '9') return std::string(kNumToken);
  return std::string(raw);
}

std::uint32_t Vocab::lookup(std::string_view raw) const {
  const std::string norm = normalize_token(raw);
  auto it = id_of_token.find(norm);
  return it == id_of_token.end() ? oov_id : it->second;
}

TokenIds Vocab::encode(const Sentence &sentence) const {
  TokenIds ids;
  ids.reserve(sentence.size());
  for (const std::string &tok : sentence) ids.push_back(lookup(tok));
  return ids;
}

std::uint64_t Vocab::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const std::string &tok : token_of_id) {
    h = fnv1a64(tok, h);
    h = fnv1a64(std::string_view("\0", 1), h);
  }
  return h;
}

Vocab Vocab::from_regular_tokens(std::vector<std::string> regular) {
  Vocab v;
  v.token_of_id = std::move(regular);
  v.oov_id = static_cast<std::uint32_t>(v.token_of_id.size());
  v.token_of_id.emplace_back(kOovToken);
  v.num_id = static_cast<std::uint32_t>(v.token_of_id.size());
  v.token_of_id.emplace_back(kNumToken);
  for (std::uint32_t i = 0; i < v.token_of_id.size(); ++i) {
    if (!v.id_of_token.emplace(v.token_of_id[i], i).second)
      throw Error("duplicate vocabulary token: " + v.token_of_id[i]);
  }
  return v;
}

Vocab build_vocab(SentenceStream &stream, std::size_t max_types) {
  if (max_types < 1) throw Error("build_vocab: max_types must be positive");
  std::unordered_map<std::string, std::uint64_t> freq;
  Sentence s;
  std::uint64_t tokens = 0;
  stream.rewind();
  while (stream.next(s)) {
    for (const std::string &tok : s) {
      ++freq[normalize_token(tok)];
      ++tokens;
    }
  }
  if (tokens == 0) throw Error("empty corpus");
  std::vector<std::pair<std::string, std::uint64_t>> types;
  for (auto &[tok, n] : freq)
    if (tok != kNumToken && tok != kOovToken) types.emplace_back(tok, n);
  std::sort(types.begin(), types.end(), [](const auto &a, const auto &b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (types.size() > max_types) types.resize(max_types);
  std::vector<std::string> regular;
  regular.reserve(types.size());
  for (auto &t : types) regular.push_back(std::move(t.first));
  return Vocab::from_regular_tokens(std::move(regular));
}

std::uint64_t CooccurrenceStats::pair_total(int k) const {
  std::uint64_t n = 0;
  for (const PairCount &p : lag(k)) n += p.count;
  return n;
}

const std::vector<PairCount> &CooccurrenceStats::lag(int k) const {
  if (k < 1 || k > max_lag) throw Error("lag " + std::to_string(k) + " not counted");
  return pair_counts[k - 1];
}

CooccurrenceStats CooccurrenceStats::empty(const Vocab &vocab, int max_lag) {
  CooccurrenceStats s;
  s.vocab_size = vocab.size();
  s.vocab_fingerprint = vocab.fingerprint();
  s.unigram_counts.assign(vocab.size(), 0);
  s.mu = Vector::Zero(vocab.size());
  s.max_lag = max_lag;
  s.pair_counts.assign(max_lag, {});
  return s;
}

CooccurrenceStats accumulate_counts(std::span<const TokenIds> sentences, Index vocab_size,
                                    std::uint64_t vocab_fingerprint, const CountOptions &options) {
  if (options.max_lag < 1) throw Error("accumulate_counts: max_lag must be >= 1");
  CooccurrenceStats s;
  s.vocab_size = vocab_size;
  s.vocab_fingerprint = vocab_fingerprint;
  s.max_lag = options.max_lag;
  s.cross_sentence = options.cross_sentence;
  s.unigram_counts.assign(vocab_size, 0);
  for (const TokenIds &ids : sentences) {
    for (std::uint32_t id : ids) {
      if (id >= vocab_size) throw Error("accumulate_counts: token id out of range");
      ++s.unigram_counts[id];
    }
    s.total_tokens += ids.size();
  }
  if (options.cross_sentence) {
    TokenIds stream;
    stream.reserve(s.total_tokens);
    for (const TokenIds &ids : sentences) stream.insert(stream.end(), ids.begin(), ids.end());
    s.pair_counts = kernels::count_pairs(std::span<const TokenIds>(&stream, 1), options.max_lag);
  } else {
    s.pair_counts = kernels::count_pairs(sentences, options.max_lag);
  }
  recompute_mu(s);
  return s;
}

CooccurrenceStats accumulate_counts(SentenceStream &stream, const Vocab &vocab,
                                    const CountOptions &options) {
  std::vector<TokenIds> encoded;
  Sentence s;
  stream.rewind();
  while (stream.next(s)) encoded.push_back(vocab.encode(s));
  return accumulate_counts(encoded, vocab.size(), vocab.fingerprint(), options);
}

CooccurrenceStats merge_stats(const CooccurrenceStats &a, const CooccurrenceStats &b) {
  if (a.vocab_size != b.vocab_size || a.vocab_fingerprint != b.vocab_fingerprint)
    throw Error("merge_stats: vocabulary mismatch");
  if (a.max_lag != b.max_lag) throw Error("merge_stats: max_lag mismatch");
  if (a.pseudocount != b.pseudocount) throw Error("merge_stats: pseudocount mismatch");
  if (a.cross_sentence != b.cross_sentence) throw Error("merge_stats: counting mode mismatch");
  CooccurrenceStats m = a;
  m.total_tokens += b.total_tokens;
  for (Index i = 0; i < m.vocab_size; ++i) m.unigram_counts[i] += b.unigram_counts[i];
  for (int k = 0; k < m.max_lag; ++k)
    m.pair_counts[k] = kernels::merge_sorted_counts(a.pair_counts[k], b.pair_counts[k]);
  recompute_mu(m);
  return m;
}

CooccurrenceStats apply_pseudocounts(const CooccurrenceStats &stats, double pseudo) {
  if (!(pseudo >= 0.0)) throw Error("apply_pseudocounts: pseudocount must be nonnegative");
  CooccurrenceStats s = stats;
  s.pseudocount = pseudo;
  recompute_mu(s);
  return s;
}

Matrix LagCovariance::apply(const Matrix &x) const {
  if (x.rows() != dim) throw Error("LagCovariance::apply: shape mismatch");
  Matrix out;
  if (sparse_part.nnz() > 0) {
    Matrix tmp;
    kernels::dense_times_csr_transpose(sparse_part, x.transpose(), tmp);
    out = tmp.transpose();
  } else {
    out = Matrix::Zero(dim, x.cols());
  }
  if (diagonal_part) out.noalias() += diagonal_part->asDiagonal() * x;
  out.noalias() -= rank_one_left * (rank_one_right.transpose() * x);
  return out;
}

Matrix LagCovariance::apply_transpose(const Matrix &x) const {
  if (x.rows() != dim) throw Error("LagCovariance::apply_transpose: shape mismatch");
  Matrix out;
  if (sparse_part_t.nnz() > 0) {
    Matrix tmp;
    kernels::dense_times_csr_transpose(sparse_part_t, x.transpose(), tmp);
    out = tmp.transpose();
  } else {
    out = Matrix::Zero(dim, x.cols());
  }
  if (diagonal_part) out.noalias() += diagonal_part->asDiagonal() * x;
  out.noalias() -= rank_one_right * (rank_one_left.transpose() * x);
  return out;
}

double LagCovariance::trace() const {
  double t = sparse_part.trace() - rank_one_left.dot(rank_one_right);
  if (diagonal_part) t += diagonal_part->sum();
  return t;
}

Matrix LagCovariance::dense() const {
  Matrix d = sparse_part.dense();
  if (diagonal_part) d.diagonal() += *diagonal_part;
  d.noalias() -= rank_one_left * rank_one_right.transpose();
  return d;
}

LagCovariance LagCovariance::whitened(const Vector &w) const {
  if (w.size() != dim) throw Error("LagCovariance::whitened: shape mismatch");
  LagCovariance out = *this;
  out.sparse_part = sparse_part.scaled(w, w);
  out.sparse_part_t = sparse_part_t.scaled(w, w);
  out.rank_one_left = rank_one_left.cwiseProduct(w);
  out.rank_one_right = rank_one_right.cwiseProduct(w);
  if (diagonal_part) out.diagonal_part = diagonal_part->cwiseProduct(w).cwiseProduct(w);
  return out;
}

LagCovariance LagCovariance::from_sparse(int lag, CsrMatrix sparse, Vector left, Vector right) {
  LagCovariance c;
  c.lag = lag;
  c.dim = sparse.rows;
  c.sparse_part_t = sparse.transposed();
  c.sparse_part = std::move(sparse);
  c.rank_one_left = std::move(left);
  c.rank_one_right = std::move(right);
  return c;
}

LagCovariance lag_covariance(const CooccurrenceStats &stats, int k) {
  const Index v = stats.vocab_size;
  if (k < 0 || k > stats.max_lag)
    throw Error("lag_covariance: lag " + std::to_string(k) + " exceeds K_max " +
                std::to_string(stats.max_lag));
  if (k == 0) {
    LagCovariance c;
    c.lag = 0;
    c.dim = v;
    c.sparse_part = CsrMatrix::from_entries(v, v, {});
    c.sparse_part_t = c.sparse_part;
    c.diagonal_part = stats.mu;
    c.rank_one_left = stats.mu;
    c.rank_one_right = stats.mu;
    return c;
  }
  const std::vector<PairCount> &counts = stats.lag(k);
  const std::uint64_t total = stats.pair_total(k);
  Vector later = Vector::Zero(v);    // marginal of the word at t+k
  Vector earlier = Vector::Zero(v);  // marginal of the word at t
  std::vector<CsrMatrix::Entry> entries;
  entries.reserve(counts.size());
  if (total > 0) {
    const double inv = 1.0 / static_cast<double>(total);
    for (const PairCount &p : counts) {
      const double f = static_cast<double>(p.count) * inv;
      entries.push_back({p.second, p.first, f});
      later(p.second) += f;
      earlier(p.first) += f;
    }
  }
  return LagCovariance::from_sparse(k, CsrMatrix::from_entries(v, v, std::move(entries)),
                                    std::move(later), std::move(earlier));
}

const LagCovariance &LagCovarianceSet::at(int k) const {
  if (k < 0 || k > max_lag())
    throw Error("missing lag covariance for lag " + std::to_string(k));
  return lags[k];
}

LagCovarianceSet whiten_stats(const CooccurrenceStats &stats) {
  const Index v = stats.vocab_size;
  for (Index i = 0; i < v; ++i)
    if (!(stats.mu(i) > 0.0)) throw Error("zero-frequency type; apply pseudocounts");
  LagCovarianceSet set;
  set.mu = stats.mu;
  set.whitener = stats.mu.array().rsqrt();
  set.null_direction = stats.mu.array().sqrt();
  set.null_direction /= set.null_direction.norm();
  set.total_tokens = stats.total_tokens;
  for (int k = 0; k <= stats.max_lag; ++k)
    set.lags.push_back(lag_covariance(stats, k).whitened(set.whitener));
  return set;
}

Matrix second_moment(const std::vector<Matrix> &sequences) {
  if (sequences.empty()) throw Error("second_moment: no data");
  const Index v = sequences.front().cols();
  Matrix m = Matrix::Zero(v, v);
  Index n = 0;
  for (const Matrix &s : sequences) {
    m.noalias() += s.transpose() * s;
    n += s.rows();
  }
  if (n == 0) throw Error("second_moment: no data");
  return m / static_cast<double>(n);
}

std::vector<Matrix> transform_sequences(const std::vector<Matrix> &sequences, const Matrix &w) {
  std::vector<Matrix> out;
  out.reserve(sequences.size());
  for (const Matrix &s : sequences) out.push_back(s * w.transpose());
  return out;
}

LagCovarianceSet dense_lag_set(const std::vector<Matrix> &sequences, int max_lag) {
  if (sequences.empty()) throw Error("dense_lag_set: no data");
  const Index v = sequences.front().cols();
  LagCovarianceSet set;
  for (const Matrix &s : sequences) set.total_tokens += static_cast<std::uint64_t>(s.rows());
  for (int k = 0; k <= max_lag; ++k) {
    Matrix acc = Matrix::Zero(v, v);
    Index pairs = 0;
    for (const Matrix &s : sequences) {
      const Index n = s.rows() - k;
      if (n <= 0) continue;
      acc.noalias() += s.bottomRows(n).transpose() * s.topRows(n);
      pairs += n;
    }
    if (pairs > 0) acc /= static_cast<double>(pairs);
    set.lags.push_back(
        LagCovariance::from_sparse(k, CsrMatrix::from_dense(acc), Vector::Zero(v), Vector::Zero(v)));
  }
  return set;
}

void write_counts(const std::string &path, const CooccurrenceStats &stats, const Vocab &vocab) {
  if (vocab.size() != stats.vocab_size || vocab.fingerprint() != stats.vocab_fingerprint)
    throw Error("write_counts: vocabulary does not match statistics");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  BinaryWriter w(out);
  w.magic(kCountsMagic);
  w.u32(kCountsVersion);
  w.u64(static_cast<std::uint64_t>(stats.vocab_size));
  w.u64(stats.total_tokens);
  w.u32(static_cast<std::uint32_t>(stats.max_lag));
  w.f64(stats.pseudocount);
  w.u32(stats.cross_sentence ? 1u : 0u);
  for (std::uint32_t i = 0; i < vocab.token_of_id.size(); ++i) {
    w.str(vocab.token_of_id[i]);
    w.u32(i);
  }
  w.u32(vocab.oov_id);
  w.u32(vocab.num_id);
  w.vector(stats.mu);
  for (int k = 1; k <= stats.max_lag; ++k) {
    const auto &lag = stats.lag(k);
    w.u64(lag.size());
    for (const PairCount &p : lag) {
      w.u32(p.first);
      w.u32(p.second);
      w.u64(p.count);
    }
  }
  if (!out) throw Error("write failed: " + path);
}

CountsFile read_counts(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open counts file " + path);
  BinaryReader r(in, path);
  r.expect_magic(kCountsMagic);
  const std::uint32_t version = r.u32();
  if (version != kCountsVersion) throw Error("unsupported counts version in " + path);
  CountsFile f;
  CooccurrenceStats &s = f.stats;
  s.vocab_size = static_cast<Index>(r.u64());
  s.total_tokens = r.u64();
  s.max_lag = static_cast<int>(r.u32());
  s.pseudocount = r.f64();
  s.cross_sentence = (r.u32() & 1u) != 0;
  std::vector<std::string> tokens(s.vocab_size);
  for (Index i = 0; i < s.vocab_size; ++i) {
    std::string tok = r.str();
    const std::uint32_t id = r.u32();
    if (id >= s.vocab_size) throw Error("corrupt vocab table in " + path);
    tokens[id] = std::move(tok);
  }
  Vocab &v = f.vocab;
  v.token_of_id = std::move(tokens);
  v.oov_id = r.u32();
  v.num_id = r.u32();
  for (std::uint32_t i = 0; i < v.token_of_id.size(); ++i) v.id_of_token[v.token_of_id[i]] = i;
  s.vocab_fingerprint = v.fingerprint();
  s.mu = r.vector(s.vocab_size);
  const double denom =
      static_cast<double>(s.total_tokens) + static_cast<double>(s.vocab_size) * s.pseudocount;
  s.unigram_counts.resize(s.vocab_size);
  for (Index i = 0; i < s.vocab_size; ++i)
    s.unigram_counts[i] =
        static_cast<std::uint64_t>(std::llround(std::max(0.0, s.mu(i) * denom - s.pseudocount)));
  s.pair_counts.resize(s.max_lag);
  for (int k = 0; k < s.max_lag; ++k) {
    const std::uint64_t n = r.u64();
    auto &lag = s.pair_counts[k];
    lag.resize(n);
    for (auto &p : lag) {
      p.first = r.u32();
      p.second = r.u32();
      p.count = r.u64();
    }
  }
  return f;
}

}  // namespace ldstext
