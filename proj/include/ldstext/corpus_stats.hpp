// ldstext/corpus_stats.hpp

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

#ifndef LDSTEXT_CORPUS_STATS_HPP_
#define LDSTEXT_CORPUS_STATS_HPP_

// Vocabulary construction, single-pass co-occurrence counting, and the
// structured lag covariances derived from the counts.
//
// Orientation convention, used everywhere in the library:
//
//   Psi_k = E[w_{t+k} w_t^T]
//
// so row index = word at position t+k and column index = word at position t.
// Raw pair counts are stored the other way round ((first at t, second at
// t+k)), so the sparse part of Psi_k is the transposed, normalized count
// matrix.

#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ldstext/common.hpp"
#include "ldstext/kernels.hpp"

namespace ldstext {

inline constexpr std::string_view kOovToken = "<OOV>";
inline constexpr std::string_view kNumToken = "<NUM>";

using Sentence = std::vector<std::string>;

// Re-readable source of whitespace-tokenized sentences.
class SentenceStream {
 public:
  virtual ~SentenceStream() = default;
  // Returns false at end of stream.  Empty lines are skipped.
  virtual bool next(Sentence &out) = 0;
  virtual void rewind() = 0;
};

class VectorSentenceStream : public SentenceStream {
 public:
  explicit VectorSentenceStream(std::vector<Sentence> sentences)
      : sentences_(std::move(sentences)) {}
  bool next(Sentence &out) override;
  void rewind() override { pos_ = 0; }

 private:
  std::vector<Sentence> sentences_;
  std::size_t pos_ = 0;
};

// UTF-8 text, one sentence per line, tokens separated by ASCII whitespace.
class FileSentenceStream : public SentenceStream {
 public:
  explicit FileSentenceStream(std::string path);
  bool next(Sentence &out) override;
  void rewind() override;

 private:
  std::string path_;
  std::ifstream in_;
};

// Any token containing an ASCII digit becomes the NUM token.
std::string normalize_token(std::string_view raw);

struct Vocab {
  std::unordered_map<std::string, std::uint32_t> id_of_token;
  std::vector<std::string> token_of_id;
  std::uint32_t oov_id = 0;
  std::uint32_t num_id = 0;

  Index size() const { return static_cast<Index>(token_of_id.size()); }
  // Applies the digit mapping, then falls back to OOV.
  std::uint32_t lookup(std::string_view raw) const;
  TokenIds encode(const Sentence &sentence) const;
  std::uint64_t fingerprint() const;

  // Regular types get ids 0..n-1 in the given order; OOV and NUM follow.
  static Vocab from_regular_tokens(std::vector<std::string> regular);
};

// Keeps the `max_types` most frequent normalized types (ties broken by
// lexicographic order); OOV and NUM are always present in addition.
Vocab build_vocab(SentenceStream &stream, std::size_t max_types);

struct CountOptions {
  int max_lag = 1;
  // Count pairs across sentence boundaries (treat the corpus as one stream).
  bool cross_sentence = false;
};

struct CooccurrenceStats {
  Index vocab_size = 0;
  std::uint64_t vocab_fingerprint = 0;
  std::uint64_t total_tokens = 0;
  std::vector<std::uint64_t> unigram_counts;
  Vector mu;  // relative frequencies with the pseudocount folded in
  double pseudocount = 0.0;
  int max_lag = 0;
  bool cross_sentence = false;
  LagPairCounts pair_counts;  // pair_counts[k - 1] for lag k

  // Number of counted position pairs at lag k.
  std::uint64_t pair_total(int k) const;
  const std::vector<PairCount> &lag(int k) const;

  static CooccurrenceStats empty(const Vocab &vocab, int max_lag);
};

CooccurrenceStats accumulate_counts(SentenceStream &stream, const Vocab &vocab,
                                    const CountOptions &options);
// Id-level entry point; `vocab_fingerprint` ties the result to a vocabulary.
CooccurrenceStats accumulate_counts(std::span<const TokenIds> sentences, Index vocab_size,
                                    std::uint64_t vocab_fingerprint, const CountOptions &options);

CooccurrenceStats merge_stats(const CooccurrenceStats &a, const CooccurrenceStats &b);

// mu_i <- (count_i + pseudo) / (T + V * pseudo); pair counts untouched.
CooccurrenceStats apply_pseudocounts(const CooccurrenceStats &stats, double pseudo);

// Psi_k = sparse_part - rank_one_left * rank_one_right^T       (k >= 1)
// Psi_0 = diag(diagonal_part) - rank_one_left * rank_one_right^T
//
// Never densified in production; `dense()` exists for tests.
struct LagCovariance {
  int lag = 0;
  Index dim = 0;
  CsrMatrix sparse_part;
  CsrMatrix sparse_part_t;
  Vector rank_one_left;
  Vector rank_one_right;
  std::optional<Vector> diagonal_part;

  Matrix apply(const Matrix &x) const;            // Psi * x
  Matrix apply_transpose(const Matrix &x) const;  // Psi^T * x
  double trace() const;
  Matrix dense() const;
  // diag(w) * Psi * diag(w), keeping the structured form.
  LagCovariance whitened(const Vector &w) const;

  static LagCovariance from_sparse(int lag, CsrMatrix sparse, Vector left, Vector right);
};

// For k >= 1 the rank-one term uses the marginals of the counted pairs
// (distribution of the word at t+k, and at t), so rows and columns of Psi_k
// sum to zero exactly even with sentence boundaries and pseudocounts.
LagCovariance lag_covariance(const CooccurrenceStats &stats, int k);

// Whitened (or otherwise normalized) lag covariances Psi_0..Psi_K that the
// learners consume.
struct LagCovarianceSet {
  std::vector<LagCovariance> lags;
  // Unit vector annihilated by every Psi_k (mu^{1/2} for text); empty when the
  // observations span the full space.
  Vector null_direction;
  // mu and the diagonal whitener mu^{-1/2} for text data; empty otherwise.
  Vector mu;
  Vector whitener;
  std::uint64_t total_tokens = 0;

  int max_lag() const { return static_cast<int>(lags.size()) - 1; }
  Index dim() const { return lags.empty() ? 0 : lags.front().dim; }
  const LagCovariance &at(int k) const;
};

// W = diag(mu^{-1/2}); every Psi_k -> W Psi_k W.  Requires mu > 0.
LagCovarianceSet whiten_stats(const CooccurrenceStats &stats);

// Dense-observation counterpart used for synthetic Gaussian data.  Each
// sequence is T x V (one observation per row).
Matrix second_moment(const std::vector<Matrix> &sequences);
std::vector<Matrix> transform_sequences(const std::vector<Matrix> &sequences, const Matrix &w);
// Psi_k = (1 / #pairs) sum y_{t+k} y_t^T with no centering; no null direction.
LagCovarianceSet dense_lag_set(const std::vector<Matrix> &sequences, int max_lag);

// Counts file: magic, version, V, T, K_max, pseudocount, flags, vocab table,
// mu (float64), then per lag the sorted (i:u32, j:u32, count:u64) triples.
void write_counts(const std::string &path, const CooccurrenceStats &stats, const Vocab &vocab);
struct CountsFile {
  CooccurrenceStats stats;
  Vocab vocab;
};
CountsFile read_counts(const std::string &path);

}  // namespace ldstext

#endif  // LDSTEXT_CORPUS_STATS_HPP_
