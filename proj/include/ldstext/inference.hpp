// inference.hpp

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

#ifndef LDSTEXT_INFERENCE_HPP_
#define LDSTEXT_INFERENCE_HPP_

#include <string>
#include <vector>

#include "ldstext/corpus_stats.hpp"
#include "ldstext/lds_params.hpp"
#include "ldstext/steady_state.hpp"

namespace ldstext {

// Observation sequences in the model's whitened coordinates.  Text corpora
// keep token ids (y_t = W e_i - s); dense corpora keep the whitened rows.
struct WhitenedCorpus {
  Vector whitener;        // mu^{-1/2}, text only
  Vector null_direction;  // mu^{1/2}, text only
  std::vector<TokenIds> sentences;
  std::vector<Matrix> dense;

  bool is_text() const { return whitener.size() > 0; }
  Index dim() const;
  std::size_t num_sequences() const { return is_text() ? sentences.size() : dense.size(); }
  Index length(std::size_t i) const;
  Index total_length() const;

  static WhitenedCorpus text(const Vector &mu, std::vector<TokenIds> sentences);
  static WhitenedCorpus dense_rows(std::vector<Matrix> sequences);
};

// The parts of a sequence the filter needs: C^T y_t (T x h) and
// y_t^T y_t - (s^T y_t)^2.
struct ProjectedSequence {
  Matrix cty;
  Vector yy_perp;
};
ProjectedSequence project_sequence(const WhitenedCorpus &corpus, std::size_t i, const Matrix &c);

// Time-varying Kalman filter and RTS smoother (test oracle and exact E-step).
struct ExactPosterior {
  Matrix filtered;  // T x h, xhat_{t|t}
  std::vector<Matrix> filtered_cov;
  std::vector<Matrix> predicted_cov;  // P_t = Cov(x_t | y_{1:t-1})
  Matrix smoothed;                    // T x h
  std::vector<Matrix> smoothed_cov;
  std::vector<Matrix> cross_cov;  // Cov(x_t, x_{t+1} | all), length T-1
  double loglik = 0.0;
};

inline constexpr Index kOracleMaxDim = 512;

ExactPosterior exact_filter_smooth(const LdsParams &p, const ProjectedSequence &seq);
ExactPosterior exact_filter_smooth(const LdsParams &p, const WhitenedCorpus &corpus,
                                   std::size_t i);

// Steady-state filtering: xhat_t = F xhat_{t-1} + gain_columns[id_t], xhat_0 = 0.
Matrix filter_sentence(const SteadyState &ss, const TokenIds &ids, std::uint32_t oov_id);
Matrix filter_dense(const SteadyState &ss, const LdsParams &p, const Matrix &rows);
// xbar_t = J xbar_{t+1} + (I - J A) xhat_t with xbar_T = xhat_T.
Matrix smooth_sentence(const SteadyState &ss, const Matrix &a, const Matrix &filtered);

struct EmbeddingContext {
  Matrix M;
  Matrix M_inv_sqrt;

  static EmbeddingContext from_covariance(const Matrix &m);
};

struct TokenEmbeddingSequence {
  TokenIds token_ids;
  Matrix filtered;
  Matrix smoothed;
  Matrix normalized;
  std::vector<Index> zero_rows;  // rows left at zero instead of normalized
};

std::vector<TokenEmbeddingSequence> embed_corpus(const SteadyState &ss, const LdsParams &p,
                                                 const EmbeddingContext &ctx,
                                                 std::span<const TokenIds> sentences,
                                                 std::uint32_t oov_id);

struct SingularPair {
  double sigma = 0.0;
  std::vector<std::uint32_t> right_words;  // top ids for the input direction v
  std::vector<std::uint32_t> left_words;   // top ids for the output direction u
};
// `emission` is V x h (unwhitened by default).  Pairs come out in
// nonincreasing singular-value order.
std::vector<SingularPair> transition_singular_pairs(const Matrix &a, const Matrix &emission,
                                                    std::size_t top_n);

// Linear-RNN view of the steady-state filter:
//   h_t = A_rnn h_{t-1} + B_rnn e_{w_t},   prediction_t = C_rnn A h_t
struct RnnInit {
  Matrix A_rnn;  // F
  Matrix B_rnn;  // h x V, column i = K W (e_i - mu)
  Matrix C_rnn;  // V x h, diag(mu^{1/2}) C
  Vector h0;
  Matrix A;      // LDS transition, for one-step prediction
  std::string convention;
};

RnnInit export_rnn_init(const Model &model, const SteadyState &ss);
void write_rnn_init(const std::string &path, const RnnInit &init);
RnnInit read_rnn_init(const std::string &path);
// Runs the exported recursion with identity nonlinearity.
Matrix linear_rnn_states(const RnnInit &init, const TokenIds &ids);

}  // namespace ldstext

#endif  // LDSTEXT_INFERENCE_HPP_
