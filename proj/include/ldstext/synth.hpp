// synth.hpp

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

#ifndef LDSTEXT_SYNTH_HPP_
#define LDSTEXT_SYNTH_HPP_

#include <string>
#include <vector>

#include "ldstext/kernels.hpp"
#include "ldstext/lds_params.hpp"

namespace ldstext {

// x_t = A x_{t-1} + eta, w_t = C x_t + eps, eta ~ N(0, I), eps ~ N(0, D).
struct GroundTruthSystem {
  Matrix A;
  Matrix C;
  Matrix D;
  Index h = 0;
  Index V = 0;
  std::uint64_t seed = 0;
};

// A is a Gaussian matrix rescaled to spectral radius `rho`; C has N(0, 1/h)
// entries; D is diagonal with entries noise^2 * (0.5 + u), u ~ U(0, 1).
GroundTruthSystem random_stable_system(Index h, Index v, double rho, double noise,
                                       std::uint64_t seed);

// The same system in whitened coordinates y = W w, W = (C Sigma C^T + D)^{-1/2}.
// There D_w = I - C_w Sigma C_w^T exactly, so the noise core is Sigma.
struct WhitenedSystem {
  LdsParams params;
  Matrix whitener;
};
WhitenedSystem population_whitened(const GroundTruthSystem &sys);

// One sequence of T observations (rows), starting from x_0 = 0.
Matrix sample_lds(const GroundTruthSystem &sys, Index T, std::uint64_t seed);
// Several independent sequences from one seed.
std::vector<Matrix> sample_lds_sequences(const GroundTruthSystem &sys, Index count, Index length,
                                         std::uint64_t seed);

struct HmmText {
  Matrix transition;  // n x n, rows sum to one
  Matrix emission;    // n x V, rows sum to one
  Vector stationary;  // n
  std::vector<TokenIds> sentences;
};

// Samples a random ergodic HMM, then T tokens cut into sentences of
// `sentence_length` (the last one may be shorter).  The chain runs on across
// sentence breaks, starting from its stationary distribution.
HmmText sample_hmm_text(Index n_states, Index v, Index T, std::uint64_t seed,
                        Index sentence_length = 20);

// P(w_t = i, w_{t+1} = j) under the stationary chain.
Matrix hmm_lag1_joint(const HmmText &hmm);

// Letter-only token names ("a", "b", ..., "ba", ...), so no digit mapping applies.
std::string synthetic_token(std::uint32_t id);
void write_token_corpus(const std::string &path, const std::vector<TokenIds> &sentences);
void write_dense_sequences(const std::string &path, const std::vector<Matrix> &sequences);

}  // namespace ldstext

#endif  // LDSTEXT_SYNTH_HPP_
