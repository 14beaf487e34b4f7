// steady_state.hpp

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

#ifndef LDSTEXT_STEADY_STATE_HPP_
#define LDSTEXT_STEADY_STATE_HPP_

#include "ldstext/common.hpp"
#include "ldstext/corpus_stats.hpp"
#include "ldstext/lds_params.hpp"

namespace ldstext {

// h x h matrix Z with (I + C B C^T)^{-1} = I - C Z C^T, where G = C^T C.
//
// The direct route is Z = (B^{-1} + G)^{-1}.  When B is (nearly) singular the
// push-through form Z = B (I + G B)^{-1} is used instead; it needs no B^{-1}.
struct InnovationCore {
  Matrix Z;
  bool used_fallback = false;
};
InnovationCore innovation_core(const Matrix &gram, const Matrix &b);

struct SteadyState {
  Matrix Sigma1;  // predicted covariance
  Matrix Sigma0;  // filtered covariance
  Matrix gram;    // C^T C
  Matrix Z;       // innovation core for B = Sigma1 - M
  Matrix Kcore;   // K = Kcore * C^T
  Matrix F;       // A - K C A
  Matrix J;       // Sigma0 A^T Sigma1^{-1}
  Matrix smoothed_cov;  // steady smoothed covariance
  Matrix Sigma_unc;     // unconditional state covariance
  // Text models only: column i = K W (e_i - mu).
  Matrix gain_columns;
  int iterations = 0;

  Index h() const { return Sigma1.rows(); }
  // K applied to whitened observations (columns of y).
  Matrix apply_gain(const Matrix &y, const LdsParams &p) const;
};

// Unconditional covariance: Sigma = A Sigma A^T + I.
Matrix unconditional_covariance(const Matrix &a);

// Discrete Riccati fixed point of predict/update; returns (Sigma1, Sigma0).
std::pair<Matrix, Matrix> solve_posterior_steady_state(const LdsParams &p, int *iterations = nullptr);

// `mu` is required for per-word gain columns (text models) and may be empty.
SteadyState compute_steady_state(const LdsParams &p, const Vector &mu = Vector());

// Time-averaged quantities sufficient for the steady-state likelihood.
// Here x is the filtered mean at t-1 and y the whitened observation at t.
struct FilteredMoments {
  double count = 0.0;     // number of scored observations
  double yy_perp = 0.0;   // E[y^T y - (s^T y)^2]
  Matrix cty_cty;         // E[C^T y y^T C]
  Matrix x_cty;           // E[x (C^T y)^T]
  Matrix xx;              // E[x x^T]
};

struct LogLikelihood {
  double total = 0.0;
  double per_token = 0.0;
};

// -(T d/2) log 2 pi - (T/2) logdet(S) - (1/2) sum_t e_t^T S^+ e_t over the
// data subspace, where e_t = y_t - C A xhat_{t-1}.
LogLikelihood steady_log_likelihood(const LdsParams &p, const SteadyState &ss,
                                    const FilteredMoments &m);

// log det of I + C B C^T, the innovation covariance on the data subspace.
double innovation_logdet(const LdsParams &p, const Matrix &b);

// Filtered moments of a text corpus under the steady-state filter.
FilteredMoments text_filtered_moments(const LdsParams &p, const SteadyState &ss,
                                      const Vector &mu, std::span<const TokenIds> sentences);
// Same, for dense whitened sequences (rows are observations).
FilteredMoments dense_filtered_moments(const LdsParams &p, const SteadyState &ss,
                                       const std::vector<Matrix> &sequences);

// Token-by-token evaluation of the same likelihood (reference path).
LogLikelihood text_log_likelihood_direct(const LdsParams &p, const SteadyState &ss,
                                         const Vector &mu, std::span<const TokenIds> sentences);

}  // namespace ldstext

#endif  // LDSTEXT_STEADY_STATE_HPP_
