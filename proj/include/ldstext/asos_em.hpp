// asos_em.hpp

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

#ifndef LDSTEXT_ASOS_EM_HPP_
#define LDSTEXT_ASOS_EM_HPP_

#include <memory>
#include <string>
#include <vector>

#include "ldstext/corpus_stats.hpp"
#include "ldstext/inference.hpp"
#include "ldstext/lds_params.hpp"
#include "ldstext/steady_state.hpp"

namespace ldstext {

// Time-averaged smoothed moments.  Exw is h x V against whitened y.
struct SecondOrderStats {
  Matrix Exx;       // E[xbar_t xbar_t^T], smoothed covariance included
  Matrix Exx1;      // E[xbar_t xbar_{t+1}^T] over adjacent pairs
  Matrix Exx_head;  // E[xbar_t xbar_t^T] over the first element of each pair
  Matrix Exw;       // E[xbar_t y_t^T]
  double count = 0.0;
  double pair_count = 0.0;
};

// Kalman smoothing over every sequence, then time averaging.  `loglik`
// receives the exact log-likelihood of the corpus under `p`.
SecondOrderStats exact_estep(const LdsParams &p, const WhitenedCorpus &corpus,
                             double *loglik = nullptr);

struct AsosResult {
  SecondOrderStats moments;
  FilteredMoments filtered;  // inputs of the steady-state likelihood
};

// Moments from lag covariances Psi_0..Psi_r alone; cost does not depend on T.
AsosResult asos_estep(const LdsParams &p, const SteadyState &ss, const LagCovarianceSet &lags,
                      int r);

struct MstepOptions {
  bool psd_correct = false;
  std::uint64_t seed = 0;
};

// A = Exx1^T Exx_head^{-1}, C = Exw^T Exx^{-1}, and the residual noise
// D = Psi_0 - C Exw - Exw^T C^T + C Exx C^T stored as its core M.
LdsParams mstep(const SecondOrderStats &m, const Vector &null_direction,
                const MstepOptions &opt = {});

enum class EmMode { kAsos, kExact };
std::string to_string(EmMode mode);
EmMode parse_em_mode(const std::string &s);

struct EmIteration {
  int iter = 0;
  double ll = 0.0;
  double seconds = 0.0;
  EmMode mode = EmMode::kAsos;
  std::shared_ptr<const LdsParams> params;
};

struct EmTrace {
  std::vector<EmIteration> iterations;
  std::string error;  // set when the run aborted early
};

struct EmOptions {
  EmMode mode = EmMode::kAsos;
  int max_iters = 50;
  // Stop when the relative improvement falls below this; <= 0 disables.
  double ll_tol = 1e-6;
  int r = 7;
  std::uint64_t seed = 0;
};

struct EmResult {
  LdsParams params;  // best log-likelihood
  EmTrace trace;
  int best_iter = 0;
};

// `lags` is required in asos mode, `corpus` in exact mode.
EmResult em_run(const LdsParams &init, const LagCovarianceSet *lags, const WhitenedCorpus *corpus,
                const EmOptions &opt);

void write_trace(const std::string &path, const EmTrace &trace);

}  // namespace ldstext

#endif  // LDSTEXT_ASOS_EM_HPP_
