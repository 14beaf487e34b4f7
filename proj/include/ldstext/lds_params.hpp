// lds_params.hpp

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

#ifndef LDSTEXT_LDS_PARAMS_HPP_
#define LDSTEXT_LDS_PARAMS_HPP_

#include <optional>
#include <string>

#include "ldstext/common.hpp"
#include "ldstext/corpus_stats.hpp"

namespace ldstext {

// Gaussian LDS in whitened observation coordinates:
//
//   x_t = A x_{t-1} + eta,   eta ~ N(0, I)
//   y_t = C x_t + eps,       eps ~ N(0, D),  D = I - s s^T - C M C^T
//
// where s is the unit null direction (mu^{1/2} for text, absent for dense
// data) and M is `noise_core`.  col(C) is kept orthogonal to s.
struct LdsParams {
  Matrix A;
  Matrix C;
  Matrix noise_core;
  Vector null_direction;

  Index h() const { return A.rows(); }
  Index dim() const { return C.rows(); }
  bool has_null() const { return null_direction.size() > 0; }
  // V - 1 for text, V otherwise.
  Index data_dim() const { return has_null() ? dim() - 1 : dim(); }

  // C <- (I - s s^T) C.
  void project_emission();
  // Throws on shape errors; checks spectral radius when `require_stable`.
  void validate(bool require_stable = true) const;
  // Test-only dense D.
  Matrix dense_noise() const;
};

struct Provenance {
  int r = 0;
  std::uint64_t seed = 0;
  std::uint64_t corpus_hash = 0;
  std::string stage;
};

// Everything needed to use a trained model: parameters, the whitening that
// maps raw observations to model coordinates, and optional extras.
struct Model {
  LdsParams params;
  // Text models: unigram frequencies; the whitener is diag(mu^{-1/2}).
  Vector mu;
  // Dense models: the symmetric whitening matrix.
  Matrix dense_whitener;
  std::optional<Vocab> vocab;
  // Posterior second moment E[x x^T] used to normalize embeddings.
  std::optional<Matrix> embedding_cov;
  Provenance provenance;

  bool is_text() const { return mu.size() > 0; }
  // Emission in raw observation coordinates.
  Matrix unwhitened_emission() const;
};

void write_model(const std::string &path, const Model &model);
Model read_model(const std::string &path);

}  // namespace ldstext

#endif  // LDSTEXT_LDS_PARAMS_HPP_
