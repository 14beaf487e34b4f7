// ssid.hpp

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

#ifndef LDSTEXT_SSID_HPP_
#define LDSTEXT_SSID_HPP_

#include "ldstext/corpus_stats.hpp"
#include "ldstext/lds_params.hpp"
#include "ldstext/structured_linalg.hpp"

namespace ldstext {

struct SsidIntermediate {
  Matrix Gamma;  // (rV) x h, blocks C A^a
  Matrix Delta;  // h x (rV), blocks A^{r-1-b} G
  Vector singular_values;
  int r = 0;
  Index block = 0;  // V

  // Last block of Delta: G = E[x_{t+1} y_t^T], so that Psi_k = C A^{k-1} G.
  Matrix G() const { return Delta.rightCols(block); }
};

struct SsidOptions {
  Index h = 5;
  int r = 4;
  Index oversample = 10;
  int power_iters = 2;
  std::uint64_t seed = 0;
  // Block regression over all of Gamma (default) or the first block only.
  bool regress_emission = true;
  // Rescale the latent basis so the implied state noise is the identity.
  bool normalize_noise_basis = true;
  bool psd_correct = true;
};

// Block (a, b) = Psi_{r + a - b} for a, b in 0..r-1.
LinearOperator build_hankel_operator(const LagCovarianceSet &lags, int r);

SsidIntermediate factor_hankel(const LinearOperator &hankel, Index block, int r,
                               const SsidOptions &opt);

// A = Delta^{1:r-1} (Delta^{2:r})^+ followed by stabilization.
Matrix recover_A(const Matrix &delta, Index block, int r);
// Scales A so that rho(A) <= 1 - 1e-6.
Matrix stabilize(const Matrix &a);
// Regression of Gamma's blocks on powers of A.
Matrix recover_C(const Matrix &gamma, const Matrix &a, Index block, int r, bool regress = true);

struct PsdCorrection {
  double s0 = 0.0;
  double alpha0 = 0.0;
  Matrix core;
};
// Shrinks the noise core so that D = I - s s^T - C M C^T is PSD on s-perp.
PsdCorrection psd_correct_D(const Matrix &c, const Matrix &core, std::uint64_t seed = 0);
// The closed form on its own.
double psd_alpha(double s0);

struct SsidResult {
  LdsParams params;
  SsidIntermediate intermediate;
  PsdCorrection correction;
  bool noise_basis_normalized = false;
};

SsidResult ssid(const LagCovarianceSet &lags, const SsidOptions &opt);

}  // namespace ldstext

#endif  // LDSTEXT_SSID_HPP_
