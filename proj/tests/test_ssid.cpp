// test_ssid.cpp

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

#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "ldstext/corpus_stats.hpp"
#include "ldstext/rng.hpp"
#include "ldstext/ssid.hpp"
#include "ldstext/structured_linalg.hpp"
#include "ldstext/synth.hpp"
#include "oracles.hpp"

using namespace ldstext;

namespace {

LagCovariance dense_lag(int k, const Matrix &m) {
  return LagCovariance::from_sparse(k, CsrMatrix::from_dense(m), Vector::Zero(m.rows()),
                                    Vector::Zero(m.rows()));
}

// Lags Psi_k = C A^{k-1} G of a known system, k = 0..max_lag (Psi_0 = I).
LagCovarianceSet system_lags(const Matrix &a, const Matrix &c, const Matrix &g, int max_lag) {
  LagCovarianceSet set;
  const Index v = c.rows();
  set.lags.push_back(dense_lag(0, Matrix::Identity(v, v)));
  Matrix ak = Matrix::Identity(a.rows(), a.rows());
  for (int k = 1; k <= max_lag; ++k) {
    set.lags.push_back(dense_lag(k, c * ak * g));
    ak = a * ak;
  }
  return set;
}

Matrix dense_hankel(const LagCovarianceSet &set, int r) {
  const Index v = set.dim();
  Matrix h(r * v, r * v);
  for (int a = 0; a < r; ++a)
    for (int b = 0; b < r; ++b) h.block(a * v, b * v, v, v) = set.at(r + a - b).dense();
  return h;
}

Matrix stable(Rng &rng, Index h, double rho) {
  Matrix a = rng.normal_matrix(h, h);
  return a * (rho / dense::spectral_radius(a));
}

std::vector<double> sorted_abs_eigs(const Matrix &a) {
  std::vector<double> out;
  for (const auto &z : dense::eigenvalues_sorted(a)) out.push_back(std::abs(z));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("Hankel operator block layout") {
  Rng rng(1);
  const std::vector<Matrix> seqs{rng.normal_matrix(200, 6)};
  const auto set = dense_lag_set(seqs, 3);
  const LinearOperator op = build_hankel_operator(set, 2);
  const Matrix h = dense_hankel(set, 2);
  // r = 2: [[Psi_2, Psi_1], [Psi_3, Psi_2]].
  CHECK((h.block(0, 0, 6, 6) - set.at(2).dense()).norm() == 0.0);
  CHECK((h.block(0, 6, 6, 6) - set.at(1).dense()).norm() == 0.0);
  CHECK((h.block(6, 0, 6, 6) - set.at(3).dense()).norm() == 0.0);
  const Matrix x = rng.normal_matrix(12, 3);
  CHECK(oracle::rel_err(op.apply(x), h * x) < 1e-13);
  CHECK(oracle::rel_err(op.apply_transpose(x), h.transpose() * x) < 1e-13);
  CHECK_THROWS_AS(build_hankel_operator(set, 3), Error);
}

TEST_CASE("zero lags give the zero operator") {
  LagCovarianceSet set;
  for (int k = 0; k <= 3; ++k) set.lags.push_back(dense_lag(k, Matrix::Zero(4, 4)));
  const LinearOperator op = build_hankel_operator(set, 2);
  Rng rng(2);
  CHECK(op.apply(rng.normal_matrix(8, 2)).norm() == 0.0);
}

TEST_CASE("factoring an exact rank-h Hankel matrix") {
  Rng rng(3);
  const Matrix a = stable(rng, 3, 0.8), c = rng.normal_matrix(7, 3), g = rng.normal_matrix(3, 7);
  const auto set = system_lags(a, c, g, 5);
  const LinearOperator op = build_hankel_operator(set, 3);
  SsidOptions opt;
  opt.h = 3;
  const SsidIntermediate mid = factor_hankel(op, 7, 3, opt);
  const Matrix h = dense_hankel(set, 3);
  CHECK((mid.Gamma * mid.Delta - h).norm() < 1e-6 * h.norm());
  for (Index i = 1; i < mid.singular_values.size(); ++i)
    CHECK(mid.singular_values(i) <= mid.singular_values(i - 1));
  // Psi_k = C A^{k-1} G in the recovered basis too.
  const Matrix ar = recover_A(mid.Delta, 7, 3);
  const Matrix cr = recover_C(mid.Gamma, ar, 7, 3);
  CHECK(oracle::rel_err(cr * ar * mid.G(), set.at(2).dense()) < 1e-6);
}

TEST_CASE("full-rank factorization is exact") {
  Rng rng(4);
  LagCovarianceSet set;
  for (int k = 0; k <= 3; ++k) set.lags.push_back(dense_lag(k, rng.normal_matrix(2, 2)));
  const LinearOperator op = build_hankel_operator(set, 2);
  SsidOptions opt;
  opt.h = 4;
  const SsidIntermediate mid = factor_hankel(op, 2, 2, opt);
  const Matrix h = dense_hankel(set, 2);
  CHECK((mid.Gamma * mid.Delta - h).norm() < 1e-10 * h.norm());
}

TEST_CASE("recover_A") {
  Matrix d(1, 2);
  d << 0.5, 1.0;
  CHECK(recover_A(d, 1, 2)(0, 0) == doctest::Approx(0.5).epsilon(1e-14));

  Rng rng(5);
  const Matrix a = stable(rng, 3, 0.85), g = rng.normal_matrix(3, 5);
  const int r = 4;
  Matrix delta(3, r * 5);
  Matrix ak = Matrix::Identity(3, 3);
  for (int b = r - 1; b >= 0; --b) {
    delta.middleCols(b * 5, 5) = ak * g;
    ak = a * ak;
  }
  const auto got = sorted_abs_eigs(recover_A(delta, 5, r));
  const auto want = sorted_abs_eigs(a);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(got[i] - want[i]) < 1e-6);

  const Matrix same = Matrix::Ones(1, 3);
  const Matrix a_eq = recover_A(same, 1, 3);
  CHECK(a_eq(0, 0) < 1.0);
  CHECK(a_eq(0, 0) == doctest::Approx(1.0 - 1e-6).epsilon(1e-12));
  CHECK_THROWS_AS(recover_A(Matrix::Zero(2, 6), 3, 2), Error);
}

TEST_CASE("recover_C") {
  Rng rng(6);
  const Matrix a = stable(rng, 3, 0.7), c = rng.normal_matrix(5, 3);
  const int r = 4;
  Matrix gamma(r * 5, 3);
  Matrix ak = Matrix::Identity(3, 3);
  for (int k = 0; k < r; ++k) {
    gamma.middleRows(k * 5, 5) = c * ak;
    ak = a * ak;
  }
  CHECK((recover_C(gamma, a, 5, r) - c).norm() < 1e-8);
  CHECK((recover_C(gamma.topRows(5), a, 5, 1) - c).norm() == 0.0);
  CHECK((recover_C(gamma, a, 5, r, false) - c).norm() == 0.0);
  Matrix noisy = gamma;
  noisy.bottomRows(15) = rng.normal_matrix(15, 3);
  CHECK((recover_C(noisy, Matrix::Zero(3, 3), 5, r) - noisy.topRows(5)).norm() < 1e-14);
}

TEST_CASE("state noise implied by the Lyapunov core") {
  Rng rng(7);
  LdsParams p;
  p.A = stable(rng, 2, 0.6);
  Vector mu = (rng.normal_matrix(6, 1).array().abs() + 0.2).matrix();
  mu /= mu.sum();
  p.null_direction = mu.cwiseSqrt();
  p.C = Matrix::Zero(6, 2);
  p.noise_core = dense::solve_lyapunov(p.A);
  const Matrix psi0 = Matrix::Identity(6, 6) - p.null_direction * p.null_direction.transpose();
  CHECK((p.dense_noise() - psi0).norm() < 1e-15);
  p.C = 0.2 * rng.normal_matrix(6, 2);
  p.project_emission();
  CHECK((p.dense_noise() - (psi0 - p.C * p.noise_core * p.C.transpose())).norm() < 1e-14);
  CHECK((p.dense_noise() * p.null_direction).norm() < 1e-14);
}

TEST_CASE("PSD correction") {
  CHECK(psd_alpha(2.0) == 0.5);
  CHECK(psd_alpha(0.9) == 0.0);
  CHECK(psd_alpha(1.0) == 0.0);
  Rng rng(8);
  Vector mu = (rng.normal_matrix(9, 1).array().abs() + 0.2).matrix();
  mu /= mu.sum();
  const Vector s = mu.cwiseSqrt();
  // Orthonormal C orthogonal to s, so s0 is the top eigenvalue of the core.
  Matrix basis(9, 3);
  basis << s, rng.normal_matrix(9, 2);
  Eigen::HouseholderQR<Matrix> qr(basis);
  const Matrix q = qr.householderQ() * Matrix::Identity(9, 3);
  const Matrix c = q.rightCols(2);
  for (double top : {2.0, 0.9, 3.5}) {
    Matrix core(2, 2);
    core << top, 0.0, 0.0, 0.5;
    const PsdCorrection pc = psd_correct_D(c, core, 1);
    CHECK(std::abs(pc.s0 - top) < 1e-9);
    CHECK(std::abs(pc.alpha0 - psd_alpha(top)) < 1e-9);
    LdsParams p;
    p.A = Matrix::Zero(2, 2);
    p.C = c;
    p.noise_core = pc.core;
    p.null_direction = s;
    const Matrix basis_perp = oracle::complement_basis(s, 9);
    const double lo =
        Eigen::SelfAdjointEigenSolver<Matrix>(basis_perp.transpose() * p.dense_noise() * basis_perp)
            .eigenvalues()
            .minCoeff();
    CHECK(lo >= -1e-9);
  }
  // General C: dense check of the corrected D.
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    Rng r2(seed);
    LdsParams p;
    p.A = Matrix::Zero(3, 3);
    p.null_direction = s;
    p.C = 2.0 * r2.normal_matrix(9, 3);
    p.project_emission();
    const Matrix g = r2.normal_matrix(3, 3);
    const PsdCorrection pc = psd_correct_D(p.C, g * g.transpose(), seed);
    p.noise_core = pc.core;
    const Matrix bp = oracle::complement_basis(s, 9);
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(bp.transpose() * p.dense_noise() * bp)
              .eigenvalues()
              .minCoeff() >= -1e-9);
  }
}

TEST_CASE("ssid on text statistics satisfies the model invariants") {
  const HmmText hmm = sample_hmm_text(4, 30, 20000, 9);
  CountOptions copt;
  copt.max_lag = 5;
  const auto stats = apply_pseudocounts(accumulate_counts(hmm.sentences, 30, 1, copt), 1.0);
  const auto lags = whiten_stats(stats);
  SsidOptions opt;
  opt.h = 4;
  opt.r = 3;
  const SsidResult res = ssid(lags, opt);
  const LdsParams &p = res.params;
  CHECK(dense::spectral_radius(p.A) < 1.0);
  CHECK((p.C.transpose() * p.null_direction).norm() <= 1e-8 * p.C.norm());
  const Matrix bp = oracle::complement_basis(p.null_direction, 30);
  CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(bp.transpose() * p.dense_noise() * bp)
            .eigenvalues()
            .minCoeff() >= -1e-8);
  const SsidResult again = ssid(lags, opt);
  CHECK((again.params.A - p.A).norm() == 0.0);
  opt.h = 0;
  CHECK_THROWS_AS(ssid(lags, opt), Error);
  opt.h = 4;
  opt.r = 4;
  CHECK_THROWS_AS(ssid(lags, opt), Error);
}
