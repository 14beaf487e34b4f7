// ssid.cpp

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

#include "ldstext/ssid.hpp"

#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace ldstext {

namespace {

constexpr double kStabilityMargin = 1e-6;

}  // namespace

LinearOperator build_hankel_operator(const LagCovarianceSet &lags, int r) {
  if (r < 1) throw Error("build_hankel_operator: r must be >= 1");
  const Index v = lags.dim();
  // Fail early on missing lags.
  for (int k = 1; k <= 2 * r - 1; ++k) (void)lags.at(k);
  auto set = std::make_shared<LagCovarianceSet>(lags);
  LinearOperator op;
  op.nrows = op.ncols = r * v;
  op.apply = [set, r, v](const Matrix &x) {
    Matrix out = Matrix::Zero(r * v, x.cols());
    for (int a = 0; a < r; ++a)
      for (int b = 0; b < r; ++b)
        out.middleRows(a * v, v) += set->at(r + a - b).apply(x.middleRows(b * v, v));
    return out;
  };
  op.apply_transpose = [set, r, v](const Matrix &y) {
    Matrix out = Matrix::Zero(r * v, y.cols());
    for (int a = 0; a < r; ++a)
      for (int b = 0; b < r; ++b)
        out.middleRows(b * v, v) += set->at(r + a - b).apply_transpose(y.middleRows(a * v, v));
    return out;
  };
  return op;
}

SsidIntermediate factor_hankel(const LinearOperator &hankel, Index block, int r,
                               const SsidOptions &opt) {
  if (opt.h < 1) throw Error("ssid: latent dimension h must be >= 1");
  if (opt.h > hankel.nrows) throw Error("ssid: h exceeds r * V");
  const SvdResult svd =
      randomized_svd(hankel, opt.h, opt.oversample, opt.power_iters, opt.seed);
  SsidIntermediate out;
  const Vector root = svd.s.cwiseSqrt();
  out.Gamma = svd.U * root.asDiagonal();
  out.Delta = root.asDiagonal() * svd.V.transpose();
  out.singular_values = svd.s;
  out.r = r;
  out.block = block;
  return out;
}

Matrix stabilize(const Matrix &a) {
  const double rho = dense::spectral_radius(a);
  const double limit = 1.0 - kStabilityMargin;
  if (rho < limit) return a;
  std::ostringstream msg;
  msg << "rho=" << rho;
  log_event("info", "stabilize_transition", msg.str());
  return a * (limit / rho);
}

Matrix recover_A(const Matrix &delta, Index block, int r) {
  if (r < 2) throw Error("recover_A: r must be >= 2");
  const Index w = (r - 1) * block;
  if (delta.cols() != r * block) throw Error("recover_A: Delta has wrong width");
  const Matrix d1 = delta.leftCols(w);
  const Matrix d2 = delta.rightCols(w);
  // pinv(D2) from the thin SVD of D2^T = U S V^T.
  Eigen::JacobiSVD<Matrix> svd(d2.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector &s = svd.singularValues();
  if (s.size() == 0 || !(s(s.size() - 1) > 1e-12 * s(0)))
    throw Error("recover_A: shifted Delta block is rank deficient");
  const Matrix a = d1 * svd.matrixU() * s.cwiseInverse().asDiagonal() * svd.matrixV().transpose();
  return stabilize(a);
}

Matrix recover_C(const Matrix &gamma, const Matrix &a, Index block, int r, bool regress) {
  if (gamma.rows() != r * block) throw Error("recover_C: Gamma has wrong height");
  if (!regress || r == 1) return gamma.topRows(block);
  const Index h = a.rows();
  Matrix num = Matrix::Zero(block, h);
  Matrix den = Matrix::Zero(h, h);
  Matrix ak = Matrix::Identity(h, h);
  for (int k = 0; k < r; ++k) {
    num.noalias() += gamma.middleRows(k * block, block) * ak.transpose();
    den.noalias() += ak * ak.transpose();
    ak = a * ak;
  }
  // den >= I, so the solve is always well posed.
  return den.llt().solve(num.transpose()).transpose();
}

double psd_alpha(double s0) { return s0 >= 1.0 ? (s0 - 1.0) / s0 : 0.0; }

PsdCorrection psd_correct_D(const Matrix &c, const Matrix &core, std::uint64_t seed) {
  PsdCorrection out;
  const Matrix m = dense::symmetrize(core);
  LinearOperator op;
  op.nrows = op.ncols = c.rows();
  op.apply = [&c, &m](const Matrix &x) -> Matrix { return c * (m * (c.transpose() * x)); };
  op.apply_transpose = op.apply;
  out.s0 = power_iteration_max(op, seed, c.cols());
  out.alpha0 = psd_alpha(out.s0);
  out.core = (1.0 - out.alpha0) * m;
  return out;
}

SsidResult ssid(const LagCovarianceSet &lags, const SsidOptions &opt) {
  if (opt.h < 1) throw Error("ssid: latent dimension h must be >= 1");
  if (opt.r < 2) throw Error("ssid: horizon r must be >= 2");
  if (lags.max_lag() < 2 * opt.r - 1) {
    std::ostringstream msg;
    msg << "ssid: need lags up to " << 2 * opt.r - 1 << ", have " << lags.max_lag();
    throw Error(msg.str());
  }
  const Index v = lags.dim();
  SsidResult res;
  res.intermediate = factor_hankel(build_hankel_operator(lags, opt.r), v, opt.r, opt);
  const SsidIntermediate &mid = res.intermediate;
  Matrix a = recover_A(mid.Delta, v, opt.r);
  Matrix c = recover_C(mid.Gamma, a, v, opt.r, opt.regress_emission);

  if (opt.normalize_noise_basis) {
    // G = A Sigma C^T, so Sigma ~ A^+ G C (C^T C)^{-1}; the implied state
    // noise is Sigma - A Sigma A^T.  Change basis so that it becomes I.
    const Matrix gram = c.transpose() * c;
    const Matrix sigma = dense::symmetrize(dense::pinv(a) * mid.G() * c *
                                           gram.fullPivLu().inverse());
    const Matrix q = dense::symmetrize(sigma - a * sigma * a.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(q);
    if (es.info() == Eigen::Success && es.eigenvalues().minCoeff() > 1e-8 * es.eigenvalues().maxCoeff() &&
        es.eigenvalues().minCoeff() > 0.0) {
      const Matrix t = dense::inv_sqrt_sym(q);
      const Matrix t_inv = dense::sqrt_sym(q);
      a = t * a * t_inv;
      c = c * t_inv;
      res.noise_basis_normalized = true;
    } else {
      log_event("warn", "ssid_noise_basis", "implied state noise not PD; basis left as recovered");
    }
  }

  LdsParams &p = res.params;
  p.A = a;
  p.C = c;
  p.null_direction = lags.null_direction;
  p.project_emission();
  p.noise_core = dense::solve_lyapunov(p.A);
  if (opt.psd_correct) {
    res.correction = psd_correct_D(p.C, p.noise_core, opt.seed ^ 0x9e3779b97f4a7c15ULL);
    p.noise_core = res.correction.core;
  } else {
    res.correction.core = p.noise_core;
  }
  p.validate(true);
  return res;
}

}  // namespace ldstext
