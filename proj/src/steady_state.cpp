// steady_state.cpp

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

#include "ldstext/steady_state.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "ldstext/structured_linalg.hpp"

namespace ldstext {

namespace {

constexpr double kRiccatiTol = 1e-12;
constexpr int kRiccatiMaxIters = 100000;
constexpr double kCoreCondLimit = 1e12;
constexpr double kRidge = 1e-10;

double cond_estimate(const Matrix &m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector &s = svd.singularValues();
  return s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
}

}  // namespace

InnovationCore innovation_core(const Matrix &gram, const Matrix &b) {
  const Index h = b.rows();
  const Matrix eye = Matrix::Identity(h, h);
  InnovationCore out;
  if (cond_estimate(b) < kCoreCondLimit) {
    const Matrix binv = b.fullPivLu().inverse();
    out.Z = dense::symmetrize((binv + gram).fullPivLu().inverse());
    if (out.Z.allFinite()) return out;
  }
  out.used_fallback = true;
  Matrix inner = eye + gram * b;
  if (cond_estimate(inner) >= kCoreCondLimit) {
    const double scale = std::max(1.0, gram.trace() / static_cast<double>(h));
    inner = eye + (gram + kRidge * scale * eye) * b;
  }
  // B (I + G B)^{-1} = ((I + G B)^{-T} B)^T and B, G are symmetric.
  out.Z = dense::symmetrize(inner.transpose().fullPivLu().solve(b).transpose());
  return out;
}

Matrix unconditional_covariance(const Matrix &a) { return dense::solve_lyapunov(a); }

std::pair<Matrix, Matrix> solve_posterior_steady_state(const LdsParams &p, int *iterations) {
  p.validate(true);
  const Index h = p.h();
  const Matrix eye = Matrix::Identity(h, h);
  const Matrix gram = p.C.transpose() * p.C;
  Matrix sigma1 = eye;
  Matrix sigma0 = eye;
  bool warned = false;
  for (int it = 1; it <= kRiccatiMaxIters; ++it) {
    const InnovationCore core = innovation_core(gram, sigma1 - p.noise_core);
    if (core.used_fallback && !warned) {
      log_event("warn", "innovation_core_fallback", "Sigma1 - M is near singular");
      warned = true;
    }
    sigma0 = dense::symmetrize(sigma1 - sigma1 * (eye - gram * core.Z) * gram * sigma1);
    Matrix next = p.A * sigma0 * p.A.transpose() + eye;
    next = dense::symmetrize(next);
    const double change = (next - sigma1).norm();
    sigma1 = std::move(next);
    if (change <= kRiccatiTol * std::max(1.0, sigma1.norm())) {
      if (iterations) *iterations = it;
      // One more measurement update so that Sigma0 matches the final Sigma1.
      const InnovationCore last = innovation_core(gram, sigma1 - p.noise_core);
      sigma0 = dense::symmetrize(sigma1 - sigma1 * (eye - gram * last.Z) * gram * sigma1);
      return {sigma1, sigma0};
    }
  }
  throw Error("posterior steady state did not converge in 1e5 iterations");
}

SteadyState compute_steady_state(const LdsParams &p, const Vector &mu) {
  SteadyState ss;
  const Index h = p.h();
  const Matrix eye = Matrix::Identity(h, h);
  std::tie(ss.Sigma1, ss.Sigma0) = solve_posterior_steady_state(p, &ss.iterations);
  ss.gram = p.C.transpose() * p.C;
  ss.Z = innovation_core(ss.gram, ss.Sigma1 - p.noise_core).Z;
  ss.Kcore = ss.Sigma1 * (eye - ss.gram * ss.Z);
  ss.F = p.A - ss.Kcore * ss.gram * p.A;
  const double rho_f = dense::spectral_radius(ss.F);
  if (!(rho_f < 1.0)) {
    std::ostringstream msg;
    msg << "filter matrix is unstable (spectral radius " << rho_f << ", rho(A) "
        << dense::spectral_radius(p.A) << "); check that D is PSD on the data subspace";
    throw Error(msg.str());
  }
  // J = Sigma0 A^T Sigma1^{-1}; Sigma1 is SPD.
  ss.J = ss.Sigma1.llt().solve(p.A * ss.Sigma0).transpose();
  ss.smoothed_cov = dense::symmetrize(
      dense::solve_stein(ss.J, ss.Sigma0 - ss.J * ss.Sigma1 * ss.J.transpose()));
  ss.Sigma_unc = unconditional_covariance(p.A);
  if (mu.size() > 0) {
    if (mu.size() != p.dim()) throw Error("compute_steady_state: mu has wrong length");
    // Column i = Kcore C^T (W e_i - s) = Kcore C_i^T / sqrt(mu_i), as C^T s = 0.
    const Vector w = mu.array().rsqrt();
    ss.gain_columns = ss.Kcore * (w.asDiagonal() * p.C).transpose();
  }
  return ss;
}

Matrix SteadyState::apply_gain(const Matrix &y, const LdsParams &p) const {
  return Kcore * (p.C.transpose() * y);
}

double innovation_logdet(const LdsParams &p, const Matrix &b) {
  const Index h = p.h();
  const Matrix gram = p.C.transpose() * p.C;
  // I + C B C^T is PD on the data subspace iff I + R B R^T is, with G = R^T R.
  Eigen::SelfAdjointEigenSolver<Matrix> eg(gram);
  const Matrix r = eg.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                   eg.eigenvectors().transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(
      dense::symmetrize(Matrix::Identity(h, h) + r * b * r.transpose()), Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 0.0)) throw Error("D not PSD on data subspace");
  try {
    return woodbury_logdet(InvertibleBase::identity(p.dim()), p.C, b, p.C.transpose());
  } catch (const Error &) {
    // Sylvester: det(I + C B C^T) = det(I + R B R^T).
    return es.eigenvalues().array().log().sum();
  }
}

LogLikelihood steady_log_likelihood(const LdsParams &p, const SteadyState &ss,
                                    const FilteredMoments &m) {
  if (m.count <= 0.0) throw Error("no data");
  const Index h = p.h();
  const Matrix eye = Matrix::Identity(h, h);
  const double logdet = innovation_logdet(p, ss.Sigma1 - p.noise_core);
  const Matrix izg = eye - ss.Z * ss.gram;
  const double quad = m.yy_perp - trace_product(ss.Z, m.cty_cty) -
                      2.0 * (izg * p.A * m.x_cty).trace() +
                      trace_product(ss.gram * izg, p.A * m.xx * p.A.transpose());
  const double d = static_cast<double>(p.data_dim());
  LogLikelihood ll;
  ll.per_token = -0.5 * d * std::log(2.0 * std::numbers::pi) - 0.5 * logdet - 0.5 * quad;
  ll.total = ll.per_token * m.count;
  return ll;
}

FilteredMoments text_filtered_moments(const LdsParams &p, const SteadyState &ss,
                                      const Vector &mu, std::span<const TokenIds> sentences) {
  const Index h = p.h();
  const Index v = p.dim();
  if (ss.gain_columns.cols() != v) throw Error("text_filtered_moments: steady state lacks gain columns");
  const Matrix wc = mu.array().rsqrt().matrix().asDiagonal() * p.C;  // row i = C^T y for token i
  FilteredMoments fm;
  fm.x_cty = Matrix::Zero(h, h);
  fm.xx = Matrix::Zero(h, h);
  Vector counts = Vector::Zero(v);
  Vector x(h), next(h);
  for (const TokenIds &ids : sentences) {
    x.setZero();
    for (std::uint32_t id : ids) {
      if (id >= v) throw Error("token id out of range");
      counts(id) += 1.0;
      fm.x_cty.noalias() += x * wc.row(id);
      fm.xx.noalias() += x * x.transpose();
      next.noalias() = ss.F * x;
      next += ss.gain_columns.col(id);
      x.swap(next);
    }
  }
  fm.count = counts.sum();
  if (fm.count == 0.0) throw Error("no data");
  const Vector inv_mu = mu.cwiseInverse();
  fm.yy_perp = (counts.dot(inv_mu) - fm.count) / fm.count;
  fm.cty_cty = wc.transpose() * (counts / fm.count).asDiagonal() * wc;
  fm.x_cty /= fm.count;
  fm.xx /= fm.count;
  return fm;
}

FilteredMoments dense_filtered_moments(const LdsParams &p, const SteadyState &ss,
                                       const std::vector<Matrix> &sequences) {
  const Index h = p.h();
  FilteredMoments fm;
  fm.x_cty = Matrix::Zero(h, h);
  fm.xx = Matrix::Zero(h, h);
  fm.cty_cty = Matrix::Zero(h, h);
  Vector x(h);
  for (const Matrix &seq : sequences) {
    if (seq.cols() != p.dim()) throw Error("dense_filtered_moments: wrong observation dimension");
    const Matrix cty = seq * p.C;  // T x h
    x.setZero();
    for (Index t = 0; t < seq.rows(); ++t) {
      const Vector c = cty.row(t).transpose();
      double yy = seq.row(t).squaredNorm();
      if (p.has_null()) {
        const double sy = seq.row(t).dot(p.null_direction);
        yy -= sy * sy;
      }
      fm.yy_perp += yy;
      fm.cty_cty.noalias() += c * c.transpose();
      fm.x_cty.noalias() += x * c.transpose();
      fm.xx.noalias() += x * x.transpose();
      x = ss.F * x + ss.Kcore * c;
      fm.count += 1.0;
    }
  }
  if (fm.count == 0.0) throw Error("no data");
  fm.yy_perp /= fm.count;
  fm.cty_cty /= fm.count;
  fm.x_cty /= fm.count;
  fm.xx /= fm.count;
  return fm;
}

LogLikelihood text_log_likelihood_direct(const LdsParams &p, const SteadyState &ss,
                                         const Vector &mu, std::span<const TokenIds> sentences) {
  if (!p.has_null()) throw Error("text_log_likelihood_direct: model has no null direction");
  const Index h = p.h();
  const Index v = p.dim();
  const Matrix b = ss.Sigma1 - p.noise_core;
  const double logdet = innovation_logdet(p, b);
  const Vector w = mu.array().rsqrt();
  const InvertibleBase eye_v = InvertibleBase::identity(v);
  const double d = static_cast<double>(p.data_dim());
  const double c0 = -0.5 * d * std::log(2.0 * std::numbers::pi) - 0.5 * logdet;
  LogLikelihood ll;
  double count = 0.0;
  Vector x(h);
  for (const TokenIds &ids : sentences) {
    x.setZero();
    for (std::uint32_t id : ids) {
      Vector e = -p.null_direction;
      e(id) += w(id);
      e.noalias() -= p.C * (p.A * x);
      if (p.has_null()) e -= p.null_direction * p.null_direction.dot(e);
      const Vector se = woodbury_solve(eye_v, p.C, b, p.C.transpose(), e);
      ll.total += c0 - 0.5 * e.dot(se);
      count += 1.0;
      x = ss.F * x + ss.gain_columns.col(id);
    }
  }
  if (count == 0.0) throw Error("no data");
  ll.per_token = ll.total / count;
  return ll;
}

}  // namespace ldstext
