// structured_linalg.cpp

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

#include "ldstext/structured_linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "ldstext/rng.hpp"

namespace ldstext {

namespace {

constexpr double kCondWarn = 1e12;

Matrix csr_apply(const CsrMatrix &s, const Matrix &x) {
  Matrix tmp;
  kernels::dense_times_csr_transpose(s, x.transpose(), tmp);
  return tmp.transpose();
}

double condition_number(const Matrix &m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector &sv = svd.singularValues();
  if (sv.size() == 0) return 1.0;
  const double lo = sv(sv.size() - 1);
  return lo > 0.0 ? sv(0) / lo : std::numeric_limits<double>::infinity();
}

// Factorizes the p x p capacitance matrix S^{-1} + Vt A^{-1} U.
struct Capacitance {
  Matrix ainv_u;  // A^{-1} U
  Eigen::FullPivLU<Matrix> lu;
  Eigen::FullPivLU<Matrix> s_lu;
};

Capacitance factor_capacitance(const InvertibleBase &a, const Matrix &u, const Matrix &s,
                               const Matrix &vt) {
  if (u.rows() != a.dim || vt.cols() != a.dim || s.rows() != u.cols() || s.cols() != vt.rows() ||
      s.rows() != s.cols())
    throw Error("woodbury: shape mismatch");
  Capacitance c;
  c.s_lu.compute(s);
  if (!c.s_lu.isInvertible()) throw Error("woodbury: core matrix S is singular");
  c.ainv_u = a.solve(u);
  Matrix inner = c.s_lu.inverse();
  inner.noalias() += vt * c.ainv_u;
  const double cond = condition_number(inner);
  if (!std::isfinite(cond) || cond > 1e15) {
    std::ostringstream msg;
    msg << "woodbury: singular inner system (condition estimate " << cond << ")";
    throw Error(msg.str());
  }
  if (cond > kCondWarn) {
    std::ostringstream msg;
    msg << "cond=" << cond;
    log_event("warn", "woodbury_ill_conditioned", msg.str());
  }
  c.lu.compute(inner);
  return c;
}

Matrix orthonormal_basis(const Matrix &y) {
  Eigen::HouseholderQR<Matrix> qr(y);
  return qr.householderQ() * Matrix::Identity(y.rows(), y.cols());
}

}  // namespace

StructuredMatrix StructuredMatrix::diagonal(Vector d) {
  StructuredMatrix m;
  m.dim_ = d.size();
  m.base_ = std::move(d);
  return m;
}

StructuredMatrix StructuredMatrix::sparse(CsrMatrix s) {
  if (s.rows != s.cols) throw Error("StructuredMatrix: sparse base must be square");
  StructuredMatrix m;
  m.dim_ = s.rows;
  m.base_t_ = s.transposed();
  m.base_ = std::move(s);
  return m;
}

StructuredMatrix &StructuredMatrix::add_term(double sign, Matrix u, Matrix s, Matrix vt) {
  if (sign != 1.0 && sign != -1.0) throw Error("StructuredMatrix: sign must be +1 or -1");
  if (u.rows() != dim_ || vt.cols() != dim_ || s.rows() != u.cols() || s.cols() != vt.rows())
    throw Error("StructuredMatrix: factor shape mismatch");
  terms_.push_back({sign, std::move(u), std::move(s), std::move(vt)});
  return *this;
}

Matrix StructuredMatrix::apply(const Matrix &x) const {
  if (x.rows() != dim_) throw Error("StructuredMatrix::apply: shape mismatch");
  Matrix out;
  if (const auto *d = std::get_if<Vector>(&base_))
    out = d->asDiagonal() * x;
  else
    out = csr_apply(std::get<CsrMatrix>(base_), x);
  for (const LowRankTerm &t : terms_) out.noalias() += t.sign * (t.U * (t.S * (t.Vt * x)));
  return out;
}

Matrix StructuredMatrix::apply_transpose(const Matrix &x) const {
  if (x.rows() != dim_) throw Error("StructuredMatrix::apply_transpose: shape mismatch");
  Matrix out;
  if (const auto *d = std::get_if<Vector>(&base_))
    out = d->asDiagonal() * x;
  else
    out = csr_apply(base_t_, x);
  for (const LowRankTerm &t : terms_)
    out.noalias() += t.sign * (t.Vt.transpose() * (t.S.transpose() * (t.U.transpose() * x)));
  return out;
}

Matrix StructuredMatrix::dense() const {
  Matrix out;
  if (const auto *d = std::get_if<Vector>(&base_))
    out = d->asDiagonal();
  else
    out = std::get<CsrMatrix>(base_).dense();
  for (const LowRankTerm &t : terms_) out.noalias() += t.sign * (t.U * t.S * t.Vt);
  return out;
}

LinearOperator StructuredMatrix::as_operator() const {
  auto self = std::make_shared<StructuredMatrix>(*this);
  return {dim_, dim_, [self](const Matrix &x) { return self->apply(x); },
          [self](const Matrix &x) { return self->apply_transpose(x); }};
}

InvertibleBase InvertibleBase::diagonal(const Vector &d) {
  if ((d.array() == 0.0).any()) throw Error("InvertibleBase: zero on diagonal");
  InvertibleBase b;
  b.dim = d.size();
  Vector inv = d.cwiseInverse();
  b.solve = [inv](const Matrix &x) -> Matrix { return inv.asDiagonal() * x; };
  b.solve_transpose = b.solve;
  b.inverse_trace = inv.sum();
  if ((d.array() < 0.0).any()) throw Error("InvertibleBase: diagonal base must be positive");
  b.logdet = d.array().log().sum();
  return b;
}

InvertibleBase InvertibleBase::identity(Index n) {
  InvertibleBase b;
  b.dim = n;
  b.solve = [](const Matrix &x) -> Matrix { return x; };
  b.solve_transpose = b.solve;
  b.inverse_trace = static_cast<double>(n);
  b.logdet = 0.0;
  return b;
}

Matrix woodbury_solve(const InvertibleBase &a, const Matrix &u, const Matrix &s, const Matrix &vt,
                      const Matrix &rhs) {
  if (rhs.rows() != a.dim) throw Error("woodbury_solve: rhs shape mismatch");
  Matrix ainv_rhs = a.solve(rhs);
  if (u.cols() == 0) return ainv_rhs;
  Capacitance c = factor_capacitance(a, u, s, vt);
  ainv_rhs.noalias() -= c.ainv_u * c.lu.solve(vt * ainv_rhs);
  return ainv_rhs;
}

double woodbury_logdet(const InvertibleBase &a, const Matrix &u, const Matrix &s,
                       const Matrix &vt) {
  if (u.cols() == 0) return a.logdet;
  Capacitance c = factor_capacitance(a, u, s, vt);
  const auto [sign_s, log_s] = dense::slogdet(s);
  Matrix inner = c.s_lu.inverse();
  inner.noalias() += vt * c.ainv_u;
  const auto [sign_i, log_i] = dense::slogdet(inner);
  if (sign_s * sign_i <= 0.0)
    throw Error("woodbury_logdet: non-positive determinant (matrix not PD on its subspace)");
  return log_s + a.logdet + log_i;
}

double trace_product(const Matrix &x, const Matrix &y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) throw Error("trace_product: shape mismatch");
  return x.cwiseProduct(y).sum();
}

double trace_woodbury_inverse(const InvertibleBase &a, const Matrix &u, const Matrix &s,
                              const Matrix &vt) {
  if (u.cols() == 0) return a.inverse_trace;
  Capacitance c = factor_capacitance(a, u, s, vt);
  // tr(A^{-1} U K^{-1} Vt A^{-1}) = tr(X Y^T), X = A^{-1} U K^{-1}, Y = A^{-T} Vt^T.
  const Matrix x = c.ainv_u * c.lu.inverse();
  const Matrix y = a.solve_transpose(vt.transpose());
  return a.inverse_trace - trace_product(x, y);
}

double trace_woodbury_product(const InvertibleBase &a, const Matrix &u, const Matrix &s,
                              const Matrix &vt, const Matrix &z, const Matrix &w) {
  if (z.rows() != a.dim || w.rows() != a.dim || z.cols() != w.cols())
    throw Error("trace_woodbury_product: shape mismatch");
  return trace_product(woodbury_solve(a, u, s, vt, z), w);
}

InvertibleBase woodbury_inverse(const InvertibleBase &a, const Matrix &u, const Matrix &s,
                                const Matrix &vt) {
  InvertibleBase out;
  out.dim = a.dim;
  out.logdet = woodbury_logdet(a, u, s, vt);
  out.inverse_trace = trace_woodbury_inverse(a, u, s, vt);
  auto base = std::make_shared<InvertibleBase>(a);
  auto cap = std::make_shared<Capacitance>(factor_capacitance(a, u, s, vt));
  auto vt_copy = std::make_shared<Matrix>(vt);
  out.solve = [base, cap, vt_copy](const Matrix &rhs) -> Matrix {
    Matrix r = base->solve(rhs);
    r.noalias() -= cap->ainv_u * cap->lu.solve(*vt_copy * r);
    return r;
  };
  // Transposed system: (A^T + Vt^T S^T U^T)^{-1}; capacitance transposes too.
  auto ainvt_v = std::make_shared<Matrix>(a.solve_transpose(vt.transpose()));
  auto u_copy = std::make_shared<Matrix>(u);
  out.solve_transpose = [base, cap, ainvt_v, u_copy](const Matrix &rhs) -> Matrix {
    Matrix r = base->solve_transpose(rhs);
    const Matrix k = cap->lu.transpose().solve(u_copy->transpose() * r);
    r.noalias() -= *ainvt_v * k;
    return r;
  };
  return out;
}

SvdResult randomized_svd(const LinearOperator &op, Index h, Index oversample, int power_iters,
                         std::uint64_t seed) {
  const Index min_dim = std::min(op.nrows, op.ncols);
  if (h < 1) throw Error("randomized_svd: rank must be positive");
  if (h > min_dim) throw Error("randomized_svd: rank exceeds operator dimensions");
  if (oversample < 0 || power_iters < 0) throw Error("randomized_svd: negative parameter");
  const Index l = std::min(h + oversample, min_dim);
  Rng rng(seed);
  Matrix y = op.apply(rng.normal_matrix(op.ncols, l));
  if (y.rows() != op.nrows || y.cols() != l) throw Error("randomized_svd: operator shape mismatch");
  Matrix q = orthonormal_basis(y);
  for (int it = 0; it < power_iters; ++it) {
    const Matrix z = orthonormal_basis(op.apply_transpose(q));
    q = orthonormal_basis(op.apply(z));
  }
  // B^T = op^T Q is ncols x l; its thin SVD gives B = Ub S Vb^T.
  const Matrix bt = op.apply_transpose(q);
  Eigen::JacobiSVD<Matrix> svd(bt, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdResult r;
  r.s = svd.singularValues().head(h);
  r.V = svd.matrixU().leftCols(h);
  r.U = q * svd.matrixV().leftCols(h);
  // Sign convention: the largest-magnitude entry of each left vector is positive.
  for (Index j = 0; j < h; ++j) {
    Index imax = 0;
    r.U.col(j).cwiseAbs().maxCoeff(&imax);
    if (r.U(imax, j) < 0.0) {
      r.U.col(j) *= -1.0;
      r.V.col(j) *= -1.0;
    }
  }
  return r;
}

double power_iteration_max(const LinearOperator &op, std::uint64_t seed, Index block,
                           double tol, int max_iters) {
  if (op.nrows != op.ncols) throw Error("power_iteration_max: operator must be square");
  const Index b = std::clamp<Index>(block, 1, op.ncols);
  Rng rng(seed);
  Matrix x = orthonormal_basis(rng.normal_matrix(op.ncols, b));
  double lambda = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    const Matrix y = op.apply(x);
    if (y.norm() == 0.0) return 0.0;
    // Ritz values of the operator on span(x).
    Eigen::SelfAdjointEigenSolver<Matrix> es(dense::symmetrize(x.transpose() * y),
                                             Eigen::EigenvaluesOnly);
    const double next = es.eigenvalues().maxCoeff();
    if (it > 0 && std::abs(next - lambda) <= tol * std::max(std::abs(next), 1e-300)) return next;
    lambda = next;
    x = orthonormal_basis(y);
  }
  throw Error("power iteration did not converge in " + std::to_string(max_iters) + " iterations");
}

namespace dense {

Matrix symmetrize(const Matrix &m) { return 0.5 * (m + m.transpose()); }

Matrix inv_sqrt_sym(const Matrix &m, double floor) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  if (es.info() != Eigen::Success) throw Error("inv_sqrt_sym: eigendecomposition failed");
  Vector ev = es.eigenvalues().cwiseMax(floor).cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Matrix sqrt_sym(const Matrix &m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  if (es.info() != Eigen::Success) throw Error("sqrt_sym: eigendecomposition failed");
  Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double spectral_radius(const Matrix &a) {
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<std::complex<double>> eigenvalues_sorted(const Matrix &a) {
  Eigen::EigenSolver<Matrix> es(a, false);
  std::vector<std::complex<double>> ev(es.eigenvalues().data(),
                                       es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(ev.begin(), ev.end(), [](auto x, auto y) {
    if (std::abs(x.real() - y.real()) > 1e-12) return x.real() > y.real();
    return x.imag() > y.imag();
  });
  return ev;
}

Matrix pinv(const Matrix &m, double rtol) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector &s = svd.singularValues();
  const double cut = s.size() > 0 ? rtol * s(0) : 0.0;
  Vector inv = s;
  for (Index i = 0; i < s.size(); ++i) inv(i) = s(i) > cut ? 1.0 / s(i) : 0.0;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix solve_stein(const Matrix &a, const Matrix &q, double tol) {
  if (a.rows() != a.cols() || q.rows() != a.rows() || q.cols() != a.cols())
    throw Error("solve_stein: shape mismatch");
  const double rho = spectral_radius(a);
  if (!(rho < 1.0)) {
    std::ostringstream msg;
    msg << "unstable transition (spectral radius " << rho << "); fixed point does not exist";
    throw Error(msg.str());
  }
  Matrix x = q;
  Matrix ak = a;
  for (int it = 0; it < 200; ++it) {
    const Matrix dx = ak * x * ak.transpose();
    x += dx;
    ak = ak * ak;
    if (dx.norm() <= tol * std::max(1.0, x.norm())) return x;
  }
  throw Error("solve_stein: did not converge");
}

Matrix solve_lyapunov(const Matrix &a, double tol) {
  return symmetrize(solve_stein(a, Matrix::Identity(a.rows(), a.cols()), tol));
}

std::pair<double, double> slogdet(const Matrix &m) {
  if (m.rows() == 0) return {1.0, 0.0};
  Eigen::PartialPivLU<Matrix> lu(m);
  const Matrix &f = lu.matrixLU();
  double sign = lu.permutationP().determinant();
  double log_abs = 0.0;
  for (Index i = 0; i < f.rows(); ++i) {
    const double d = f(i, i);
    if (d == 0.0) return {0.0, -std::numeric_limits<double>::infinity()};
    if (d < 0.0) sign = -sign;
    log_abs += std::log(std::abs(d));
  }
  return {sign, log_abs};
}

}  // namespace dense
}  // namespace ldstext
