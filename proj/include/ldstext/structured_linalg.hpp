// structured_linalg.hpp

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

#ifndef LDSTEXT_STRUCTURED_LINALG_HPP_
#define LDSTEXT_STRUCTURED_LINALG_HPP_

#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <variant>
#include <vector>

#include "ldstext/common.hpp"
#include "ldstext/kernels.hpp"

namespace ldstext {

// Implicit matrix given by its action on blocks of column vectors.
struct LinearOperator {
  Index nrows = 0;
  Index ncols = 0;
  std::function<Matrix(const Matrix &)> apply;            // M * X
  std::function<Matrix(const Matrix &)> apply_transpose;  // M^T * Y
};

struct LowRankTerm {
  double sign = 1.0;  // +1 or -1
  Matrix U;           // n x p
  Matrix S;           // p x p
  Matrix Vt;          // p x n
};

// base + sum_k sign_k * U_k S_k Vt_k, where base is diagonal or sparse.
class StructuredMatrix {
 public:
  static StructuredMatrix diagonal(Vector d);
  static StructuredMatrix sparse(CsrMatrix s);

  StructuredMatrix &add_term(double sign, Matrix u, Matrix s, Matrix vt);

  Index dim() const { return dim_; }
  const std::vector<LowRankTerm> &terms() const { return terms_; }
  Matrix apply(const Matrix &x) const;
  Matrix apply_transpose(const Matrix &x) const;
  // Test-only densification.
  Matrix dense() const;
  LinearOperator as_operator() const;

 private:
  Index dim_ = 0;
  std::variant<Vector, CsrMatrix> base_;
  CsrMatrix base_t_;
  std::vector<LowRankTerm> terms_;
};

// A square matrix whose inverse action, inverse trace and log-determinant
// are cheap.  Bases nest: woodbury_inverse() returns another InvertibleBase.
struct InvertibleBase {
  Index dim = 0;
  std::function<Matrix(const Matrix &)> solve;            // A^{-1} X
  std::function<Matrix(const Matrix &)> solve_transpose;  // A^{-T} X
  double inverse_trace = 0.0;
  double logdet = 0.0;

  static InvertibleBase diagonal(const Vector &d);
  static InvertibleBase identity(Index n);
};

// (A + U S Vt)^{-1} rhs.  Never forms an n x n matrix.
Matrix woodbury_solve(const InvertibleBase &a, const Matrix &u, const Matrix &s, const Matrix &vt,
                      const Matrix &rhs);

// log det(A + U S Vt) = log det S + log det A + log det(S^{-1} + Vt A^{-1} U).
double woodbury_logdet(const InvertibleBase &a, const Matrix &u, const Matrix &s,
                       const Matrix &vt);

// tr(X Y^T) = sum_ij X_ij Y_ij.
double trace_product(const Matrix &x, const Matrix &y);

double trace_woodbury_inverse(const InvertibleBase &a, const Matrix &u, const Matrix &s,
                              const Matrix &vt);
// tr[(A + U S Vt)^{-1} Z W^T]
double trace_woodbury_product(const InvertibleBase &a, const Matrix &u, const Matrix &s,
                              const Matrix &vt, const Matrix &z, const Matrix &w);

// (A + U S Vt) as a new InvertibleBase, for recursive use.
InvertibleBase woodbury_inverse(const InvertibleBase &a, const Matrix &u, const Matrix &s,
                                const Matrix &vt);

struct SvdResult {
  Matrix U;  // nrows x h
  Vector s;  // h, nonincreasing
  Matrix V;  // ncols x h
};

// Randomized range finder with power iterations.  If h + q exceeds the
// smaller dimension the oversampling is clamped; h itself may not.
SvdResult randomized_svd(const LinearOperator &op, Index h, Index oversample = 10,
                         int power_iters = 2, std::uint64_t seed = 0);

// Largest eigenvalue of a symmetric operator by block power iteration with a
// Rayleigh-Ritz step.  A block at least as wide as the operator's rank
// converges in two sweeps.
double power_iteration_max(const LinearOperator &sym_op, std::uint64_t seed, Index block = 1,
                           double tol = 1e-12, int max_iters = 10000);

namespace dense {

Matrix symmetrize(const Matrix &m);
// Symmetric M^{-1/2}, eigenvalues floored at `floor`.
Matrix inv_sqrt_sym(const Matrix &m, double floor = 1e-10);
Matrix sqrt_sym(const Matrix &m);
double spectral_radius(const Matrix &a);
std::vector<std::complex<double>> eigenvalues_sorted(const Matrix &a);
Matrix pinv(const Matrix &m, double rtol = 1e-12);
// Solves X = A X A^T + Q by doubling: X = sum_k A^k Q A^kT.  Requires rho(A) < 1.
Matrix solve_stein(const Matrix &a, const Matrix &q, double tol = 1e-12);
// Unconditional state covariance: X = A X A^T + I.
Matrix solve_lyapunov(const Matrix &a, double tol = 1e-12);
// Sign and log|det| from a pivoted LU.
std::pair<double, double> slogdet(const Matrix &m);

}  // namespace dense
}  // namespace ldstext

#endif  // LDSTEXT_STRUCTURED_LINALG_HPP_
