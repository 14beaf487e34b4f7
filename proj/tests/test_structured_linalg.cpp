// test_structured_linalg.cpp

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

#include <cmath>

#include "ldstext/rng.hpp"
#include "ldstext/structured_linalg.hpp"
#include "oracles.hpp"

using namespace ldstext;

namespace {

Matrix orthonormal(Rng &rng, Index n, Index k) {
  Eigen::HouseholderQR<Matrix> qr(rng.normal_matrix(n, k));
  return qr.householderQ() * Matrix::Identity(n, k);
}

struct Instance {
  Vector d;
  Matrix u, s, vt;
  Matrix dense() const { return Matrix(d.asDiagonal()) + u * s * vt; }
};

// Symmetric PD instance: diag(d) + U S U^T with S PD.
Instance random_pd(Rng &rng, Index n, Index p) {
  Instance in;
  in.d = (rng.normal_matrix(n, 1).array().abs() + 0.5).matrix();
  in.u = rng.normal_matrix(n, p);
  const Matrix g = rng.normal_matrix(p, p);
  in.s = g * g.transpose() + 0.5 * Matrix::Identity(p, p);
  in.vt = in.u.transpose();
  return in;
}

}  // namespace

TEST_CASE("woodbury_solve examples") {
  const Vector e1 = Vector::Unit(2, 0);
  const Matrix s = Matrix::Ones(1, 1);
  const Matrix x = woodbury_solve(InvertibleBase::identity(2), e1, s, e1.transpose(), e1);
  CHECK((x - 0.5 * e1).norm() < 1e-15);
  const Vector d = Vector::LinSpaced(3, 1.0, 3.0);
  const Vector rhs = Vector::Ones(3);
  const Matrix plain =
      woodbury_solve(InvertibleBase::diagonal(d), Matrix(3, 0), Matrix(0, 0), Matrix(0, 3), rhs);
  CHECK((plain - rhs.cwiseQuotient(d)).norm() < 1e-15);
}

TEST_CASE("woodbury_solve matches a dense solve, including non-symmetric terms") {
  Rng rng(1);
  const Index n = 8, p = 2;
  const Vector d = (rng.normal_matrix(n, 1).array().abs() + 0.5).matrix();
  const Matrix u = rng.normal_matrix(n, p), vt = rng.normal_matrix(p, n);
  const Matrix s = rng.normal_matrix(p, p) + 3.0 * Matrix::Identity(p, p);
  const Matrix rhs = rng.normal_matrix(n, 2);
  const Matrix full = Matrix(d.asDiagonal()) + u * s * vt;
  CHECK(oracle::rel_err(woodbury_solve(InvertibleBase::diagonal(d), u, s, vt, rhs),
                        full.lu().solve(rhs)) < 1e-10);
}

TEST_CASE("woodbury_solve reports a singular inner system") {
  const Vector e1 = Vector::Unit(2, 0);
  // I - e1 e1^T is singular.
  CHECK_THROWS_AS(woodbury_solve(InvertibleBase::identity(2), e1, -Matrix::Ones(1, 1),
                                 e1.transpose(), e1),
                  Error);
}

TEST_CASE("woodbury_logdet") {
  const Vector e1 = Vector::Unit(2, 0);
  CHECK(woodbury_logdet(InvertibleBase::identity(2), e1, Matrix::Ones(1, 1), e1.transpose()) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const Vector d = Vector::LinSpaced(3, 1.0, 3.0);
  CHECK(woodbury_logdet(InvertibleBase::diagonal(d), Matrix(3, 0), Matrix(0, 0), Matrix(0, 3)) ==
        doctest::Approx(std::log(6.0)).epsilon(1e-15));
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const Instance in = random_pd(rng, 10, 3);
    const double ld = woodbury_logdet(InvertibleBase::diagonal(in.d), in.u, in.s, in.vt);
    CHECK(std::abs(ld - oracle::logdet_spd(in.dense())) < 1e-9 * std::max(1.0, std::abs(ld)));
  }
  // I - 2 e1 e1^T has a negative eigenvalue.
  CHECK_THROWS_AS(
      woodbury_logdet(InvertibleBase::identity(2), e1, -2.0 * Matrix::Ones(1, 1), e1.transpose()),
      Error);
}

TEST_CASE("trace identities") {
  const Vector e1 = Vector::Unit(3, 0);
  CHECK(trace_product(e1, e1) == 1.0);
  CHECK(trace_product(e1, Vector::Zero(3)) == 0.0);
  Rng rng(3);
  const Matrix x = rng.normal_matrix(6, 2), y = rng.normal_matrix(6, 2);
  CHECK(std::abs(trace_product(x, y) - (x * y.transpose()).trace()) < 1e-13);

  CHECK(trace_woodbury_inverse(InvertibleBase::identity(5), Matrix(5, 0), Matrix(0, 0),
                               Matrix(0, 5)) == 5.0);
  const Vector f1 = Vector::Unit(2, 0);
  CHECK(trace_woodbury_inverse(InvertibleBase::identity(2), f1, Matrix::Ones(1, 1),
                               f1.transpose()) == doctest::Approx(1.5).epsilon(1e-15));

  const Instance in = random_pd(rng, 8, 2);
  const Matrix z = rng.normal_matrix(8, 3), w = rng.normal_matrix(8, 3);
  const Matrix inv = in.dense().inverse();
  const auto base = InvertibleBase::diagonal(in.d);
  CHECK(std::abs(trace_woodbury_inverse(base, in.u, in.s, in.vt) - inv.trace()) <
        1e-10 * std::abs(inv.trace()));
  const double ref = (inv * z * w.transpose()).trace();
  CHECK(std::abs(trace_woodbury_product(base, in.u, in.s, in.vt, z, w) - ref) <
        1e-10 * std::max(1.0, std::abs(ref)));
}

TEST_CASE("nested woodbury composes") {
  Rng rng(4);
  const Instance inner = random_pd(rng, 12, 2);
  const InvertibleBase b = woodbury_inverse(InvertibleBase::diagonal(inner.d), inner.u, inner.s, inner.vt);
  const Matrix u2 = rng.normal_matrix(12, 3);
  const Matrix s2 = Matrix::Identity(3, 3);
  const Matrix full = inner.dense() + u2 * s2 * u2.transpose();
  const Matrix rhs = rng.normal_matrix(12, 2);
  CHECK(oracle::rel_err(woodbury_solve(b, u2, s2, u2.transpose(), rhs), full.ldlt().solve(rhs)) <
        1e-9);
  CHECK(std::abs(woodbury_logdet(b, u2, s2, u2.transpose()) - oracle::logdet_spd(full)) < 1e-9);
  CHECK(std::abs(trace_woodbury_inverse(b, u2, s2, u2.transpose()) - full.inverse().trace()) <
        1e-9);
}

TEST_CASE("StructuredMatrix matvec agrees with its dense form and adjoint") {
  Rng rng(5);
  std::vector<CsrMatrix::Entry> entries;
  for (int i = 0; i < 40; ++i)
    entries.push_back({static_cast<std::uint32_t>(rng.below(20)),
                       static_cast<std::uint32_t>(rng.below(20)), rng.normal()});
  StructuredMatrix m = StructuredMatrix::sparse(CsrMatrix::from_entries(20, 20, entries));
  m.add_term(-1.0, rng.normal_matrix(20, 1), Matrix::Ones(1, 1), rng.normal_matrix(1, 20));
  m.add_term(1.0, rng.normal_matrix(20, 3), rng.normal_matrix(3, 3), rng.normal_matrix(3, 20));
  const Matrix x = rng.normal_matrix(20, 2), y = rng.normal_matrix(20, 2);
  CHECK(oracle::rel_err(m.apply(x), m.dense() * x) < 1e-13);
  CHECK(oracle::rel_err(m.apply_transpose(x), m.dense().transpose() * x) < 1e-13);
  const LinearOperator op = m.as_operator();
  const double lhs = (op.apply(x).transpose() * y).trace();
  const double rhs = (x.transpose() * op.apply_transpose(y)).trace();
  CHECK(std::abs(lhs - rhs) < 1e-10 * std::abs(lhs));
}

TEST_CASE("randomized_svd") {
  SUBCASE("rank one") {
    const Vector u = Vector::Unit(5, 1), v = 3.0 * Vector::Unit(4, 2);
    const Matrix m = u * v.transpose();
    LinearOperator op{5, 4, [m](const Matrix &x) { return Matrix(m * x); },
                      [m](const Matrix &y) { return Matrix(m.transpose() * y); }};
    const SvdResult r = randomized_svd(op, 1, 10, 2, 1);
    CHECK(std::abs(r.s(0) - 3.0) < 1e-8);
  }
  SUBCASE("diagonal spectrum") {
    const Matrix m = Vector::LinSpaced(5, 5.0, 1.0).asDiagonal();
    LinearOperator op{5, 5, [m](const Matrix &x) { return Matrix(m * x); },
                      [m](const Matrix &y) { return Matrix(m.transpose() * y); }};
    const SvdResult r = randomized_svd(op, 2, 10, 2, 1);
    CHECK(std::abs(r.s(0) - 5.0) < 1e-8);
    CHECK(std::abs(r.s(1) - 4.0) < 1e-8);
  }
  SUBCASE("known spectrum, orthonormal factors, determinism") {
    Rng rng(6);
    const Matrix u = orthonormal(rng, 40, 40), v = orthonormal(rng, 40, 40);
    Vector s(40);
    for (Index i = 0; i < 40; ++i) s(i) = std::pow(0.5, static_cast<double>(i));
    const Matrix m = u * s.asDiagonal() * v.transpose();
    LinearOperator op{40, 40, [m](const Matrix &x) { return Matrix(m * x); },
                      [m](const Matrix &y) { return Matrix(m.transpose() * y); }};
    const SvdResult r = randomized_svd(op, 10, 10, 2, 9);
    for (Index i = 0; i < 10; ++i) CHECK(std::abs(r.s(i) - s(i)) < 1e-6);
    for (Index i = 1; i < 10; ++i) CHECK(r.s(i) <= r.s(i - 1));
    CHECK((r.U.transpose() * r.U - Matrix::Identity(10, 10)).norm() < 1e-8);
    CHECK((r.V.transpose() * r.V - Matrix::Identity(10, 10)).norm() < 1e-8);
    const double err = (m - r.U * r.s.asDiagonal() * r.V.transpose()).norm();
    CHECK(err < 1.01 * s.tail(30).norm() + 1e-10);
    const SvdResult again = randomized_svd(op, 10, 10, 2, 9);
    CHECK((again.U - r.U).norm() == 0.0);
    CHECK((again.s - r.s).norm() == 0.0);
  }
  SUBCASE("dimension errors") {
    const Matrix m = Matrix::Identity(3, 3);
    LinearOperator op{3, 3, [m](const Matrix &x) { return Matrix(m * x); },
                      [m](const Matrix &y) { return Matrix(m * y); }};
    CHECK_THROWS_AS(randomized_svd(op, 4), Error);
    CHECK_THROWS_AS(randomized_svd(op, 0), Error);
  }
}

TEST_CASE("power_iteration_max") {
  Rng rng(7);
  const Matrix g = rng.normal_matrix(15, 15);
  const Matrix m = g * g.transpose();
  LinearOperator op{15, 15, [m](const Matrix &x) { return Matrix(m * x); },
                    [m](const Matrix &y) { return Matrix(m * y); }};
  const double top = Eigen::SelfAdjointEigenSolver<Matrix>(m).eigenvalues().maxCoeff();
  CHECK(std::abs(power_iteration_max(op, 1, 3) - top) < 1e-9 * top);
}

TEST_CASE("dense helpers") {
  Rng rng(8);
  Matrix a = rng.normal_matrix(4, 4);
  a *= 0.8 / dense::spectral_radius(a);
  CHECK(dense::spectral_radius(a) == doctest::Approx(0.8).epsilon(1e-12));
  const Matrix sig = dense::solve_lyapunov(a);
  CHECK((sig - a * sig * a.transpose() - Matrix::Identity(4, 4)).norm() < 1e-10);
  CHECK((sig - sig.transpose()).norm() < 1e-12);
  CHECK(dense::solve_lyapunov(Matrix::Constant(1, 1, 0.5))(0, 0) ==
        doctest::Approx(4.0 / 3.0).epsilon(1e-13));
  CHECK((dense::solve_lyapunov(Matrix::Zero(3, 3)) - Matrix::Identity(3, 3)).norm() == 0.0);
  CHECK_THROWS_AS(dense::solve_lyapunov(Matrix::Constant(1, 1, 1.0)), Error);

  const Matrix g = rng.normal_matrix(5, 5);
  const Matrix spd = g * g.transpose() + Matrix::Identity(5, 5);
  const Matrix is = dense::inv_sqrt_sym(spd);
  CHECK((is * spd * is - Matrix::Identity(5, 5)).norm() < 1e-10);
  const Matrix sq = dense::sqrt_sym(spd);
  CHECK((sq * sq - spd).norm() < 1e-10 * spd.norm());
  const auto [sign, ld] = dense::slogdet(spd);
  CHECK(sign == 1.0);
  CHECK(std::abs(ld - oracle::logdet_spd(spd)) < 1e-10);
  const Matrix r = rng.normal_matrix(6, 3);
  CHECK((dense::pinv(r) - oracle::pinv(r)).norm() < 1e-10);
}
