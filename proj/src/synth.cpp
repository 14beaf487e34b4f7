// synth.cpp

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

#include "ldstext/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "ldstext/rng.hpp"
#include "ldstext/structured_linalg.hpp"

namespace ldstext {

namespace {

Vector random_distribution(Rng &rng, Index n, double peak) {
  Vector logits(n);
  for (Index i = 0; i < n; ++i) logits(i) = peak * rng.normal();
  logits.array() -= logits.maxCoeff();
  Vector p = logits.array().exp();
  return p / p.sum();
}

std::uint32_t draw(Rng &rng, const Eigen::Ref<const Vector> &cdf) {
  const double u = rng.uniform();
  const double *begin = cdf.data();
  const double *it = std::lower_bound(begin, begin + cdf.size(), u);
  return static_cast<std::uint32_t>(std::min<std::ptrdiff_t>(it - begin, cdf.size() - 1));
}

Matrix row_cdf(const Matrix &m) {
  Matrix cdf = m;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 1; j < m.cols(); ++j) cdf(i, j) += cdf(i, j - 1);
    cdf.row(i) /= cdf(i, m.cols() - 1);
  }
  return cdf;
}

}  // namespace

GroundTruthSystem random_stable_system(Index h, Index v, double rho, double noise,
                                       std::uint64_t seed) {
  if (h < 1 || v < 1) throw Error("random_stable_system: dimensions must be positive");
  if (!(rho > 0.0 && rho < 1.0)) throw Error("random_stable_system: rho must be in (0, 1)");
  Rng rng(seed);
  GroundTruthSystem sys;
  sys.h = h;
  sys.V = v;
  sys.seed = seed;
  sys.A = rng.normal_matrix(h, h);
  sys.A *= rho / dense::spectral_radius(sys.A);
  sys.C = rng.normal_matrix(v, h) / std::sqrt(static_cast<double>(h));
  Vector d(v);
  for (Index i = 0; i < v; ++i) d(i) = noise * noise * (0.5 + rng.uniform());
  sys.D = d.asDiagonal();
  return sys;
}

WhitenedSystem population_whitened(const GroundTruthSystem &sys) {
  const Matrix sigma = dense::solve_lyapunov(sys.A);
  const Matrix psi0 = sys.C * sigma * sys.C.transpose() + sys.D;
  WhitenedSystem out;
  out.whitener = dense::inv_sqrt_sym(psi0);
  out.params.A = sys.A;
  out.params.C = out.whitener * sys.C;
  out.params.noise_core = sigma;
  return out;
}

Matrix sample_lds(const GroundTruthSystem &sys, Index T, std::uint64_t seed) {
  if (!(dense::spectral_radius(sys.A) < 1.0)) throw Error("sample_lds: unstable system");
  Rng rng(seed);
  const Matrix d_root = dense::sqrt_sym(sys.D);
  Matrix out(T, sys.V);
  Vector x = Vector::Zero(sys.h);
  Vector eta(sys.h), eps(sys.V);
  for (Index t = 0; t < T; ++t) {
    for (Index i = 0; i < sys.h; ++i) eta(i) = rng.normal();
    for (Index i = 0; i < sys.V; ++i) eps(i) = rng.normal();
    x = sys.A * x + eta;
    out.row(t) = (sys.C * x + d_root * eps).transpose();
  }
  return out;
}

std::vector<Matrix> sample_lds_sequences(const GroundTruthSystem &sys, Index count, Index length,
                                         std::uint64_t seed) {
  Rng seeds(seed);
  std::vector<Matrix> out;
  out.reserve(count);
  for (Index i = 0; i < count; ++i) out.push_back(sample_lds(sys, length, seeds.next_u64()));
  return out;
}

HmmText sample_hmm_text(Index n_states, Index v, Index T, std::uint64_t seed,
                        Index sentence_length) {
  if (n_states < 1 || v < 1) throw Error("sample_hmm_text: dimensions must be positive");
  if (sentence_length < 1) throw Error("sample_hmm_text: sentence length must be positive");
  Rng rng(seed);
  HmmText hmm;
  hmm.transition.resize(n_states, n_states);
  hmm.emission.resize(n_states, v);
  for (Index a = 0; a < n_states; ++a) {
    // Every entry is positive, so the chain is ergodic.
    hmm.transition.row(a) = random_distribution(rng, n_states, 1.5).transpose();
    hmm.emission.row(a) = random_distribution(rng, v, 2.0).transpose();
  }
  Vector pi = Vector::Constant(n_states, 1.0 / static_cast<double>(n_states));
  for (int it = 0; it < 10000; ++it) {
    const Vector next = hmm.transition.transpose() * pi;
    const double change = (next - pi).cwiseAbs().sum();
    pi = next / next.sum();
    if (change < 1e-15) break;
  }
  hmm.stationary = pi;

  const Matrix trans_cdf = row_cdf(hmm.transition);
  const Matrix emit_cdf = row_cdf(hmm.emission);
  Vector pi_cdf = pi;
  for (Index i = 1; i < n_states; ++i) pi_cdf(i) += pi_cdf(i - 1);
  pi_cdf /= pi_cdf(n_states - 1);

  std::uint32_t state = draw(rng, pi_cdf);
  TokenIds current;
  for (Index t = 0; t < T; ++t) {
    if (t > 0) state = draw(rng, trans_cdf.row(state).transpose());
    current.push_back(draw(rng, emit_cdf.row(state).transpose()));
    if (static_cast<Index>(current.size()) == sentence_length) {
      hmm.sentences.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) hmm.sentences.push_back(std::move(current));
  return hmm;
}

Matrix hmm_lag1_joint(const HmmText &hmm) {
  return hmm.emission.transpose() * hmm.stationary.asDiagonal() * hmm.transition * hmm.emission;
}

std::string synthetic_token(std::uint32_t id) {
  std::string s;
  std::uint64_t n = id;
  do {
    s.push_back(static_cast<char>('a' + n % 26));
    n /= 26;
  } while (n > 0);
  std::reverse(s.begin(), s.end());
  return s;
}

void write_token_corpus(const std::string &path, const std::vector<TokenIds> &sentences) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (const TokenIds &s : sentences) {
    for (std::size_t t = 0; t < s.size(); ++t) {
      if (t) out << ' ';
      out << synthetic_token(s[t]);
    }
    out << '\n';
  }
  if (!out) throw Error("write failed: " + path);
}

void write_dense_sequences(const std::string &path, const std::vector<Matrix> &sequences) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << std::setprecision(17);
  // One observation per line; a blank line separates sequences.
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    if (i) out << '\n';
    const Matrix &s = sequences[i];
    for (Index t = 0; t < s.rows(); ++t) {
      for (Index j = 0; j < s.cols(); ++j) {
        if (j) out << ' ';
        out << s(t, j);
      }
      out << '\n';
    }
  }
  if (!out) throw Error("write failed: " + path);
}

}  // namespace ldstext
