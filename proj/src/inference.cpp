// inference.cpp

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

#include "ldstext/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include <Eigen/SVD>

#include "ldstext/binary_io.hpp"
#include "ldstext/kernels.hpp"
#include "ldstext/structured_linalg.hpp"

namespace ldstext {

namespace {

constexpr std::string_view kRnnMagic = "LDSRNN01";
constexpr std::uint32_t kRnnVersion = 1;

constexpr const char *kRnnConvention =
    "h_t = A_rnn h_{t-1} + B_rnn[:, w_t]; h_0 = 0; "
    "B_rnn[:, i] = K diag(mu^{-1/2}) (e_i - mu) with K the steady-state gain in whitened "
    "coordinates; predicted raw-count direction = C_rnn A h_t, C_rnn = diag(mu^{1/2}) C";

}  // namespace

Index WhitenedCorpus::dim() const {
  if (is_text()) return whitener.size();
  return dense.empty() ? 0 : dense.front().cols();
}

Index WhitenedCorpus::length(std::size_t i) const {
  return is_text() ? static_cast<Index>(sentences[i].size()) : dense[i].rows();
}

Index WhitenedCorpus::total_length() const {
  Index n = 0;
  for (std::size_t i = 0; i < num_sequences(); ++i) n += length(i);
  return n;
}

WhitenedCorpus WhitenedCorpus::text(const Vector &mu, std::vector<TokenIds> sentences) {
  if ((mu.array() <= 0.0).any()) throw Error("zero-frequency type; apply pseudocounts");
  WhitenedCorpus c;
  c.whitener = mu.array().rsqrt();
  c.null_direction = mu.array().sqrt();
  c.null_direction /= c.null_direction.norm();
  c.sentences = std::move(sentences);
  for (const TokenIds &s : c.sentences)
    for (std::uint32_t id : s)
      if (id >= mu.size()) throw Error("token id out of range for the model vocabulary");
  return c;
}

WhitenedCorpus WhitenedCorpus::dense_rows(std::vector<Matrix> sequences) {
  WhitenedCorpus c;
  c.dense = std::move(sequences);
  return c;
}

ProjectedSequence project_sequence(const WhitenedCorpus &corpus, std::size_t i, const Matrix &c) {
  ProjectedSequence out;
  if (corpus.is_text()) {
    const TokenIds &ids = corpus.sentences[i];
    const Index n = static_cast<Index>(ids.size());
    out.cty.resize(n, c.cols());
    out.yy_perp.resize(n);
    // y = W e_i - s with s^T y = 0, |y|^2 = 1/mu_i - 1 and C^T s = 0.
    for (Index t = 0; t < n; ++t) {
      const double w = corpus.whitener(ids[t]);
      out.cty.row(t) = c.row(ids[t]) * w;
      out.yy_perp(t) = w * w - 1.0;
    }
    // Guard against emissions that are not exactly orthogonal to s.
    const Vector cts = c.transpose() * corpus.null_direction;
    if (cts.norm() > 0.0) out.cty.rowwise() -= cts.transpose();
  } else {
    const Matrix &y = corpus.dense[i];
    out.cty = y * c;
    out.yy_perp = y.rowwise().squaredNorm();
  }
  return out;
}

ExactPosterior exact_filter_smooth(const LdsParams &p, const ProjectedSequence &seq) {
  if (p.dim() > kOracleMaxDim) throw Error("exact filter is oracle only (V above 512)");
  const Index h = p.h();
  const Index n = seq.cty.rows();
  const Matrix eye = Matrix::Identity(h, h);
  const Matrix gram = p.C.transpose() * p.C;
  Eigen::SelfAdjointEigenSolver<Matrix> eg(gram);
  const Matrix root = eg.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                      eg.eigenvectors().transpose();
  const double d = static_cast<double>(p.data_dim());
  const double c0 = -0.5 * d * std::log(2.0 * std::numbers::pi);

  ExactPosterior post;
  post.filtered.resize(n, h);
  post.filtered_cov.resize(n);
  post.predicted_cov.resize(n);
  Vector x = Vector::Zero(h);
  Matrix v = Matrix::Zero(h, h);
  for (Index t = 0; t < n; ++t) {
    const Vector m = p.A * x;
    const Matrix pc = dense::symmetrize(p.A * v * p.A.transpose() + eye);
    const Matrix b = pc - p.noise_core;
    const Matrix z = innovation_core(gram, b).Z;
    const Matrix kc = pc * (eye - gram * z);
    const Vector cty = seq.cty.row(t).transpose();
    const Vector innov = cty - gram * m;
    x = m + kc * innov;
    v = dense::symmetrize(pc - kc * gram * pc);
    post.filtered.row(t) = x.transpose();
    post.filtered_cov[t] = v;
    post.predicted_cov[t] = pc;

    Eigen::LLT<Matrix> llt(dense::symmetrize(eye + root * b * root.transpose()));
    if (llt.info() != Eigen::Success) throw Error("D not PSD on data subspace");
    double logdet = 0.0;
    for (Index i = 0; i < h; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
    const double quad =
        seq.yy_perp(t) - 2.0 * cty.dot(m) + m.dot(gram * m) - innov.dot(z * innov);
    post.loglik += c0 - 0.5 * logdet - 0.5 * quad;
  }

  post.smoothed = post.filtered;
  post.smoothed_cov = post.filtered_cov;
  post.cross_cov.resize(n > 0 ? n - 1 : 0);
  for (Index t = n - 2; t >= 0; --t) {
    const Matrix &pn = post.predicted_cov[t + 1];
    const Matrix jt = pn.llt().solve(p.A * post.filtered_cov[t]).transpose();
    const Vector xf = post.filtered.row(t).transpose();
    const Vector xs_next = post.smoothed.row(t + 1).transpose();
    post.smoothed.row(t) = (xf + jt * (xs_next - p.A * xf)).transpose();
    post.smoothed_cov[t] = dense::symmetrize(
        post.filtered_cov[t] + jt * (post.smoothed_cov[t + 1] - pn) * jt.transpose());
    post.cross_cov[t] = jt * post.smoothed_cov[t + 1];
  }
  return post;
}

ExactPosterior exact_filter_smooth(const LdsParams &p, const WhitenedCorpus &corpus,
                                   std::size_t i) {
  if (p.dim() > kOracleMaxDim) throw Error("exact filter is oracle only (V above 512)");
  if (corpus.dim() != p.dim()) throw Error("corpus dimension does not match the model");
  return exact_filter_smooth(p, project_sequence(corpus, i, p.C));
}

Matrix filter_sentence(const SteadyState &ss, const TokenIds &ids, std::uint32_t oov_id) {
  if (ss.gain_columns.size() == 0) throw Error("filter_sentence: steady state lacks gain columns");
  return kernels::filter_tokens(ss.F, ss.gain_columns, ids, oov_id);
}

Matrix filter_dense(const SteadyState &ss, const LdsParams &p, const Matrix &rows) {
  const Matrix inputs = (ss.Kcore * (p.C.transpose() * rows.transpose())).transpose();
  Matrix out(rows.rows(), p.h());
  Vector x = Vector::Zero(p.h());
  for (Index t = 0; t < rows.rows(); ++t) {
    x = ss.F * x + inputs.row(t).transpose();
    out.row(t) = x.transpose();
  }
  return out;
}

Matrix smooth_sentence(const SteadyState &ss, const Matrix &a, const Matrix &filtered) {
  const Index n = filtered.rows();
  Matrix out = filtered;
  if (n == 0) return out;
  const Matrix l = Matrix::Identity(ss.h(), ss.h()) - ss.J * a;
  // Row form: xbar_t^T = xbar_{t+1}^T J^T + xhat_t^T L^T.
  const Matrix jt = ss.J.transpose();
  const Matrix lt = l.transpose();
  for (Index t = n - 2; t >= 0; --t) out.row(t) = out.row(t + 1) * jt + filtered.row(t) * lt;
  return out;
}

EmbeddingContext EmbeddingContext::from_covariance(const Matrix &m) {
  EmbeddingContext ctx;
  ctx.M = dense::symmetrize(m);
  ctx.M_inv_sqrt = dense::inv_sqrt_sym(ctx.M, 1e-10);
  return ctx;
}

std::vector<TokenEmbeddingSequence> embed_corpus(const SteadyState &ss, const LdsParams &p,
                                                 const EmbeddingContext &ctx,
                                                 std::span<const TokenIds> sentences,
                                                 std::uint32_t oov_id) {
  const std::vector<Matrix> filtered = kernels::filter_batch(ss.F, ss.gain_columns, sentences, oov_id);
  std::vector<TokenEmbeddingSequence> out(sentences.size());
  const long n = static_cast<long>(sentences.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (long i = 0; i < n; ++i) {
    TokenEmbeddingSequence &e = out[i];
    e.token_ids = sentences[i];
    e.filtered = filtered[i];
    e.smoothed = smooth_sentence(ss, p.A, e.filtered);
    e.normalized = e.smoothed * ctx.M_inv_sqrt;  // M^{-1/2} symmetric
    for (Index t = 0; t < e.normalized.rows(); ++t) {
      const double norm = e.normalized.row(t).norm();
      if (norm > 0.0 && std::isfinite(norm)) {
        e.normalized.row(t) /= norm;
      } else {
        e.normalized.row(t).setZero();
        e.zero_rows.push_back(t);
      }
    }
  }
  return out;
}

std::vector<SingularPair> transition_singular_pairs(const Matrix &a, const Matrix &emission,
                                                    std::size_t top_n) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Index h = a.rows();
  const Index v = emission.rows();
  const std::size_t keep = std::min<std::size_t>(top_n, static_cast<std::size_t>(v));
  auto top_words = [&](const Vector &dir) {
    const Vector score = emission * dir;
    std::vector<std::uint32_t> idx(v);
    std::iota(idx.begin(), idx.end(), 0u);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::uint32_t x, std::uint32_t y) { return score(x) > score(y); });
    idx.resize(keep);
    return idx;
  };
  std::vector<SingularPair> out;
  for (Index i = 0; i < h; ++i) {
    SingularPair pr;
    pr.sigma = svd.singularValues()(i);
    // Singular vector signs are arbitrary; flip the pair so the dominant
    // emission score of the input direction is positive.
    Vector right = svd.matrixV().col(i);
    Vector left = svd.matrixU().col(i);
    const Vector score = emission * right;
    Index arg = 0;
    if (score.size() > 0) score.cwiseAbs().maxCoeff(&arg);
    if (score.size() > 0 && score(arg) < 0.0) {
      right = -right;
      left = -left;
    }
    pr.right_words = top_words(right);
    pr.left_words = top_words(left);
    out.push_back(std::move(pr));
  }
  return out;
}

RnnInit export_rnn_init(const Model &model, const SteadyState &ss) {
  if (!model.is_text()) throw Error("export_rnn_init: RNN export needs a text model");
  RnnInit init;
  init.A_rnn = ss.F;
  init.B_rnn = ss.gain_columns;
  init.C_rnn = model.unwhitened_emission();
  init.h0 = Vector::Zero(model.params.h());
  init.A = model.params.A;
  init.convention = kRnnConvention;
  return init;
}

void write_rnn_init(const std::string &path, const RnnInit &init) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  BinaryWriter w(out);
  const Index h = init.A_rnn.rows();
  const Index v = init.B_rnn.cols();
  w.magic(kRnnMagic);
  w.u32(kRnnVersion);
  w.u64(static_cast<std::uint64_t>(v));
  w.u64(static_cast<std::uint64_t>(h));
  w.str(init.convention);
  w.matrix(init.A_rnn);
  w.matrix(init.B_rnn);
  w.matrix(init.C_rnn);
  w.vector(init.h0);
  w.matrix(init.A);
  if (!out) throw Error("write failed: " + path);
}

RnnInit read_rnn_init(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  BinaryReader r(in, path);
  r.expect_magic(kRnnMagic);
  if (r.u32() != kRnnVersion) throw Error("unsupported RNN export version in " + path);
  const Index v = static_cast<Index>(r.u64());
  const Index h = static_cast<Index>(r.u64());
  RnnInit init;
  init.convention = r.str();
  init.A_rnn = r.matrix(h, h);
  init.B_rnn = r.matrix(h, v);
  init.C_rnn = r.matrix(v, h);
  init.h0 = r.vector(h);
  init.A = r.matrix(h, h);
  return init;
}

Matrix linear_rnn_states(const RnnInit &init, const TokenIds &ids) {
  const Index h = init.A_rnn.rows();
  Matrix out(static_cast<Index>(ids.size()), h);
  Vector state = init.h0;
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] >= init.B_rnn.cols()) throw Error("linear_rnn_states: token id out of range");
    state = init.A_rnn * state + init.B_rnn.col(ids[t]);
    out.row(static_cast<Index>(t)) = state.transpose();
  }
  return out;
}

}  // namespace ldstext
