// lds_params.cpp

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

#include "ldstext/lds_params.hpp"

#include <fstream>
#include <sstream>

#include "ldstext/binary_io.hpp"
#include "ldstext/structured_linalg.hpp"

namespace ldstext {

namespace {

constexpr std::string_view kModelMagic = "LDSMODL1";
constexpr std::uint32_t kModelVersion = 1;

enum ModelFlags : std::uint32_t {
  kFlagText = 1u << 0,
  kFlagVocab = 1u << 1,
  kFlagEmbeddingCov = 1u << 2,
  kFlagNull = 1u << 3,
};

}  // namespace

void LdsParams::project_emission() {
  if (!has_null()) return;
  C -= null_direction * (null_direction.transpose() * C);
}

void LdsParams::validate(bool require_stable) const {
  const Index hh = A.rows();
  if (hh < 1 || A.cols() != hh) throw Error("LdsParams: A must be square with h >= 1");
  if (C.cols() != hh) throw Error("LdsParams: C has wrong number of columns");
  if (noise_core.rows() != hh || noise_core.cols() != hh)
    throw Error("LdsParams: noise core must be h x h");
  if (has_null() && null_direction.size() != C.rows())
    throw Error("LdsParams: null direction has wrong length");
  if (!A.allFinite() || !C.allFinite() || !noise_core.allFinite())
    throw Error("LdsParams: non-finite parameter");
  if (require_stable) {
    const double rho = dense::spectral_radius(A);
    if (!(rho < 1.0)) {
      std::ostringstream msg;
      msg << "LdsParams: unstable transition (spectral radius " << rho << ")";
      throw Error(msg.str());
    }
  }
}

Matrix LdsParams::dense_noise() const {
  Matrix d = Matrix::Identity(dim(), dim());
  if (has_null()) d -= null_direction * null_direction.transpose();
  d -= C * noise_core * C.transpose();
  return d;
}

Matrix Model::unwhitened_emission() const {
  if (is_text()) return mu.cwiseSqrt().asDiagonal() * params.C;
  if (dense_whitener.size() > 0) return dense_whitener.fullPivLu().solve(params.C);
  return params.C;
}

void write_model(const std::string &path, const Model &m) {
  m.params.validate(false);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  BinaryWriter w(out);
  const Index v = m.params.dim();
  const Index h = m.params.h();
  std::uint32_t flags = 0;
  if (m.is_text()) flags |= kFlagText;
  if (m.vocab) flags |= kFlagVocab;
  if (m.embedding_cov) flags |= kFlagEmbeddingCov;
  if (m.params.has_null()) flags |= kFlagNull;
  w.magic(kModelMagic);
  w.u32(kModelVersion);
  w.u64(static_cast<std::uint64_t>(v));
  w.u64(static_cast<std::uint64_t>(h));
  w.u32(flags);
  // Whitening exponent: observations are scaled by mu^{-1/2}.
  w.f64(-0.5);
  if (m.is_text()) {
    w.vector(m.mu);
  } else {
    if (m.dense_whitener.rows() != v || m.dense_whitener.cols() != v)
      throw Error("write_model: dense model needs a V x V whitener");
    w.matrix(m.dense_whitener);
  }
  if (m.params.has_null()) w.vector(m.params.null_direction);
  w.matrix(m.params.A);
  w.matrix(m.params.C);
  w.matrix(m.params.noise_core);
  w.u32(static_cast<std::uint32_t>(m.provenance.r));
  w.u64(m.provenance.seed);
  w.u64(m.provenance.corpus_hash);
  w.str(m.provenance.stage);
  if (m.vocab) {
    if (m.vocab->size() != v) throw Error("write_model: vocabulary size does not match V");
    for (const std::string &tok : m.vocab->token_of_id) w.str(tok);
    w.u32(m.vocab->oov_id);
    w.u32(m.vocab->num_id);
  }
  if (m.embedding_cov) w.matrix(*m.embedding_cov);
  if (!out) throw Error("write failed: " + path);
}

Model read_model(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model " + path);
  BinaryReader r(in, path);
  r.expect_magic(kModelMagic);
  if (r.u32() != kModelVersion) throw Error("unsupported model version in " + path);
  const Index v = static_cast<Index>(r.u64());
  const Index h = static_cast<Index>(r.u64());
  const std::uint32_t flags = r.u32();
  if (r.f64() != -0.5) throw Error("unsupported whitening convention in " + path);
  Model m;
  if (flags & kFlagText)
    m.mu = r.vector(v);
  else
    m.dense_whitener = r.matrix(v, v);
  if (flags & kFlagNull) m.params.null_direction = r.vector(v);
  m.params.A = r.matrix(h, h);
  m.params.C = r.matrix(v, h);
  m.params.noise_core = r.matrix(h, h);
  m.provenance.r = static_cast<int>(r.u32());
  m.provenance.seed = r.u64();
  m.provenance.corpus_hash = r.u64();
  m.provenance.stage = r.str();
  if (flags & kFlagVocab) {
    std::vector<std::string> tokens(v);
    for (auto &t : tokens) t = r.str();
    Vocab vocab;
    vocab.token_of_id = std::move(tokens);
    vocab.oov_id = r.u32();
    vocab.num_id = r.u32();
    for (std::uint32_t i = 0; i < vocab.token_of_id.size(); ++i)
      vocab.id_of_token[vocab.token_of_id[i]] = i;
    m.vocab = std::move(vocab);
  }
  if (flags & kFlagEmbeddingCov) m.embedding_cov = r.matrix(h, h);
  m.params.validate(false);
  return m;
}

}  // namespace ldstext
