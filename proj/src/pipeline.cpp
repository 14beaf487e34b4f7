// pipeline.cpp

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

#include "ldstext/pipeline.hpp"

#include <filesystem>
#include <functional>
#include <sstream>

#include "ldstext/binary_io.hpp"
#include "ldstext/corpus_stats.hpp"
#include "ldstext/ssid.hpp"
#include "ldstext/steady_state.hpp"

namespace ldstext {

namespace {

template <typename Fn>
auto run_stage(const std::string &stage, Fn &&fn) {
  log_event("info", "stage_start", stage);
  try {
    auto out = fn();
    log_event("info", "stage_done", stage);
    return out;
  } catch (const std::exception &e) {
    throw Error("stage " + stage + ": " + e.what());
  }
}

}  // namespace

PipelineConfig PipelineConfig::profile(const std::string &name) {
  PipelineConfig c;
  if (name == "default" || name.empty()) return c;
  if (name == "test") {
    c.h = 5;
    c.r_ssid = 3;
    c.r_em = 3;
    c.em_iters = 10;
    c.max_types = 1000;
    c.pseudo = 1.0;
    return c;
  }
  throw Error("unknown profile '" + name + "' (expected default or test)");
}

int PipelineConfig::effective_max_lag() const {
  return max_lag > 0 ? max_lag : std::max(2 * r_ssid - 1, r_em);
}

void PipelineConfig::validate() const {
  if (h < 1) throw Error("config: h must be >= 1");
  if (r_ssid < 2) throw Error("config: r_ssid must be >= 2");
  if (r_em < 1) throw Error("config: r_em must be >= 1");
  if (em_iters < 0) throw Error("config: em_iters must be >= 0");
  if (max_types < 2) throw Error("config: max_types must be >= 2");
  if (pseudo < 0.0) throw Error("config: pseudo must be >= 0");
  const int k = effective_max_lag();
  if (k < 2 * r_ssid - 1)
    throw Error("config: max_lag " + std::to_string(k) + " < 2 * r_ssid - 1 = " +
                std::to_string(2 * r_ssid - 1));
  if (em_mode == EmMode::kAsos && k < r_em)
    throw Error("config: max_lag " + std::to_string(k) + " < r_em " + std::to_string(r_em));
  if (corpus.empty()) throw Error("config: corpus path is required");
}

PipelineResult run_pipeline(const PipelineConfig &cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  PipelineResult res;
  res.counts_path = (fs::path(cfg.out_dir) / "counts.bin").string();
  res.ssid_model_path = (fs::path(cfg.out_dir) / "model_ssid.bin").string();
  res.model_path = (fs::path(cfg.out_dir) / "model.bin").string();
  res.trace_path = (fs::path(cfg.out_dir) / "trace.jsonl").string();

  const std::uint64_t corpus_hash = hash_file(cfg.corpus);
  FileSentenceStream stream(cfg.corpus);

  struct Counted {
    Vocab vocab;
    CooccurrenceStats stats;
  };
  Counted counted = run_stage("counts", [&] {
    Counted c;
    c.vocab = build_vocab(stream, cfg.max_types);
    CountOptions opt;
    opt.max_lag = cfg.effective_max_lag();
    opt.cross_sentence = cfg.cross_sentence;
    c.stats = apply_pseudocounts(accumulate_counts(stream, c.vocab, opt), cfg.pseudo);
    write_counts(res.counts_path, c.stats, c.vocab);
    return c;
  });

  const LagCovarianceSet lags = run_stage("whiten", [&] { return whiten_stats(counted.stats); });

  Model base;
  base.mu = counted.stats.mu;
  base.vocab = counted.vocab;
  base.provenance.seed = cfg.seed;
  base.provenance.corpus_hash = corpus_hash;

  const LdsParams init = run_stage("ssid", [&] {
    SsidOptions opt;
    opt.h = cfg.h;
    opt.r = cfg.r_ssid;
    opt.seed = cfg.seed;
    SsidResult r = ssid(lags, opt);
    Model m = base;
    m.params = r.params;
    m.provenance.r = cfg.r_ssid;
    m.provenance.stage = "ssid";
    write_model(res.ssid_model_path, m);
    return r.params;
  });

  EmResult em = run_stage("em", [&] {
    EmOptions opt;
    opt.mode = cfg.em_mode;
    opt.max_iters = cfg.em_iters;
    opt.ll_tol = cfg.ll_tol;
    opt.r = cfg.r_em;
    opt.seed = cfg.seed;
    if (cfg.em_mode == EmMode::kExact) {
      std::vector<TokenIds> encoded;
      Sentence s;
      stream.rewind();
      while (stream.next(s)) encoded.push_back(counted.vocab.encode(s));
      const WhitenedCorpus corpus = WhitenedCorpus::text(counted.stats.mu, std::move(encoded));
      return em_run(init, nullptr, &corpus, opt);
    }
    return em_run(init, &lags, nullptr, opt);
  });
  res.trace = em.trace;
  write_trace(res.trace_path, em.trace);
  if (!em.trace.error.empty()) throw Error("stage em: " + em.trace.error);

  res.model = run_stage("steady_state", [&] {
    Model m = base;
    m.params = em.params;
    m.provenance.r = cfg.r_em;
    m.provenance.stage = "em-" + to_string(cfg.em_mode);
    const SteadyState ss = compute_steady_state(m.params, m.mu);
    const int r = std::min(cfg.r_em, lags.max_lag());
    m.embedding_cov = asos_estep(m.params, ss, lags, r).moments.Exx;
    write_model(res.model_path, m);
    return m;
  });
  return res;
}

}  // namespace ldstext
