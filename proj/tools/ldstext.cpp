// ldstext.cpp

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

// Command-line driver.  Run `ldstext --help` or `ldstext <command> --help`.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ldstext/asos_em.hpp"
#include "ldstext/binary_io.hpp"
#include "ldstext/corpus_stats.hpp"
#include "ldstext/inference.hpp"
#include "ldstext/pipeline.hpp"
#include "ldstext/ssid.hpp"
#include "ldstext/steady_state.hpp"
#include "ldstext/synth.hpp"

using namespace ldstext;

namespace {

std::vector<TokenIds> read_encoded(const std::string &path, const Vocab &vocab) {
  FileSentenceStream stream(path);
  std::vector<TokenIds> out;
  Sentence s;
  while (stream.next(s)) out.push_back(vocab.encode(s));
  return out;
}

const Vocab &require_vocab(const Model &m) {
  if (!m.vocab) throw Error("model has no vocabulary table");
  return *m.vocab;
}

void print_ll(const LogLikelihood &ll, double tokens) {
  std::printf("total_ll %.6f\n", ll.total);
  std::printf("per_token_ll %.9f\n", ll.per_token);
  std::printf("tokens %.0f\n", tokens);
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"ldstext: linear dynamical systems for text"};
  // Plain --help only: "-h" would collide with the --h (latent dimension) options.
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option defaults; flags on the command line win");

  // counts
  std::string in_path, out_path;
  std::size_t max_types = 200000;
  int max_lag = 7;
  double pseudo = 0.0;
  bool cross_sentence = false;
  auto *counts = app.add_subcommand("counts", "Count unigrams and lagged pairs of a corpus");
  counts->add_option("--input", in_path, "UTF-8 corpus, one sentence per line")->required();
  counts->add_option("--max-types", max_types, "Vocabulary size before OOV/NUM")->capture_default_str();
  counts->add_option("--max-lag", max_lag, "Largest lag K to count")->capture_default_str();
  counts->add_option("--pseudo", pseudo, "Pseudocount added to every type")->capture_default_str();
  counts->add_flag("--cross-sentence", cross_sentence, "Count pairs across sentence breaks");
  counts->add_option("--out", out_path, "Counts file")->required();

  // train-ssid
  std::string counts_path;
  Index h = 200;
  int r = 4;
  std::uint64_t seed = 0;
  bool first_block = false, raw_basis = false, no_psd = false;
  auto *train_ssid = app.add_subcommand("train-ssid", "Subspace identification from counts");
  train_ssid->add_option("--counts", counts_path, "Counts file")->required();
  train_ssid->add_option("--h", h, "Latent dimension")->capture_default_str();
  train_ssid->add_option("--r", r, "Hankel horizon")->capture_default_str();
  train_ssid->add_option("--seed", seed, "Random seed")->capture_default_str();
  train_ssid->add_flag("--first-block", first_block, "Read C from the first block of Gamma");
  train_ssid->add_flag("--raw-basis", raw_basis, "Skip the state-noise basis normalization");
  train_ssid->add_flag("--no-psd-correct", no_psd, "Skip the PSD correction of D");
  train_ssid->add_option("--out", out_path, "Model file")->required();

  // train-em
  std::string init_path, mode = "asos", trace_path, corpus_path;
  int iters = 50;
  double ll_tol = 1e-6;
  int r_em = 7;
  auto *train_em = app.add_subcommand("train-em", "EM refinement of a model");
  train_em->add_option("--counts", counts_path, "Counts file")->required();
  train_em->add_option("--init", init_path, "Initial model")->required();
  train_em->add_option("--mode", mode, "asos or exact")->check(CLI::IsMember({"asos", "exact"}))->capture_default_str();
  train_em->add_option("--iters", iters, "Maximum iterations")->capture_default_str();
  train_em->add_option("--r", r_em, "ASOS horizon")->capture_default_str();
  train_em->add_option("--ll-tol", ll_tol, "Relative LL improvement to stop at (<= 0 disables)")->capture_default_str();
  train_em->add_option("--corpus", corpus_path, "Corpus (required for exact mode)");
  train_em->add_option("--seed", seed, "Random seed")->capture_default_str();
  train_em->add_option("--out", out_path, "Model file")->required();
  train_em->add_option("--trace", trace_path, "Line-delimited JSON trace");

  // eval-ll
  std::string model_path;
  auto *eval_ll = app.add_subcommand("eval-ll", "Steady-state log-likelihood");
  eval_ll->add_option("--model", model_path, "Model file")->required();
  eval_ll->add_option("--counts", counts_path, "Counts file (moment-based evaluation)")->required();
  eval_ll->add_option("--corpus", corpus_path, "Corpus (token-driven evaluation)");
  eval_ll->add_option("--r", r_em, "Horizon for the moment-based evaluation")->capture_default_str();

  // embed
  std::string embed_mode = "normalized";
  bool binary = false;
  auto *embed = app.add_subcommand("embed", "Per-token embeddings");
  embed->add_option("--model", model_path, "Model file")->required();
  embed->add_option("--corpus", corpus_path, "Corpus")->required();
  embed->add_option("--out", out_path, "Output file")->required();
  embed->add_option("--mode", embed_mode, "filtered, smoothed or normalized")
      ->check(CLI::IsMember({"filtered", "smoothed", "normalized"}))
      ->capture_default_str();
  embed->add_flag("--binary", binary, "Binary output (LDSEMB01)");

  // export-rnn
  auto *export_rnn = app.add_subcommand("export-rnn", "Export linear-RNN initialization");
  export_rnn->add_option("--model", model_path, "Model file")->required();
  export_rnn->add_option("--out", out_path, "Output file")->required();

  // analyze-transitions
  std::size_t top = 10;
  bool whitened = false;
  auto *analyze = app.add_subcommand("analyze-transitions", "Singular vector pairs of A");
  analyze->add_option("--model", model_path, "Model file")->required();
  analyze->add_option("--top", top, "Words per direction")->capture_default_str();
  analyze->add_flag("--whitened", whitened, "Score words with the whitened emission");

  // synth
  Index states = 4, vdim = 10, length = 1000, sentence_length = 20, sequences = 1;
  double rho = 0.9, noise = 1.0;
  auto *synth = app.add_subcommand("synth", "Synthetic data");
  synth->require_subcommand(1);
  auto *synth_lds = synth->add_subcommand("lds", "Gaussian LDS sequences (whitespace floats)");
  synth_lds->add_option("--h", h, "Latent dimension")->capture_default_str();
  synth_lds->add_option("--V", vdim, "Observation dimension")->capture_default_str();
  synth_lds->add_option("--T", length, "Observations per sequence")->capture_default_str();
  synth_lds->add_option("--sequences", sequences, "Number of sequences")->capture_default_str();
  synth_lds->add_option("--rho", rho, "Spectral radius of A")->capture_default_str();
  synth_lds->add_option("--noise", noise, "Observation noise scale")->capture_default_str();
  synth_lds->add_option("--seed", seed, "Random seed")->capture_default_str();
  synth_lds->add_option("--out", out_path, "Output file")->required();
  auto *synth_hmm = synth->add_subcommand("hmm", "Token text from a random HMM");
  synth_hmm->add_option("--states", states, "Hidden states")->capture_default_str();
  synth_hmm->add_option("--V", vdim, "Vocabulary size")->capture_default_str();
  synth_hmm->add_option("--T", length, "Total tokens")->capture_default_str();
  synth_hmm->add_option("--sentence-length", sentence_length, "Tokens per sentence")->capture_default_str();
  synth_hmm->add_option("--seed", seed, "Random seed")->capture_default_str();
  synth_hmm->add_option("--out", out_path, "Output corpus")->required();

  // pipeline
  std::string profile = "default", out_dir = ".";
  PipelineConfig pc;
  auto *pipeline = app.add_subcommand("pipeline", "counts -> SSID -> EM -> steady state");
  pipeline->add_option("--corpus", pc.corpus, "Corpus")->required();
  pipeline->add_option("--out-dir", out_dir, "Directory for all artifacts")->capture_default_str();
  pipeline->add_option("--profile", profile, "default or test")
      ->check(CLI::IsMember({"default", "test"}))
      ->capture_default_str();
  auto *o_types = pipeline->add_option("--max-types", pc.max_types, "Vocabulary size");
  auto *o_lag = pipeline->add_option("--max-lag", pc.max_lag, "Largest lag (0 = automatic)");
  auto *o_pseudo = pipeline->add_option("--pseudo", pc.pseudo, "Pseudocount");
  auto *o_h = pipeline->add_option("--h", pc.h, "Latent dimension");
  auto *o_rs = pipeline->add_option("--r-ssid", pc.r_ssid, "SSID horizon");
  auto *o_re = pipeline->add_option("--r-em", pc.r_em, "ASOS horizon");
  auto *o_it = pipeline->add_option("--em-iters", pc.em_iters, "EM iterations");
  std::string pmode;
  auto *o_mode = pipeline->add_option("--em-mode", pmode, "asos or exact")
                     ->check(CLI::IsMember({"asos", "exact"}));
  auto *o_tol = pipeline->add_option("--ll-tol", pc.ll_tol, "EM stopping tolerance");
  auto *o_seed = pipeline->add_option("--seed", pc.seed, "Random seed");
  auto *o_cross = pipeline->add_flag("--cross-sentence", pc.cross_sentence, "Count across sentences");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*counts) {
      FileSentenceStream stream(in_path);
      const Vocab vocab = build_vocab(stream, max_types);
      CountOptions opt;
      opt.max_lag = max_lag;
      opt.cross_sentence = cross_sentence;
      const CooccurrenceStats stats =
          apply_pseudocounts(accumulate_counts(stream, vocab, opt), pseudo);
      write_counts(out_path, stats, vocab);
      std::printf("V %lld T %llu max_lag %d\n", static_cast<long long>(stats.vocab_size),
                  static_cast<unsigned long long>(stats.total_tokens), stats.max_lag);
    } else if (*train_ssid) {
      const CountsFile cf = read_counts(counts_path);
      SsidOptions opt;
      opt.h = h;
      opt.r = r;
      opt.seed = seed;
      opt.regress_emission = !first_block;
      opt.normalize_noise_basis = !raw_basis;
      opt.psd_correct = !no_psd;
      const SsidResult res = ssid(whiten_stats(cf.stats), opt);
      Model m;
      m.params = res.params;
      m.mu = cf.stats.mu;
      m.vocab = cf.vocab;
      m.provenance = {r, seed, hash_file(counts_path), "ssid"};
      write_model(out_path, m);
      std::printf("alpha0 %.9g s0 %.9g\n", res.correction.alpha0, res.correction.s0);
    } else if (*train_em) {
      const CountsFile cf = read_counts(counts_path);
      Model m = read_model(init_path);
      if (!m.is_text()) throw Error("train-em needs a text model");
      EmOptions opt;
      opt.mode = parse_em_mode(mode);
      opt.max_iters = iters;
      opt.ll_tol = ll_tol;
      opt.r = r_em;
      opt.seed = seed;
      const LagCovarianceSet lags = whiten_stats(cf.stats);
      EmResult res;
      if (opt.mode == EmMode::kExact) {
        if (corpus_path.empty()) throw Error("exact mode needs --corpus");
        const WhitenedCorpus corpus =
            WhitenedCorpus::text(cf.stats.mu, read_encoded(corpus_path, require_vocab(m)));
        res = em_run(m.params, nullptr, &corpus, opt);
      } else {
        res = em_run(m.params, &lags, nullptr, opt);
      }
      if (!trace_path.empty()) write_trace(trace_path, res.trace);
      m.params = res.params;
      m.provenance.r = r_em;
      m.provenance.stage = "em-" + mode;
      const SteadyState ss = compute_steady_state(m.params, m.mu);
      m.embedding_cov = asos_estep(m.params, ss, lags, std::min(r_em, lags.max_lag())).moments.Exx;
      write_model(out_path, m);
      std::printf("best_iter %d ll %.6f\n", res.best_iter,
                  res.trace.iterations[res.best_iter].ll);
      if (!res.trace.error.empty()) throw Error("EM aborted: " + res.trace.error);
    } else if (*eval_ll) {
      const Model m = read_model(model_path);
      const CountsFile cf = read_counts(counts_path);
      if (!m.is_text()) throw Error("eval-ll needs a text model");
      const SteadyState ss = compute_steady_state(m.params, m.mu);
      FilteredMoments fm;
      if (!corpus_path.empty()) {
        const std::vector<TokenIds> ids = read_encoded(corpus_path, require_vocab(m));
        fm = text_filtered_moments(m.params, ss, m.mu, ids);
      } else {
        const LagCovarianceSet lags = whiten_stats(cf.stats);
        fm = asos_estep(m.params, ss, lags, std::min(r_em, lags.max_lag())).filtered;
      }
      print_ll(steady_log_likelihood(m.params, ss, fm), fm.count);
    } else if (*embed) {
      const Model m = read_model(model_path);
      const Vocab &vocab = require_vocab(m);
      const SteadyState ss = compute_steady_state(m.params, m.mu);
      const EmbeddingContext ctx = EmbeddingContext::from_covariance(
          m.embedding_cov ? *m.embedding_cov : Matrix::Identity(m.params.h(), m.params.h()));
      if (!m.embedding_cov && embed_mode == "normalized")
        log_event("warn", "embed_no_covariance", "model has no embedding covariance; using M = I");
      const std::vector<TokenIds> ids = read_encoded(corpus_path, vocab);
      const auto seqs = embed_corpus(ss, m.params, ctx, ids, vocab.oov_id);
      std::ofstream out(out_path, binary ? std::ios::binary : std::ios::out);
      if (!out) throw Error("cannot write " + out_path);
      if (binary) {
        BinaryWriter w(out);
        w.magic("LDSEMB01");
        w.u64(static_cast<std::uint64_t>(m.params.h()));
        w.u64(seqs.size());
        for (const auto &s : seqs) {
          const Matrix &x = embed_mode == "filtered" ? s.filtered
                            : embed_mode == "smoothed" ? s.smoothed
                                                       : s.normalized;
          w.u64(s.token_ids.size());
          for (std::uint32_t id : s.token_ids) w.u32(id);
          w.matrix(x);
        }
      } else {
        out << std::setprecision(9);
        for (std::size_t i = 0; i < seqs.size(); ++i) {
          const auto &s = seqs[i];
          const Matrix &x = embed_mode == "filtered" ? s.filtered
                            : embed_mode == "smoothed" ? s.smoothed
                                                       : s.normalized;
          for (Index t = 0; t < x.rows(); ++t) {
            out << vocab.token_of_id[s.token_ids[t]] << ' ' << i << ' ' << t;
            for (Index k = 0; k < x.cols(); ++k) out << ' ' << x(t, k);
            out << '\n';
          }
        }
      }
    } else if (*export_rnn) {
      const Model m = read_model(model_path);
      const SteadyState ss = compute_steady_state(m.params, m.mu);
      write_rnn_init(out_path, export_rnn_init(m, ss));
    } else if (*analyze) {
      const Model m = read_model(model_path);
      const Matrix emission = whitened ? m.params.C : m.unwhitened_emission();
      const auto pairs = transition_singular_pairs(m.params.A, emission, top);
      auto name = [&](std::uint32_t id) {
        return m.vocab ? m.vocab->token_of_id[id] : std::to_string(id);
      };
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        std::printf("pair %zu sigma %.6f\n  right:", i, pairs[i].sigma);
        for (auto id : pairs[i].right_words) std::printf(" %s", name(id).c_str());
        std::printf("\n  left:");
        for (auto id : pairs[i].left_words) std::printf(" %s", name(id).c_str());
        std::printf("\n");
      }
    } else if (*synth_lds) {
      const GroundTruthSystem sys = random_stable_system(h, vdim, rho, noise, seed);
      write_dense_sequences(out_path, sample_lds_sequences(sys, sequences, length, seed + 1));
    } else if (*synth_hmm) {
      const HmmText hmm = sample_hmm_text(states, vdim, length, seed, sentence_length);
      write_token_corpus(out_path, hmm.sentences);
    } else if (*pipeline) {
      PipelineConfig cfg = PipelineConfig::profile(profile);
      // Explicit flags override the profile.
      cfg.corpus = pc.corpus;
      cfg.out_dir = out_dir;
      if (o_types->count()) cfg.max_types = pc.max_types;
      if (o_lag->count()) cfg.max_lag = pc.max_lag;
      if (o_pseudo->count()) cfg.pseudo = pc.pseudo;
      if (o_h->count()) cfg.h = pc.h;
      if (o_rs->count()) cfg.r_ssid = pc.r_ssid;
      if (o_re->count()) cfg.r_em = pc.r_em;
      if (o_it->count()) cfg.em_iters = pc.em_iters;
      if (o_mode->count()) cfg.em_mode = parse_em_mode(pmode);
      if (o_tol->count()) cfg.ll_tol = pc.ll_tol;
      if (o_seed->count()) cfg.seed = pc.seed;
      if (o_cross->count()) cfg.cross_sentence = pc.cross_sentence;
      const PipelineResult res = run_pipeline(cfg);
      std::printf("model %s\ntrace %s\n", res.model_path.c_str(), res.trace_path.c_str());
    }
  } catch (const std::exception &e) {
    log_event("error", "command_failed", e.what());
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
