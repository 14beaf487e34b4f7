// asos_em.cpp

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

#include "ldstext/asos_em.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ldstext/ssid.hpp"
#include "ldstext/structured_linalg.hpp"

namespace ldstext {

namespace {

constexpr int kChunks = 64;

struct Partial {
  Matrix exx, exx1, head, exw_cols;  // exw_cols: h x V sums of xbar per column (text) or xbar y^T
  Vector total_x;
  double count = 0.0, pairs = 0.0, ll = 0.0;
};

Matrix matrix_power(const Matrix &a, int k) {
  Matrix out = Matrix::Identity(a.rows(), a.cols());
  for (int i = 0; i < k; ++i) out = a * out;
  return out;
}

}  // namespace

std::string to_string(EmMode mode) { return mode == EmMode::kAsos ? "asos" : "exact"; }

EmMode parse_em_mode(const std::string &s) {
  if (s == "asos") return EmMode::kAsos;
  if (s == "exact") return EmMode::kExact;
  throw Error("unknown EM mode '" + s + "' (expected asos or exact)");
}

SecondOrderStats exact_estep(const LdsParams &p, const WhitenedCorpus &corpus, double *loglik) {
  const Index h = p.h();
  const Index v = p.dim();
  if (corpus.total_length() == 0) throw Error("no data");
  if (corpus.dim() != v) throw Error("exact_estep: corpus dimension does not match the model");
  const long nseq = static_cast<long>(corpus.num_sequences());
  std::vector<Partial> parts(kChunks);
  std::vector<std::exception_ptr> errors(kChunks);
#pragma omp parallel for schedule(dynamic, 1)
  for (int c = 0; c < kChunks; ++c) {
    Partial &pt = parts[c];
    pt.exx = Matrix::Zero(h, h);
    pt.exx1 = Matrix::Zero(h, h);
    pt.head = Matrix::Zero(h, h);
    pt.exw_cols = Matrix::Zero(h, v);
    pt.total_x = Vector::Zero(h);
    const long lo = nseq * c / kChunks;
    const long hi = nseq * (c + 1) / kChunks;
    try {
      for (long i = lo; i < hi; ++i) {
        const ExactPosterior post = exact_filter_smooth(p, corpus, static_cast<std::size_t>(i));
        const Index n = post.smoothed.rows();
        pt.ll += post.loglik;
        for (Index t = 0; t < n; ++t) {
          const Vector xs = post.smoothed.row(t).transpose();
          const Matrix second = xs * xs.transpose() + post.smoothed_cov[t];
          pt.exx += second;
          if (t + 1 < n) {
            pt.head += second;
            pt.exx1.noalias() += xs * post.smoothed.row(t + 1) + post.cross_cov[t];
          }
          if (corpus.is_text()) {
            pt.exw_cols.col(corpus.sentences[i][t]) += xs;
            pt.total_x += xs;
          }
        }
        if (!corpus.is_text()) pt.exw_cols.noalias() += post.smoothed.transpose() * corpus.dense[i];
        pt.count += static_cast<double>(n);
        pt.pairs += static_cast<double>(std::max<Index>(n - 1, 0));
      }
    } catch (...) {
      errors[c] = std::current_exception();
    }
  }
  for (auto &e : errors)
    if (e) std::rethrow_exception(e);

  SecondOrderStats m;
  m.Exx = Matrix::Zero(h, h);
  m.Exx1 = Matrix::Zero(h, h);
  m.Exx_head = Matrix::Zero(h, h);
  Matrix exw = Matrix::Zero(h, v);
  Vector total_x = Vector::Zero(h);
  double ll = 0.0;
  for (const Partial &pt : parts) {
    m.Exx += pt.exx;
    m.Exx1 += pt.exx1;
    m.Exx_head += pt.head;
    exw += pt.exw_cols;
    total_x += pt.total_x;
    m.count += pt.count;
    m.pair_count += pt.pairs;
    ll += pt.ll;
  }
  if (corpus.is_text()) {
    // y_t = W e_{i_t} - s
    exw = exw * corpus.whitener.asDiagonal();
    exw.noalias() -= total_x * corpus.null_direction.transpose();
  }
  m.Exx = dense::symmetrize(m.Exx / m.count);
  m.Exw = exw / m.count;
  if (m.pair_count > 0.0) {
    m.Exx1 /= m.pair_count;
    m.Exx_head = dense::symmetrize(m.Exx_head / m.pair_count);
  }
  if (loglik) *loglik = ll;
  return m;
}

AsosResult asos_estep(const LdsParams &p, const SteadyState &ss, const LagCovarianceSet &lags,
                      int r) {
  if (r < 1) throw Error("asos_estep: horizon r must be >= 1");
  if (lags.max_lag() < r) {
    std::ostringstream msg;
    msg << "asos_estep: need lags up to " << r << ", have " << lags.max_lag();
    throw Error(msg.str());
  }
  if (lags.dim() != p.dim()) throw Error("asos_estep: lag dimension does not match the model");
  const Index h = p.h();
  const Matrix eye = Matrix::Identity(h, h);
  const Matrix &a = p.A;
  const Matrix &c = p.C;
  const Matrix &f = ss.F;
  const Matrix &j = ss.J;
  const Matrix &kc = ss.Kcore;
  const Matrix l = eye - j * a;
  const Matrix &sig_u = ss.Sigma_unc;
  const Matrix xx_model = sig_u - ss.Sigma0;  // model E[xhat xhat^T]
  const Matrix gram = ss.gram;

  // Psi_n C and Psi_n^T C for n = 0..r (V x h each).
  std::vector<Matrix> psi_c(r + 1), psit_c(r + 1);
  for (int n = 0; n <= r; ++n) {
    psi_c[n] = lags.at(n).apply(c);
    psit_c[n] = lags.at(n).apply_transpose(c);
  }

  // Pc[j + r] = E[xhat_t y_{t+j}^T] C for j = -r..r.
  //   P_j = F P_{j+1} + K Psi_j^T (j >= 0),   P_{-n} = F P_{-n+1} + K Psi_n.
  std::vector<Matrix> pc(2 * r + 1);
  const Matrix a_pow_r = matrix_power(a, r);
  pc[2 * r] = xx_model * a_pow_r.transpose() * gram;
  for (int jj = r - 1; jj >= 0; --jj)
    pc[jj + r] = f * pc[jj + 1 + r] + kc * (psi_c[jj].transpose() * c);
  for (int n = 1; n <= r; ++n) pc[r - n] = f * pc[r - n + 1] + kc * (psit_c[n].transpose() * c);

  // Qc[j + r] = E[xbar_t y_{t+j}^T] C, Q_j = J Q_{j-1} + L P_j from the closure at -r.
  std::vector<Matrix> qc(2 * r);
  qc[0] = a_pow_r * sig_u * gram;
  for (int jj = -r + 1; jj <= r - 1; ++jj) qc[jj + r] = j * qc[jj - 1 + r] + l * pc[jj + r];

  // Y_j = E[xbar_t xhat_{t+j}^T] = Y_{j-1} F^T + Q_j C Kcore^T.
  std::vector<Matrix> y(2 * r);
  y[0] = a_pow_r * xx_model;
  for (int jj = -r + 1; jj <= r - 1; ++jj)
    y[jj + r] = y[jj - 1 + r] * f.transpose() + qc[jj + r] * kc.transpose();

  // Z_j = E[xbar_t xbar_{t+j}^T] = Z_{j+1} J^T + Y_j L^T, closed at j = r.
  const Matrix j_pow_r = matrix_power(j, r);
  Matrix z_next = sig_u * a_pow_r.transpose() - j_pow_r * ss.smoothed_cov;
  Matrix z1 = z_next;
  for (int jj = r - 1; jj >= 0; --jj) {
    Matrix z = z_next * j.transpose() + y[jj + r] * l.transpose();
    if (jj == 1) z1 = z;
    z_next = std::move(z);
  }
  const Matrix &z0 = z_next;

  AsosResult res;
  SecondOrderStats &m = res.moments;
  m.Exx = dense::symmetrize(z0 + ss.smoothed_cov);
  m.Exx1 = z1 + j * ss.smoothed_cov;
  m.Exx_head = m.Exx;

  // Exw = Q_0 = sum_{i<r} J^i L P_{-i} + J^r Q_{-r}, streamed as h x V blocks.
  Matrix p_full = xx_model * a_pow_r.transpose() * c.transpose();  // P_r
  for (int jj = r - 1; jj >= 0; --jj) p_full = f * p_full + kc * psi_c[jj].transpose();
  Matrix exw = j_pow_r * a_pow_r * sig_u * c.transpose();
  Matrix j_pow = eye;
  for (int i = 0; i < r; ++i) {
    if (i > 0) p_full = f * p_full + kc * psit_c[i].transpose();  // P_{-i}
    exw.noalias() += j_pow * l * p_full;
    j_pow = j * j_pow;
  }
  m.Exw = std::move(exw);
  const double tokens = static_cast<double>(lags.total_tokens);
  m.count = tokens > 0.0 ? tokens : 1.0;
  m.pair_count = m.count;

  // Filtered moments for the likelihood: E[xhat xhat^T] solves a Stein equation.
  FilteredMoments &fm = res.filtered;
  fm.count = m.count;
  fm.cty_cty = dense::symmetrize(c.transpose() * psi_c[0]);
  fm.x_cty = pc[r + 1];
  const Matrix cross = f * fm.x_cty * kc.transpose();
  fm.xx = dense::symmetrize(dense::solve_stein(
      f, cross + cross.transpose() + kc * fm.cty_cty * kc.transpose()));
  const LagCovariance &psi0 = lags.at(0);
  double yy = psi0.trace();
  if (p.has_null()) {
    const Matrix s = p.null_direction;
    yy -= s.col(0).dot(psi0.apply(s).col(0));
  }
  fm.yy_perp = yy;
  return res;
}

LdsParams mstep(const SecondOrderStats &m, const Vector &null_direction, const MstepOptions &opt) {
  const Index h = m.Exx.rows();
  if (h < 1 || !m.Exx.allFinite() || !m.Exx1.allFinite() || !m.Exw.allFinite())
    throw Error("mstep: non-finite moments");
  const double reg = 1e-10 * std::max(m.Exx.trace(), 0.0) / static_cast<double>(h);
  const Matrix eye = Matrix::Identity(h, h);
  Eigen::LLT<Matrix> exx(dense::symmetrize(m.Exx) + reg * eye);
  Eigen::LLT<Matrix> head(dense::symmetrize(m.Exx_head) + reg * eye);
  if (exx.info() != Eigen::Success || head.info() != Eigen::Success)
    throw Error("mstep: singular Exx after regularization");
  LdsParams p;
  p.A = stabilize(head.solve(m.Exx1).transpose());
  p.C = exx.solve(m.Exw).transpose();
  // With C = Exw^T (Exx + reg I)^{-1} the residual covariance is
  // Psi_0 - C (Exx + 2 reg I) C^T.
  p.noise_core = dense::symmetrize(m.Exx) + 2.0 * reg * eye;
  p.null_direction = null_direction;
  p.project_emission();
  if (opt.psd_correct) p.noise_core = psd_correct_D(p.C, p.noise_core, opt.seed).core;
  return p;
}

EmResult em_run(const LdsParams &init, const LagCovarianceSet *lags, const WhitenedCorpus *corpus,
                const EmOptions &opt) {
  if (opt.mode == EmMode::kAsos && !lags) throw Error("em_run: asos mode needs lag statistics");
  if (opt.mode == EmMode::kExact && !corpus) throw Error("em_run: exact mode needs a corpus");
  if (opt.max_iters < 0) throw Error("em_run: max_iters must be >= 0");
  init.validate(true);

  using Clock = std::chrono::steady_clock;
  struct Evaluated {
    SecondOrderStats stats;
    double ll = 0.0;
  };
  auto evaluate = [&](const LdsParams &p) {
    Evaluated ev;
    if (opt.mode == EmMode::kExact) {
      ev.stats = exact_estep(p, *corpus, &ev.ll);
    } else {
      const SteadyState ss = compute_steady_state(p);
      AsosResult ar = asos_estep(p, ss, *lags, opt.r);
      ev.ll = steady_log_likelihood(p, ss, ar.filtered).total;
      ev.stats = std::move(ar.moments);
    }
    if (!std::isfinite(ev.ll)) throw Error("log-likelihood is not finite");
    return ev;
  };

  EmResult res;
  res.params = init;
  auto t0 = Clock::now();
  Evaluated cur = evaluate(init);
  auto snapshot = std::make_shared<const LdsParams>(init);
  res.trace.iterations.push_back(
      {0, cur.ll, std::chrono::duration<double>(Clock::now() - t0).count(), opt.mode, snapshot});
  double best_ll = cur.ll;
  const Vector null_dir = init.null_direction;
  MstepOptions mopt;
  mopt.psd_correct = opt.mode == EmMode::kAsos;
  mopt.seed = opt.seed;

  for (int it = 1; it <= opt.max_iters; ++it) {
    const auto start = Clock::now();
    LdsParams next;
    Evaluated ev;
    try {
      next = mstep(cur.stats, null_dir, mopt);
      ev = evaluate(next);
    } catch (const Error &e) {
      res.trace.error = e.what();
      log_event("error", "em_aborted", "iteration " + std::to_string(it) + ": " + e.what());
      break;
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    auto snap = std::make_shared<const LdsParams>(next);
    res.trace.iterations.push_back({it, ev.ll, secs, opt.mode, snap});
    std::ostringstream detail;
    detail.precision(17);
    detail << "iter=" << it << " ll=" << ev.ll << " mode=" << to_string(opt.mode);
    log_event("info", "em_iteration", detail.str());
    if (ev.ll > best_ll) {
      best_ll = ev.ll;
      res.params = next;
      res.best_iter = it;
    }
    const double gain = (ev.ll - cur.ll) / std::max(std::abs(cur.ll), 1e-300);
    cur = std::move(ev);
    if (opt.ll_tol > 0.0 && gain < opt.ll_tol) break;
  }
  return res;
}

void write_trace(const std::string &path, const EmTrace &trace) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (const EmIteration &it : trace.iterations) {
    nlohmann::json rec = {{"iter", it.iter},
                          {"ll", it.ll},
                          {"seconds", it.seconds},
                          {"mode", to_string(it.mode)}};
    out << rec.dump() << '\n';
  }
  if (!trace.error.empty()) out << nlohmann::json{{"error", trace.error}}.dump() << '\n';
}

}  // namespace ldstext
