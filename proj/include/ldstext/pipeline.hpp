// pipeline.hpp

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

#ifndef LDSTEXT_PIPELINE_HPP_
#define LDSTEXT_PIPELINE_HPP_

#include <string>

#include "ldstext/asos_em.hpp"
#include "ldstext/lds_params.hpp"

namespace ldstext {

struct PipelineConfig {
  std::string corpus;
  std::string out_dir = ".";
  std::size_t max_types = 200000;
  int max_lag = 0;  // 0: max(2 r_ssid - 1, r_em)
  double pseudo = 1000.0;
  Index h = 200;
  int r_ssid = 4;
  int r_em = 7;
  int em_iters = 50;
  EmMode em_mode = EmMode::kAsos;
  double ll_tol = 1e-6;
  std::uint64_t seed = 0;
  bool cross_sentence = false;

  // "default" keeps the values above; "test" is a tiny preset (r = 3, h = 5).
  static PipelineConfig profile(const std::string &name);
  int effective_max_lag() const;
  void validate() const;
};

struct PipelineResult {
  Model model;
  EmTrace trace;
  std::string counts_path;
  std::string ssid_model_path;
  std::string model_path;
  std::string trace_path;
};

// counts -> whiten -> SSID -> EM -> steady state.  Every artifact is written
// under out_dir; a failure names the stage and leaves earlier artifacts.
PipelineResult run_pipeline(const PipelineConfig &cfg);

}  // namespace ldstext

#endif  // LDSTEXT_PIPELINE_HPP_
