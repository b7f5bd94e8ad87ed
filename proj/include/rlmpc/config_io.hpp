// Copyright 2026 The rlmpc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Experiment configuration as a flat JSON object. Every key is optional
// and falls back to the built-in default; unknown keys are rejected.

#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "rlmpc/experiment.hpp"

namespace rlmpc {

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: not a JSON object");

  static const std::set<std::string> known = {
      "method",        "steps",
      "seed",          "init_model",
      "alpha",         "beta",
      "lambda_q",      "lambda_f",
      "horizon",       "gamma",
      "omega",         "window",
      "update_period", "warmup",
      "exploration_amplitude",
      "svp_mode",      "svp_threshold",
      "svp_p",         "rank_tol",
      "hier_swap_reg", "b_true_convention",
  };
  for (const auto& item : j.items()) {
    if (!known.count(item.key()))
      throw std::invalid_argument("config: unknown key '" + item.key() + "'");
  }

  ExperimentConfig c;
  if (j.contains("method")) c.method = method_from_name(j.at("method"));
  if (j.contains("steps")) c.steps = j.at("steps").get<int>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("init_model"))
    c.init_model = init_model_from_name(j.at("init_model"));
  if (j.contains("alpha")) c.hyper.alpha = j.at("alpha").get<double>();
  if (j.contains("beta")) c.hyper.beta = j.at("beta").get<double>();
  if (j.contains("lambda_q")) c.hyper.lambda_q = j.at("lambda_q").get<double>();
  if (j.contains("lambda_f")) c.hyper.lambda_f = j.at("lambda_f").get<double>();
  if (j.contains("horizon")) c.horizon = j.at("horizon").get<int>();
  if (j.contains("gamma")) c.gamma = j.at("gamma").get<double>();
  if (j.contains("omega")) {
    const auto& o = j.at("omega");
    if (!o.is_array() || o.size() != 2)
      throw std::invalid_argument("config: omega must be a 2-element array");
    c.omega = Eigen::Vector2d(o[0].get<double>(), o[1].get<double>());
  }
  if (j.contains("window")) c.window = j.at("window").get<int>();
  if (j.contains("update_period"))
    c.update_period = j.at("update_period").get<int>();
  if (j.contains("warmup")) c.warmup = j.at("warmup").get<int>();
  if (j.contains("exploration_amplitude"))
    c.exploration_amplitude = j.at("exploration_amplitude").get<double>();
  if (j.contains("svp_mode")) {
    const std::string mode = j.at("svp_mode").get<std::string>();
    if (mode == "threshold") c.hyper.svp.kind = SvpMode::Kind::threshold;
    else if (mode == "fixed_p") c.hyper.svp.kind = SvpMode::Kind::fixed_p;
    else throw std::invalid_argument("config: svp_mode must be 'threshold' or 'fixed_p'");
  }
  if (j.contains("svp_threshold"))
    c.hyper.svp.threshold = j.at("svp_threshold").get<double>();
  if (j.contains("svp_p")) c.hyper.svp.p = j.at("svp_p").get<int>();
  if (j.contains("rank_tol")) c.hyper.rank_tol = j.at("rank_tol").get<double>();
  if (j.contains("hier_swap_reg"))
    c.hyper.hier_swap_reg = j.at("hier_swap_reg").get<bool>();
  if (j.contains("b_true_convention"))
    c.b_true_convention = b_convention_from_name(j.at("b_true_convention"));

  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return config_from_json(j);
}

}  // namespace rlmpc
