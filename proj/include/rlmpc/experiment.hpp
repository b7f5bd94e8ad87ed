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

// Closed-loop experiment harness: run one learning experiment (method x
// seed), log per-step records, write/read the CSV schema and aggregate
// sweep results.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlmpc/combiners.hpp"
#include "rlmpc/dare.hpp"
#include "rlmpc/simulation.hpp"

namespace rlmpc {

enum class InitModel { paper_initial, double_integrator };
enum class BTrueConvention { zero, mean_disturbance };

inline const char* init_model_name(InitModel m) {
  return m == InitModel::paper_initial ? "paper_initial" : "double_integrator";
}

inline InitModel init_model_from_name(const std::string& s) {
  if (s == "paper_initial") return InitModel::paper_initial;
  if (s == "double_integrator") return InitModel::double_integrator;
  throw std::invalid_argument("unknown init_model: " + s);
}

inline const char* b_convention_name(BTrueConvention c) {
  return c == BTrueConvention::zero ? "zero" : "mean_disturbance";
}

inline BTrueConvention b_convention_from_name(const std::string& s) {
  if (s == "zero") return BTrueConvention::zero;
  if (s == "mean_disturbance") return BTrueConvention::mean_disturbance;
  throw std::invalid_argument("unknown b_true_convention: " + s);
}

struct ExperimentConfig {
  CombineMethod method = CombineMethod::baseline;
  int steps = 3000;
  std::uint64_t seed = 0;
  InitModel init_model = InitModel::paper_initial;
  UpdateHyper hyper;   // alpha, beta, lambdas, svp mode, rank tol
  int horizon = 10;
  double gamma = 0.99;
  Eigen::Vector2d omega = Eigen::Vector2d(100.0, 100.0);
  int window = 50;          // batch: most recent W transitions
  int update_period = 10;   // one update every M plant steps
  int warmup = 20;          // steps before the first update
  double exploration_amplitude = 0.1;
  BTrueConvention b_true_convention = BTrueConvention::mean_disturbance;

  MpcConfig mpc_config() const {
    MpcConfig cfg;
    cfg.horizon = horizon;
    cfg.discount = gamma;
    cfg.slack_weight = omega;
    return cfg;
  }

  void validate() const {
    if (steps < warmup)
      throw std::invalid_argument("config: steps must be >= warmup");
    // alpha = 0 is allowed as an explicit no-op learning run
    if (hyper.alpha < 0.0 || hyper.beta < 0.0 || !(hyper.lambda_q > 0.0) ||
        !(hyper.lambda_f > 0.0))
      throw std::invalid_argument("config: rates and lambdas must be positive");
    if (window < 1 || update_period < 1 || warmup < 0)
      throw std::invalid_argument("config: invalid schedule");
    if (exploration_amplitude < 0.0)
      throw std::invalid_argument("config: negative exploration amplitude");
  }
};

struct RunRecord {
  int step = 0;
  double x1 = 0.0;
  double x2 = 0.0;
  double u = 0.0;
  double stage_cost = 0.0;
  double td_error_abs = 0.0;  // refreshed at update steps, held in between
  double param_error = 0.0;
};

/// Initial parameters: model guess per variant, terminal cost from the
/// Riccati equation with Q = I, R = 1/2, every modifier zero.
inline ParamVector make_initial_theta(InitModel init) {
  ParamVector theta;
  if (init == InitModel::paper_initial) {
    theta.a_mat << 1.0, 0.25, 0.0, 1.0;
    theta.b_mat << 0.0312, 0.25;
  } else {
    theta.a_mat << 1.0, 1.0, 0.0, 1.0;
    theta.b_mat << 0.0, 1.0;
  }
  theta.b_aff.setZero();

  DareSpec spec;
  spec.a = theta.a_mat;
  spec.b = theta.b_mat;
  spec.q = Matrix::Identity(2, 2);
  spec.r = Matrix::Constant(1, 1, 0.5);
  theta.s_term = solve_dare(spec);
  return theta;
}

/// 2-norm of the stacked model mismatch [vec(A - A_true), B - B_true,
/// b - b_ref], where b_ref is zero or the mean disturbance [-0.05, 0].
inline double parameter_error(const ParamVector& theta, const PlantModel& plant,
                              BTrueConvention convention) {
  Eigen::Vector2d b_ref = Eigen::Vector2d::Zero();
  if (convention == BTrueConvention::mean_disturbance)
    b_ref = Eigen::Vector2d(
        0.5 * (plant.disturbance_low + plant.disturbance_high), 0.0);
  double sq = (theta.a_mat - plant.a_true).squaredNorm();
  sq += (theta.b_mat - plant.b_true).squaredNorm();
  sq += (theta.b_aff - b_ref).squaredNorm();
  return std::sqrt(sq);
}

/// Trailing mean with a growing window at the start: element i averages
/// series[max(0, i-window+1) .. i].
inline std::vector<double> moving_average(const std::vector<double>& series,
                                          int window = 100) {
  if (window < 1) throw std::invalid_argument("moving_average: window >= 1");
  if (series.empty()) throw std::invalid_argument("moving_average: empty series");
  std::vector<double> out(series.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    acc += series[i];
    if (i >= static_cast<std::size_t>(window)) acc -= series[i - window];
    const double count = std::min<std::size_t>(i + 1, window);
    out[i] = acc / static_cast<double>(count);
  }
  return out;
}

/// One closed-loop learning run. Per step: act with exploration, observe
/// the plant, record, and every `update_period` steps past warmup apply
/// one combined parameter update (with the terminal cost re-projected to
/// the PSD cone). Fully determined by (config, seed).
inline std::vector<RunRecord> run_experiment(const ExperimentConfig& config) {
  config.validate();
  const MpcConfig cfg = config.mpc_config();
  const PlantModel plant;
  RngState rng(config.seed);

  ParamVector theta = make_initial_theta(config.init_model);
  TransitionBuffer buffer;
  Eigen::Vector2d x(0.5, 0.0);
  double last_td_abs = 0.0;

  std::vector<RunRecord> records;
  records.reserve(static_cast<std::size_t>(config.steps));

  for (int step = 0; step < config.steps; ++step) {
    const double pi = policy(theta, cfg, x);
    const double u = explore_action(pi, rng, config.exploration_amplitude);
    const auto [x_next, e] = plant_step(plant, x, u, rng);
    const double cost = baseline_stage_cost(x, u, config.omega);
    buffer.push(Transition{x, u, x_next, cost});

    const bool do_update =
        (step + 1) >= std::max(1, config.warmup) &&
        ((step + 1) - config.warmup) % config.update_period == 0;
    if (do_update) {
      const Batch batch = buffer.recent(static_cast<std::size_t>(config.window));
      const RlLinearization rl = rl_linearize(theta, cfg, batch);
      last_td_abs = rl.errors.cwiseAbs().mean();
      std::optional<PemLinearization> pem;
      if (config.method != CombineMethod::baseline)
        pem = pem_linearize(theta, batch);
      const UpdateStep update =
          compose_update_from(config.method, rl, pem, config.hyper);
      // record against the controller parameters used at this step
      records.push_back(RunRecord{
          step, x[0], x[1], u, cost, last_td_abs,
          parameter_error(theta, plant, config.b_true_convention)});
      theta = apply_update(theta, update.delta);
    } else {
      records.push_back(RunRecord{
          step, x[0], x[1], u, cost, last_td_abs,
          parameter_error(theta, plant, config.b_true_convention)});
    }
    x = x_next;
  }
  return records;
}

// ---------------------------------------------------------------------------
// CSV schema: step,x1,x2,u,stage_cost,td_error_abs,param_error,method,seed
// ---------------------------------------------------------------------------

namespace csv_detail {

inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);  // shortest round-trip form
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error("csv: bad numeric field '" + s + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace csv_detail

inline constexpr const char* kCsvHeader =
    "step,x1,x2,u,stage_cost,td_error_abs,param_error,method,seed";

inline void write_csv(const std::vector<RunRecord>& records,
                      const std::string& path, CombineMethod method,
                      std::uint64_t seed) {
  if (records.empty()) throw std::invalid_argument("write_csv: no records");
  std::ofstream out(path, std::ios::binary);  // "\n" line endings everywhere
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  using csv_detail::format_double;
  out << kCsvHeader << "\n";
  for (const RunRecord& r : records) {
    out << r.step << ',' << format_double(r.x1) << ',' << format_double(r.x2)
        << ',' << format_double(r.u) << ',' << format_double(r.stage_cost)
        << ',' << format_double(r.td_error_abs) << ','
        << format_double(r.param_error) << ',' << method_name(method) << ','
        << seed << "\n";
  }
  if (!out) throw std::runtime_error("write_csv: write failed on " + path);
}

struct CsvRun {
  std::vector<RunRecord> records;
  std::string method;
  std::uint64_t seed = 0;
};

inline CsvRun read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw std::runtime_error("read_csv: bad header in " + path);
  CsvRun run;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv_detail::split(line, ',');
    if (f.size() != 9) throw std::runtime_error("read_csv: bad row in " + path);
    RunRecord r;
    r.step = static_cast<int>(csv_detail::parse_double(f[0]));
    r.x1 = csv_detail::parse_double(f[1]);
    r.x2 = csv_detail::parse_double(f[2]);
    r.u = csv_detail::parse_double(f[3]);
    r.stage_cost = csv_detail::parse_double(f[4]);
    r.td_error_abs = csv_detail::parse_double(f[5]);
    r.param_error = csv_detail::parse_double(f[6]);
    run.records.push_back(r);
    run.method = f[7];
    run.seed = static_cast<std::uint64_t>(std::stoull(f[8]));
  }
  if (run.records.empty())
    throw std::runtime_error("read_csv: no data rows in " + path);
  return run;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct MethodSummary {
  std::string method;
  int runs = 0;
  double median_final_ma_cost = 0.0;
  double iqr_final_ma_cost = 0.0;
  double median_final_param_error = 0.0;
  double iqr_final_param_error = 0.0;
  double median_steps_to_clean_window = 0.0;
  double iqr_steps_to_clean_window = 0.0;
};

namespace agg_detail {

inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile: empty");
  std::sort(v.begin(), v.end());
  const double h = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(h));
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(const std::vector<double>& v) { return quantile(v, 0.5); }
inline double iqr(const std::vector<double>& v) {
  return quantile(v, 0.75) - quantile(v, 0.25);
}

inline bool violates_base_bounds(const RunRecord& r) {
  constexpr double tol = 1e-9;
  return r.x1 < -tol || r.x1 > 1.0 + tol || r.x2 < -1.0 - tol ||
         r.x2 > 1.0 + tol;
}

// First step index whose trailing `window` records are all violation-free;
// the run length when no such window exists.
inline double steps_to_clean_window(const std::vector<RunRecord>& records,
                                    int window = 100) {
  int clean = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    clean = violates_base_bounds(records[i]) ? 0 : clean + 1;
    if (clean >= window) return static_cast<double>(i);
  }
  return static_cast<double>(records.size());
}

}  // namespace agg_detail

/// Per-method medians and interquartile ranges of the final 100-step
/// moving-average stage cost, the final model parameter error, and the
/// first step with a trailing violation-free 100-step window.
inline std::vector<MethodSummary> aggregate_report(
    const std::vector<std::string>& paths) {
  if (paths.empty()) throw std::invalid_argument("aggregate_report: no inputs");
  struct PerMethod {
    std::vector<double> final_ma, final_pe, clean;
  };
  std::map<std::string, PerMethod> groups;
  for (const std::string& path : paths) {
    const CsvRun run = read_csv(path);
    std::vector<double> costs;
    costs.reserve(run.records.size());
    for (const RunRecord& r : run.records) costs.push_back(r.stage_cost);
    PerMethod& g = groups[run.method];
    g.final_ma.push_back(moving_average(costs, 100).back());
    g.final_pe.push_back(run.records.back().param_error);
    g.clean.push_back(agg_detail::steps_to_clean_window(run.records));
  }
  std::vector<MethodSummary> out;
  for (const auto& [name, g] : groups) {
    MethodSummary s;
    s.method = name;
    s.runs = static_cast<int>(g.final_ma.size());
    s.median_final_ma_cost = agg_detail::median(g.final_ma);
    s.iqr_final_ma_cost = agg_detail::iqr(g.final_ma);
    s.median_final_param_error = agg_detail::median(g.final_pe);
    s.iqr_final_param_error = agg_detail::iqr(g.final_pe);
    s.median_steps_to_clean_window = agg_detail::median(g.clean);
    s.iqr_steps_to_clean_window = agg_detail::iqr(g.clean);
    out.push_back(std::move(s));
  }
  return out;
}

inline void write_summary_csv(const std::vector<MethodSummary>& summary,
                              const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("summary: cannot open " + path);
  using csv_detail::format_double;
  out << "method,runs,median_final_ma_cost,iqr_final_ma_cost,"
         "median_final_param_error,iqr_final_param_error,"
         "median_steps_to_clean_window,iqr_steps_to_clean_window\n";
  for (const MethodSummary& s : summary) {
    out << s.method << ',' << s.runs << ','
        << format_double(s.median_final_ma_cost) << ','
        << format_double(s.iqr_final_ma_cost) << ','
        << format_double(s.median_final_param_error) << ','
        << format_double(s.iqr_final_param_error) << ','
        << format_double(s.median_steps_to_clean_window) << ','
        << format_double(s.iqr_steps_to_clean_window) << "\n";
  }
}

}  // namespace rlmpc
