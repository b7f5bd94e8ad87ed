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

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "rlmpc/learners.hpp"

namespace rlmpc {

/// The controlled process: linear dynamics plus an additive disturbance
/// on the first state, uniform on [disturbance_low, disturbance_high].
struct PlantModel {
  Eigen::Matrix2d a_true = (Eigen::Matrix2d() << 0.9, 0.35, 0.0, 1.1).finished();
  Eigen::Vector2d b_true = Eigen::Vector2d(0.0813, 0.2);
  double disturbance_low = -0.1;
  double disturbance_high = 0.0;
};

/// Seeded generator with a documented draw primitive: uniform doubles come
/// from the top 53 bits of a mersenne twister word, so a seed fixes the
/// whole sequence within a build.
class RngState {
 public:
  explicit RngState(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    const double u01 =
        static_cast<double>(engine_() >> 11) * 0x1.0p-53;  // [0, 1)
    return lo + (hi - lo) * u01;
  }

 private:
  std::mt19937_64 engine_;
};

/// Deterministic plant step with an injected disturbance value.
inline Eigen::Vector2d plant_step(const PlantModel& plant,
                                  const Eigen::Vector2d& x, double u,
                                  double disturbance) {
  if (u < -1.0 - 1e-12 || u > 1.0 + 1e-12)
    throw std::invalid_argument("plant: action out of bounds, clip first");
  return plant.a_true * x + plant.b_true * u +
         Eigen::Vector2d(disturbance, 0.0);
}

/// Plant step drawing the disturbance from `rng`; returns the successor
/// state and the realized disturbance.
inline std::pair<Eigen::Vector2d, double> plant_step(const PlantModel& plant,
                                                     const Eigen::Vector2d& x,
                                                     double u, RngState& rng) {
  const double e = rng.uniform(plant.disturbance_low, plant.disturbance_high);
  return {plant_step(plant, x, u, e), e};
}

/// Realized stage cost |x|^2 + u^2/2 plus the weighted violation of the
/// base state box 0 <= x1 <= 1, -1 <= x2 <= 1.
inline double baseline_stage_cost(const Eigen::Vector2d& x, double u,
                                  const Eigen::Vector2d& omega) {
  const Eigen::Vector2d lb(0.0, -1.0);
  const Eigen::Vector2d ub(1.0, 1.0);
  double cost = x.squaredNorm() + 0.5 * u * u;
  for (int j = 0; j < 2; ++j) {
    cost += omega[j] * std::max(0.0, lb[j] - x[j]);
    cost += omega[j] * std::max(0.0, x[j] - ub[j]);
  }
  return cost;
}

/// Policy action plus uniform exploration noise, clipped to [-1, 1].
inline double explore_action(double policy_action, RngState& rng,
                             double amplitude) {
  if (amplitude < 0.0)
    throw std::invalid_argument("explore: negative amplitude");
  const double eta = amplitude > 0.0 ? rng.uniform(-amplitude, amplitude) : 0.0;
  return std::clamp(policy_action + eta, -1.0, 1.0);
}

/// Chronological transition store; `recent` returns the newest `window`
/// transitions in order.
class TransitionBuffer {
 public:
  void push(const Transition& t) { transitions_.push_back(t); }

  Batch recent(std::size_t window) const {
    if (window < 1) throw std::invalid_argument("buffer: window must be >= 1");
    if (transitions_.empty()) throw std::runtime_error("buffer: empty");
    const std::size_t take = std::min(window, transitions_.size());
    Batch batch;
    batch.transitions.assign(transitions_.end() - static_cast<std::ptrdiff_t>(take),
                             transitions_.end());
    return batch;
  }

  std::size_t size() const { return transitions_.size(); }

 private:
  std::vector<Transition> transitions_;
};

}  // namespace rlmpc
