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

#include <stdexcept>

#include "rlmpc/qp.hpp"

namespace rlmpc {

/// Discrete-time algebraic Riccati equation data:
///   S = A'SA - A'SB (R + B'SB)^{-1} B'SA + Q
struct DareSpec {
  Matrix a;  // n x n
  Matrix b;  // n x m
  Matrix q;  // n x n, symmetric PSD
  Matrix r;  // m x m, symmetric PD
};

inline Matrix dare_map(const DareSpec& spec, const Matrix& s) {
  const Matrix bsb = spec.r + spec.b.transpose() * s * spec.b;
  const Matrix bsa = spec.b.transpose() * s * spec.a;
  return spec.a.transpose() * s * spec.a -
         bsa.transpose() * bsb.ldlt().solve(bsa) + spec.q;
}

inline double dare_residual(const DareSpec& spec, const Matrix& s) {
  return (s - dare_map(spec, s)).norm();
}

/// Fixed-point iteration of the Riccati map from S = Q. Converges for
/// stabilizable (A, B); throws after the iteration cap otherwise.
inline Matrix solve_dare(const DareSpec& spec, double tol = 1e-12,
                         int max_iter = 10000) {
  Matrix s = spec.q;
  for (int i = 0; i < max_iter; ++i) {
    Matrix next = dare_map(spec, s);
    next = 0.5 * (next + next.transpose());
    if (!next.allFinite())
      throw std::runtime_error("solve_dare: iteration diverged");
    const double change = (next - s).cwiseAbs().maxCoeff();
    s = next;
    if (change <= tol * std::max(1.0, s.cwiseAbs().maxCoeff())) return s;
  }
  throw std::runtime_error("solve_dare: no convergence (pair not stabilizable?)");
}

}  // namespace rlmpc
