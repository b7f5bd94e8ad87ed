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

namespace rlmpc {

inline constexpr int kParamDim = 19;

using ParamDelta = Eigen::Matrix<double, kParamDim, 1>;

// Offsets of each block in the canonical flattening.
inline constexpr int kIdxV0 = 0;
inline constexpr int kIdxFMod = 1;   // 3 entries (x1, x2, u)
inline constexpr int kIdxSTerm = 4;  // 3 entries (s11, s21, s22)
inline constexpr int kIdxAMat = 7;   // 4 entries, row-major
inline constexpr int kIdxBMat = 11;  // 2 entries
inline constexpr int kIdxBAff = 13;  // 2 entries
inline constexpr int kIdxXLb = 15;   // 2 entries
inline constexpr int kIdxXUb = 17;   // 2 entries

/// Learnable controller parameters: initial cost offset, linear stage-cost
/// modifier on (x, u), terminal cost matrix, internal model (A, B, b) and
/// state-bound modifiers. Canonical flattening order is
///   [v0, f_mod, s11, s21, s22, A row-major, B, b, x_lb_mod, x_ub_mod]
/// for a total of 19 entries.
struct ParamVector {
  double v0 = 0.0;
  Eigen::Vector3d f_mod = Eigen::Vector3d::Zero();
  Eigen::Matrix2d s_term = Eigen::Matrix2d::Zero();  // kept symmetric
  Eigen::Matrix2d a_mat = Eigen::Matrix2d::Zero();
  Eigen::Vector2d b_mat = Eigen::Vector2d::Zero();
  Eigen::Vector2d b_aff = Eigen::Vector2d::Zero();
  Eigen::Vector2d x_lb_mod = Eigen::Vector2d::Zero();
  Eigen::Vector2d x_ub_mod = Eigen::Vector2d::Zero();

  ParamDelta flatten() const {
    ParamDelta v;
    v[kIdxV0] = v0;
    v.segment<3>(kIdxFMod) = f_mod;
    v[kIdxSTerm + 0] = s_term(0, 0);
    v[kIdxSTerm + 1] = s_term(1, 0);
    v[kIdxSTerm + 2] = s_term(1, 1);
    v[kIdxAMat + 0] = a_mat(0, 0);
    v[kIdxAMat + 1] = a_mat(0, 1);
    v[kIdxAMat + 2] = a_mat(1, 0);
    v[kIdxAMat + 3] = a_mat(1, 1);
    v.segment<2>(kIdxBMat) = b_mat;
    v.segment<2>(kIdxBAff) = b_aff;
    v.segment<2>(kIdxXLb) = x_lb_mod;
    v.segment<2>(kIdxXUb) = x_ub_mod;
    return v;
  }

  static ParamVector unflatten(const ParamDelta& v) {
    ParamVector p;
    p.v0 = v[kIdxV0];
    p.f_mod = v.segment<3>(kIdxFMod);
    p.s_term(0, 0) = v[kIdxSTerm + 0];
    p.s_term(1, 0) = v[kIdxSTerm + 1];
    p.s_term(0, 1) = v[kIdxSTerm + 1];
    p.s_term(1, 1) = v[kIdxSTerm + 2];
    p.a_mat(0, 0) = v[kIdxAMat + 0];
    p.a_mat(0, 1) = v[kIdxAMat + 1];
    p.a_mat(1, 0) = v[kIdxAMat + 2];
    p.a_mat(1, 1) = v[kIdxAMat + 3];
    p.b_mat = v.segment<2>(kIdxBMat);
    p.b_aff = v.segment<2>(kIdxBAff);
    p.x_lb_mod = v.segment<2>(kIdxXLb);
    p.x_ub_mod = v.segment<2>(kIdxXUb);
    return p;
  }
};

/// Clips the eigenvalues of a symmetric 2x2 matrix from below.
inline Eigen::Matrix2d clip_psd(const Eigen::Matrix2d& m, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m);
  Eigen::Vector2d ev = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

/// Applies a parameter increment and restores convexity of the terminal
/// cost by clipping its eigenvalues at `psd_floor`.
inline ParamVector apply_update(const ParamVector& theta, const ParamDelta& delta,
                                double psd_floor = 1e-6) {
  ParamVector next = ParamVector::unflatten(theta.flatten() + delta);
  next.s_term = clip_psd(next.s_term, psd_floor);
  return next;
}

}  // namespace rlmpc
