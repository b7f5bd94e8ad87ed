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

// Linear-quadratic MPC as a parametric function approximator. The
// finite-horizon problem
//
//   min  v0 + sum_i gamma^i (|x_i|^2 + 1/2 u_i^2 + f'[x_i;u_i] + w'sigma_i)
//        + gamma^N x_N' S x_N
//   s.t. x_0 = s,  x_{i+1} = A x_i + B u_i + b
//        lb + lb_mod - sigma_i <= x_i <= ub + ub_mod + sigma_i
//        u_lo <= u_i <= u_hi,  sigma_i >= 0            (i = 0..N-1)
//
// defines the state value V(s); pinning u_0 = a defines the action value
// Q(s, a) and the policy is the first action of the V solve. The gradient
// of Q in the 19 parameters is the partial derivative of the QP Lagrangian
// at the primal-dual optimum.

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rlmpc/parameters.hpp"
#include "rlmpc/qp.hpp"

namespace rlmpc {

struct MpcConfig {
  int horizon = 10;
  double discount = 0.99;
  Eigen::Vector2d slack_weight = Eigen::Vector2d(100.0, 100.0);
  Eigen::Vector2d base_x_lower = Eigen::Vector2d(0.0, -1.0);
  Eigen::Vector2d base_x_upper = Eigen::Vector2d(1.0, 1.0);
  double u_lower = -1.0;
  double u_upper = 1.0;
  // base stage cost is fixed: |x|^2 + 1/2 u^2
};

struct MpcSolution {
  double objective = 0.0;    // includes the v0 offset
  double first_action = 0.0;
  std::vector<Eigen::Vector2d> state_trajectory;  // N + 1 entries
  Vector action_trajectory;                       // N entries
  std::vector<Eigen::Vector2d> slack_trajectory;  // N entries
  QpSolution qp_solution;
};

struct QGradient {
  ParamDelta grad = ParamDelta::Zero();
  bool degenerate = false;  // an active constraint has a ~zero multiplier
};

namespace mpc_detail {

// Decision vector layout: [x_0..x_N | u_0..u_{N-1} | sigma_0..sigma_{N-1}].
struct Layout {
  int n_steps;
  explicit Layout(int horizon) : n_steps(horizon) {}
  int num_vars() const { return 5 * n_steps + 2; }
  int x(int i, int j) const { return 2 * i + j; }
  int u(int i) const { return 2 * (n_steps + 1) + i; }
  int sigma(int i, int j) const { return 2 * (n_steps + 1) + n_steps + 2 * i + j; }
  // equality rows: [x_0 pin (2) | dynamics (2 per stage) | u_0 pin (opt)]
  int eq_init(int j) const { return j; }
  int eq_dyn(int i, int j) const { return 2 + 2 * i + j; }
  // inequality rows, per stage: [x lower (2) | x upper (2) | u box | sigma (2)]
  int row_x_lo(int i, int j) const { return 7 * i + j; }
  int row_x_hi(int i, int j) const { return 7 * i + 2 + j; }
  int row_u(int i) const { return 7 * i + 4; }
  int row_sigma(int i, int j) const { return 7 * i + 5 + j; }
  int num_ineq() const { return 7 * n_steps; }
};

inline void check_config(const MpcConfig& cfg) {
  if (cfg.horizon < 1) throw std::invalid_argument("mpc: horizon must be >= 1");
  if (!(cfg.discount > 0.0 && cfg.discount <= 1.0))
    throw std::invalid_argument("mpc: discount must be in (0, 1]");
  if (!(cfg.slack_weight.minCoeff() > 0.0))
    throw std::invalid_argument("mpc: slack weights must be positive");
}

// Feasible start: roll the model forward with the pinned (or zero) action
// and absorb any bound violations into the slacks.
inline Vector rollout_start(const ParamVector& theta, const MpcConfig& cfg,
                            const Eigen::Vector2d& s, std::optional<double> action) {
  const Layout L(cfg.horizon);
  Vector z = Vector::Zero(L.num_vars());
  Eigen::Vector2d x = s;
  for (int i = 0; i < cfg.horizon; ++i) {
    z.segment<2>(L.x(i, 0)) = x;
    const double u = (i == 0 && action) ? *action : 0.0;
    z[L.u(i)] = u;
    for (int j = 0; j < 2; ++j) {
      const double lo = cfg.base_x_lower[j] + theta.x_lb_mod[j];
      const double hi = cfg.base_x_upper[j] + theta.x_ub_mod[j];
      z[L.sigma(i, j)] = std::max({0.0, lo - x[j], x[j] - hi});
    }
    x = theta.a_mat * x + theta.b_mat * u + theta.b_aff;
  }
  z.segment<2>(L.x(cfg.horizon, 0)) = x;
  return z;
}

}  // namespace mpc_detail

/// Assembles the MPC problem for state `s` as a dense QP. When `action` is
/// given, u_0 is pinned to it by an extra equality row (appended last).
/// The constant v0 is not representable in the QP objective; evaluators
/// add it on top of the QP optimum.
inline QpProblem build_qp(const ParamVector& theta, const MpcConfig& cfg,
                          const Eigen::Vector2d& s,
                          std::optional<double> action = std::nullopt) {
  using mpc_detail::Layout;
  mpc_detail::check_config(cfg);

  const int N = cfg.horizon;
  const Layout L(N);
  const int n = L.num_vars();
  const int me = 2 * (N + 1) + (action ? 1 : 0);
  const int mi = L.num_ineq();

  QpProblem qp;
  qp.hessian = Matrix::Zero(n, n);
  qp.linear_cost = Vector::Zero(n);
  qp.eq_matrix = Matrix::Zero(me, n);
  qp.eq_rhs = Vector::Zero(me);
  qp.ineq_matrix = Matrix::Zero(mi, n);
  qp.ineq_lower = Vector::Constant(mi, -kInfinity);
  qp.ineq_upper = Vector::Constant(mi, kInfinity);

  double disc = 1.0;
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < 2; ++j) {
      qp.hessian(L.x(i, j), L.x(i, j)) = 2.0 * disc;
      qp.linear_cost[L.x(i, j)] = disc * theta.f_mod[j];
      qp.linear_cost[L.sigma(i, j)] = disc * cfg.slack_weight[j];
    }
    qp.hessian(L.u(i), L.u(i)) = disc;
    qp.linear_cost[L.u(i)] = disc * theta.f_mod[2];
    disc *= cfg.discount;
  }
  // disc is now gamma^N
  qp.hessian.block<2, 2>(L.x(N, 0), L.x(N, 0)) =
      disc * (theta.s_term + theta.s_term.transpose());

  for (int j = 0; j < 2; ++j) {
    qp.eq_matrix(L.eq_init(j), L.x(0, j)) = 1.0;
    qp.eq_rhs[L.eq_init(j)] = s[j];
  }
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < 2; ++j) {
      const int r = L.eq_dyn(i, j);
      qp.eq_matrix(r, L.x(i + 1, j)) = 1.0;
      qp.eq_matrix(r, L.x(i, 0)) = -theta.a_mat(j, 0);
      qp.eq_matrix(r, L.x(i, 1)) = -theta.a_mat(j, 1);
      qp.eq_matrix(r, L.u(i)) = -theta.b_mat[j];
      qp.eq_rhs[r] = theta.b_aff[j];
    }
  }
  if (action) {
    qp.eq_matrix(me - 1, L.u(0)) = 1.0;
    qp.eq_rhs[me - 1] = *action;
  }

  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < 2; ++j) {
      int r = L.row_x_lo(i, j);  // x + sigma >= lb + lb_mod
      qp.ineq_matrix(r, L.x(i, j)) = 1.0;
      qp.ineq_matrix(r, L.sigma(i, j)) = 1.0;
      qp.ineq_lower[r] = cfg.base_x_lower[j] + theta.x_lb_mod[j];

      r = L.row_x_hi(i, j);  // x - sigma <= ub + ub_mod
      qp.ineq_matrix(r, L.x(i, j)) = 1.0;
      qp.ineq_matrix(r, L.sigma(i, j)) = -1.0;
      qp.ineq_upper[r] = cfg.base_x_upper[j] + theta.x_ub_mod[j];

      r = L.row_sigma(i, j);  // sigma >= 0
      qp.ineq_matrix(r, L.sigma(i, j)) = 1.0;
      qp.ineq_lower[r] = 0.0;
    }
    const int r = L.row_u(i);
    qp.ineq_matrix(r, L.u(i)) = 1.0;
    qp.ineq_lower[r] = cfg.u_lower;
    qp.ineq_upper[r] = cfg.u_upper;
  }
  return qp;
}

namespace mpc_detail {

inline MpcSolution solve_built(const ParamVector& theta, const MpcConfig& cfg,
                               const QpProblem& qp, const Vector& start) {
  QpSolution qs = solve_qp(qp, &start);
  if (qs.status != QpStatus::optimal)
    throw std::runtime_error("mpc: QP solve failed (status != optimal)");

  const Layout L(cfg.horizon);
  MpcSolution sol;
  sol.objective = qs.objective + theta.v0;
  sol.first_action = qs.primal[L.u(0)];
  sol.state_trajectory.resize(cfg.horizon + 1);
  sol.action_trajectory.resize(cfg.horizon);
  sol.slack_trajectory.resize(cfg.horizon);
  for (int i = 0; i <= cfg.horizon; ++i)
    sol.state_trajectory[i] = qs.primal.segment<2>(L.x(i, 0));
  for (int i = 0; i < cfg.horizon; ++i) {
    sol.action_trajectory[i] = qs.primal[L.u(i)];
    sol.slack_trajectory[i] = qs.primal.segment<2>(L.sigma(i, 0));
  }
  sol.qp_solution = std::move(qs);
  return sol;
}

inline MpcSolution solve_mpc(const ParamVector& theta, const MpcConfig& cfg,
                             const Eigen::Vector2d& s,
                             std::optional<double> action) {
  const QpProblem qp = build_qp(theta, cfg, s, action);
  const Vector start = rollout_start(theta, cfg, s, action);
  return solve_built(theta, cfg, qp, start);
}

}  // namespace mpc_detail

/// V(s): optimal MPC cost from state s.
inline MpcSolution value(const ParamVector& theta, const MpcConfig& cfg,
                         const Eigen::Vector2d& s) {
  return mpc_detail::solve_mpc(theta, cfg, s, std::nullopt);
}

/// Q(s, a): optimal MPC cost with the first action pinned to a.
inline MpcSolution action_value(const ParamVector& theta, const MpcConfig& cfg,
                                const Eigen::Vector2d& s, double a) {
  if (a < cfg.u_lower - 1e-12 || a > cfg.u_upper + 1e-12)
    throw std::invalid_argument("mpc: action outside input bounds");
  return mpc_detail::solve_mpc(theta, cfg, s, a);
}

/// pi(s) = argmin_a Q(s, a), the first action of the V(s) solve.
inline double policy(const ParamVector& theta, const MpcConfig& cfg,
                     const Eigen::Vector2d& s) {
  return value(theta, cfg, s).first_action;
}

/// d f(x, u) / d theta for the internal model f = A x + B u + b; nonzero
/// only in the A, B, b columns (the model block).
inline Eigen::Matrix<double, 2, kParamDim> model_jacobian_row(
    const ParamVector& /*theta*/, const Eigen::Vector2d& x, double u) {
  Eigen::Matrix<double, 2, kParamDim> jac =
      Eigen::Matrix<double, 2, kParamDim>::Zero();
  jac(0, kIdxAMat + 0) = x[0];
  jac(0, kIdxAMat + 1) = x[1];
  jac(1, kIdxAMat + 2) = x[0];
  jac(1, kIdxAMat + 3) = x[1];
  jac(0, kIdxBMat + 0) = u;
  jac(1, kIdxBMat + 1) = u;
  jac(0, kIdxBAff + 0) = 1.0;
  jac(1, kIdxBAff + 1) = 1.0;
  return jac;
}

/// One-step prediction of the internal model.
inline Eigen::Vector2d model_predict(const ParamVector& theta,
                                     const Eigen::Vector2d& x, double u) {
  return theta.a_mat * x + theta.b_mat * u + theta.b_aff;
}

/// Q(s, a) together with its parameter gradient, from a single QP solve.
struct QEvaluation {
  double q_value = 0.0;
  ParamDelta grad = ParamDelta::Zero();
  bool degenerate = false;
};

namespace mpc_detail {

inline QGradient gradient_from_solution(const ParamVector& /*theta*/,
                                        const MpcConfig& cfg,
                                        const QpProblem& qp,
                                        const MpcSolution& sol) {
  const QpSolution& qs = sol.qp_solution;
  const Layout L(cfg.horizon);
  const int N = cfg.horizon;

  QGradient out;
  out.grad[kIdxV0] = 1.0;

  double disc = 1.0;
  for (int i = 0; i < N; ++i) {
    out.grad[kIdxFMod + 0] += disc * sol.state_trajectory[i][0];
    out.grad[kIdxFMod + 1] += disc * sol.state_trajectory[i][1];
    out.grad[kIdxFMod + 2] += disc * sol.action_trajectory[i];
    disc *= cfg.discount;
  }
  const Eigen::Vector2d xN = sol.state_trajectory[N];
  out.grad[kIdxSTerm + 0] = disc * xN[0] * xN[0];
  out.grad[kIdxSTerm + 1] = 2.0 * disc * xN[0] * xN[1];
  out.grad[kIdxSTerm + 2] = disc * xN[1] * xN[1];

  for (int i = 0; i < N; ++i) {
    const Eigen::Vector2d lam(qs.eq_duals[L.eq_dyn(i, 0)],
                              qs.eq_duals[L.eq_dyn(i, 1)]);
    const Eigen::Vector2d xi = sol.state_trajectory[i];
    const double ui = sol.action_trajectory[i];
    out.grad[kIdxAMat + 0] -= lam[0] * xi[0];
    out.grad[kIdxAMat + 1] -= lam[0] * xi[1];
    out.grad[kIdxAMat + 2] -= lam[1] * xi[0];
    out.grad[kIdxAMat + 3] -= lam[1] * xi[1];
    out.grad[kIdxBMat + 0] -= lam[0] * ui;
    out.grad[kIdxBMat + 1] -= lam[1] * ui;
    out.grad[kIdxBAff + 0] -= lam[0];
    out.grad[kIdxBAff + 1] -= lam[1];
    for (int j = 0; j < 2; ++j) {
      out.grad[kIdxXLb + j] -= qs.ineq_duals[L.row_x_lo(i, j)];
      out.grad[kIdxXUb + j] -= qs.ineq_duals[L.row_x_hi(i, j)];
    }
  }

  // strict complementarity scan over all inequality rows
  for (Eigen::Index r = 0; r < qp.ineq_lower.size(); ++r) {
    const double ax = qp.ineq_matrix.row(r).dot(qs.primal);
    const double mu = qs.ineq_duals[r];
    const bool lo_active = std::isfinite(qp.ineq_lower[r]) &&
                           std::abs(ax - qp.ineq_lower[r]) <= 1e-9;
    const bool hi_active = std::isfinite(qp.ineq_upper[r]) &&
                           std::abs(ax - qp.ineq_upper[r]) <= 1e-9;
    if ((lo_active || hi_active) && std::abs(mu) <= 1e-9) {
      out.degenerate = true;
      break;
    }
  }
  return out;
}

}  // namespace mpc_detail

/// Evaluates Q(s, a) and its parameter gradient with one QP solve.
inline QEvaluation eval_q(const ParamVector& theta, const MpcConfig& cfg,
                          const Eigen::Vector2d& s, double a) {
  if (a < cfg.u_lower - 1e-12 || a > cfg.u_upper + 1e-12)
    throw std::invalid_argument("mpc: action outside input bounds");
  const QpProblem qp = build_qp(theta, cfg, s, a);
  const Vector start = mpc_detail::rollout_start(theta, cfg, s, a);
  const MpcSolution sol = mpc_detail::solve_built(theta, cfg, qp, start);
  const QGradient g = mpc_detail::gradient_from_solution(theta, cfg, qp, sol);
  return QEvaluation{sol.objective, g.grad, g.degenerate};
}

/// Gradient of Q(s, a) in the parameters, from the QP Lagrangian at the
/// primal-dual optimum:
///   - cost parameters differentiate the objective directly,
///   - model parameters enter through the dynamics rows and pick up the
///     corresponding equality multipliers,
///   - bound modifiers pick up the state-bound inequality multipliers.
/// Sets `degenerate` when some active constraint has a multiplier within
/// 1e-9 of zero (the value function may be nonsmooth there).
inline QGradient grad_q(const ParamVector& theta, const MpcConfig& cfg,
                        const Eigen::Vector2d& s, double a) {
  const QEvaluation ev = eval_q(theta, cfg, s, a);
  return QGradient{ev.grad, ev.degenerate};
}

}  // namespace rlmpc
