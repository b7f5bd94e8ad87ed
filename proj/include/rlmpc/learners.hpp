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

// Batch learners on top of the MPC approximator:
//   - temporal-difference targets/errors and regularized Gauss-Newton
//     steps for the Q parameters (semi-gradient: targets held fixed),
//   - prediction-error residuals and the regularized Gauss-Newton step
//     for the model parameters.

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

#include "rlmpc/mpc.hpp"
#include "rlmpc/parameters.hpp"

namespace rlmpc {

struct Transition {
  Eigen::Vector2d x;
  double u = 0.0;
  Eigen::Vector2d x_next;
  double baseline_cost = 0.0;  // realized stage cost incl. violation penalty
};

struct Batch {
  std::vector<Transition> transitions;
  std::size_t size() const { return transitions.size(); }
};

enum class StepKind { rl, pem, combined };

struct UpdateStep {
  ParamDelta delta = ParamDelta::Zero();
  StepKind kind = StepKind::combined;
};

namespace learner_detail {

inline void check_batch(const Batch& batch) {
  if (batch.transitions.empty())
    throw std::invalid_argument("learners: empty batch");
}

}  // namespace learner_detail

/// Fixed bootstrap target y = cost + gamma V(x_next); constant in theta.
inline double td_target(const ParamVector& theta, const MpcConfig& cfg,
                        const Transition& t) {
  return t.baseline_cost + cfg.discount * value(theta, cfg, t.x_next).objective;
}

/// Linearization of the TD residuals over a batch: rows of `j_q` are the
/// Q gradients, `errors` holds delta_i = y_i - Q(x_i, u_i).
struct RlLinearization {
  Matrix j_q;     // B x 19
  Vector errors;  // B
  bool any_degenerate = false;
};

inline RlLinearization rl_linearize(const ParamVector& theta,
                                    const MpcConfig& cfg, const Batch& batch) {
  learner_detail::check_batch(batch);
  const Eigen::Index b = static_cast<Eigen::Index>(batch.size());
  RlLinearization lin;
  lin.j_q.resize(b, kParamDim);
  lin.errors.resize(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const Transition& t = batch.transitions[static_cast<std::size_t>(i)];
    const QEvaluation ev = eval_q(theta, cfg, t.x, t.u);
    lin.j_q.row(i) = ev.grad.transpose();
    lin.errors[i] = td_target(theta, cfg, t) - ev.q_value;
    lin.any_degenerate = lin.any_degenerate || ev.degenerate;
  }
  return lin;
}

inline Vector td_errors(const ParamVector& theta, const MpcConfig& cfg,
                        const Batch& batch) {
  return rl_linearize(theta, cfg, batch).errors;
}

/// theta <- theta + alpha * delta * grad Q, for a single transition.
inline UpdateStep rl_step_first_order(const ParamVector& theta,
                                      const MpcConfig& cfg, const Transition& t,
                                      double alpha) {
  const QEvaluation ev = eval_q(theta, cfg, t.x, t.u);
  const double delta = td_target(theta, cfg, t) - ev.q_value;
  return UpdateStep{alpha * delta * ev.grad, StepKind::rl};
}

inline Matrix rl_gn_hessian_from(const RlLinearization& lin, double lambda_q) {
  return lin.j_q.transpose() * lin.j_q +
         lambda_q * Matrix::Identity(kParamDim, kParamDim);
}

/// J_Q' J_Q + lambda_q I over the batch; PD for lambda_q > 0.
inline Matrix rl_gn_hessian(const ParamVector& theta, const MpcConfig& cfg,
                            const Batch& batch, double lambda_q) {
  return rl_gn_hessian_from(rl_linearize(theta, cfg, batch), lambda_q);
}

inline ParamDelta rl_gn_delta_from(const RlLinearization& lin, double alpha,
                                   double lambda_q) {
  const Matrix normal = rl_gn_hessian_from(lin, lambda_q);
  const Vector rhs = lin.j_q.transpose() * lin.errors;
  return alpha * normal.ldlt().solve(rhs);
}

/// Regularized Gauss-Newton step alpha (J'J + lambda I)^-1 J' delta.
inline UpdateStep rl_step_gauss_newton(const ParamVector& theta,
                                       const MpcConfig& cfg, const Batch& batch,
                                       double alpha, double lambda_q) {
  if (!(lambda_q > 0.0))
    throw std::invalid_argument(
        "learners: rl_step_gauss_newton needs lambda_q > 0 (the normal matrix "
        "can be singular otherwise)");
  return UpdateStep{rl_gn_delta_from(rl_linearize(theta, cfg, batch), alpha,
                                     lambda_q),
                    StepKind::rl};
}

/// Stacked model errors e_i = x_next - f_theta(x, u), two rows per
/// transition in batch order.
inline Vector pem_residuals(const ParamVector& theta, const Batch& batch) {
  learner_detail::check_batch(batch);
  Vector e(2 * batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = batch.transitions[i];
    e.segment<2>(2 * static_cast<Eigen::Index>(i)) =
        t.x_next - model_predict(theta, t.x, t.u);
  }
  return e;
}

struct PemLinearization {
  Matrix j_f;      // 2B x 19, nonzero only in the model columns
  Vector errors;   // 2B
};

inline PemLinearization pem_linearize(const ParamVector& theta,
                                      const Batch& batch) {
  learner_detail::check_batch(batch);
  const Eigen::Index b = static_cast<Eigen::Index>(batch.size());
  PemLinearization lin;
  lin.j_f.resize(2 * b, kParamDim);
  lin.errors = pem_residuals(theta, batch);
  for (Eigen::Index i = 0; i < b; ++i) {
    const Transition& t = batch.transitions[static_cast<std::size_t>(i)];
    lin.j_f.middleRows<2>(2 * i) = model_jacobian_row(theta, t.x, t.u);
  }
  return lin;
}

inline ParamDelta pem_delta_from(const PemLinearization& lin, double beta,
                                 double lambda_f) {
  const Matrix normal =
      lin.j_f.transpose() * lin.j_f +
      lambda_f * Matrix::Identity(kParamDim, kParamDim);
  const Vector rhs = lin.j_f.transpose() * lin.errors;
  return beta * normal.ldlt().solve(rhs);
}

/// Regularized Gauss-Newton step beta (Jf'Jf + lambda I)^-1 Jf' e. Only
/// the A, B, b coordinates move; J_f' J_f is singular by construction, so
/// lambda_f must be positive.
inline UpdateStep pem_step(const ParamVector& theta, const Batch& batch,
                           double beta, double lambda_f) {
  if (!(lambda_f > 0.0))
    throw std::invalid_argument(
        "learners: pem_step needs lambda_f > 0 (J_f'J_f is singular by "
        "construction)");
  return UpdateStep{pem_delta_from(pem_linearize(theta, batch), beta, lambda_f),
                    StepKind::pem};
}

}  // namespace rlmpc
