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

// Test-only oracles and generators. Everything here is deliberately
// independent of the solver paths it cross-checks: the QP oracle
// enumerates active sets, gradients come from central differences, and
// the value oracle scans an action grid.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "rlmpc/mpc.hpp"
#include "rlmpc/parameters.hpp"
#include "rlmpc/qp.hpp"

namespace rlmpc::testing {

class TestRng {
 public:
  explicit TestRng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  int uniform_int(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(engine_);
  }

 private:
  std::mt19937_64 engine_;
};

// --------------------------------------------------------------------------
// Random strictly convex QPs with a known feasible point.
// --------------------------------------------------------------------------

inline QpProblem random_qp(TestRng& rng, int max_vars = 6, int max_ineq = 6) {
  const int n = rng.uniform_int(2, max_vars);
  const int me = rng.uniform_int(0, std::max(0, n - 2));
  const int mi = rng.uniform_int(1, max_ineq);

  QpProblem qp;
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
  qp.hessian = m.transpose() * m +
               rng.uniform(0.2, 1.0) * Matrix::Identity(n, n);
  qp.linear_cost = Vector::Zero(n);
  for (int i = 0; i < n; ++i) qp.linear_cost[i] = rng.uniform(-2.0, 2.0);

  Vector feasible(n);
  for (int i = 0; i < n; ++i) feasible[i] = rng.uniform(-1.0, 1.0);

  qp.eq_matrix = Matrix::Zero(me, n);
  qp.eq_rhs = Vector::Zero(me);
  for (int r = 0; r < me; ++r) {
    for (int c = 0; c < n; ++c) qp.eq_matrix(r, c) = rng.uniform(-1.0, 1.0);
    qp.eq_rhs[r] = qp.eq_matrix.row(r).dot(feasible);
  }

  qp.ineq_matrix = Matrix::Zero(mi, n);
  qp.ineq_lower = Vector::Constant(mi, -kInfinity);
  qp.ineq_upper = Vector::Constant(mi, kInfinity);
  for (int r = 0; r < mi; ++r) {
    for (int c = 0; c < n; ++c) qp.ineq_matrix(r, c) = rng.uniform(-1.0, 1.0);
    const double mid = qp.ineq_matrix.row(r).dot(feasible);
    const int shape = rng.uniform_int(0, 2);  // lower only / upper only / both
    if (shape != 1) qp.ineq_lower[r] = mid - rng.uniform(0.0, 1.5);
    if (shape != 0) qp.ineq_upper[r] = mid + rng.uniform(0.0, 1.5);
  }
  return qp;
}

// Brute-force reference: tries every assignment of each inequality row to
// {inactive, at lower, at upper}, solves the equality-constrained KKT
// system for the guess, and keeps the best feasible candidate. For a
// convex QP the optimal active set is among the guesses and every other
// feasible candidate can only score worse.
inline std::optional<double> enumerate_qp_minimum(const QpProblem& qp) {
  const Eigen::Index n = qp.num_vars();
  const Eigen::Index me = qp.num_eq();
  const Eigen::Index mi = qp.num_ineq();

  std::optional<double> best;
  std::vector<int> assign(static_cast<std::size_t>(mi), 0);

  const auto feasible = [&](const Vector& x) {
    if (me > 0 &&
        (qp.eq_matrix * x - qp.eq_rhs).cwiseAbs().maxCoeff() > 1e-8)
      return false;
    for (Eigen::Index j = 0; j < mi; ++j) {
      const double ax = qp.ineq_matrix.row(j).dot(x);
      if (ax < qp.ineq_lower[j] - 1e-8 || ax > qp.ineq_upper[j] + 1e-8)
        return false;
    }
    return true;
  };

  const long total = static_cast<long>(std::pow(3.0, static_cast<double>(mi)));
  for (long code = 0; code < total; ++code) {
    long c = code;
    bool valid = true;
    std::vector<Eigen::Index> act;
    std::vector<double> act_rhs;
    for (Eigen::Index j = 0; j < mi; ++j, c /= 3) {
      assign[static_cast<std::size_t>(j)] = static_cast<int>(c % 3);
      if (assign[static_cast<std::size_t>(j)] == 1) {
        if (!std::isfinite(qp.ineq_lower[j])) { valid = false; break; }
        act.push_back(j);
        act_rhs.push_back(qp.ineq_lower[j]);
      } else if (assign[static_cast<std::size_t>(j)] == 2) {
        if (!std::isfinite(qp.ineq_upper[j])) { valid = false; break; }
        act.push_back(j);
        act_rhs.push_back(qp.ineq_upper[j]);
      }
    }
    if (!valid) continue;

    const Eigen::Index ma = me + static_cast<Eigen::Index>(act.size());
    Matrix kkt = Matrix::Zero(n + ma, n + ma);
    Vector rhs(n + ma);
    kkt.topLeftCorner(n, n) = qp.hessian;
    rhs.head(n) = -qp.linear_cost;
    if (me > 0) {
      kkt.block(n, 0, me, n) = qp.eq_matrix;
      kkt.block(0, n, n, me) = qp.eq_matrix.transpose();
      rhs.segment(n, me) = qp.eq_rhs;
    }
    for (std::size_t k = 0; k < act.size(); ++k) {
      const Eigen::Index r = n + me + static_cast<Eigen::Index>(k);
      kkt.row(r).head(n) = qp.ineq_matrix.row(act[k]);
      kkt.col(r).head(n) = qp.ineq_matrix.row(act[k]).transpose();
      rhs[r] = act_rhs[k];
    }

    const Vector sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    if ((kkt * sol - rhs).cwiseAbs().maxCoeff() >
        1e-9 * (1.0 + rhs.cwiseAbs().maxCoeff()))
      continue;  // inconsistent guess
    const Vector x = sol.head(n);
    if (!feasible(x)) continue;
    const double obj =
        0.5 * x.dot(qp.hessian * x) + qp.linear_cost.dot(x);
    if (!best || obj < *best) best = obj;
  }
  return best;
}

// --------------------------------------------------------------------------
// Random controller parameters that keep the MPC well posed.
// --------------------------------------------------------------------------

inline ParamVector random_theta(TestRng& rng) {
  ParamVector theta;
  theta.v0 = rng.uniform(-1.0, 1.0);
  for (int i = 0; i < 3; ++i) theta.f_mod[i] = rng.uniform(-0.3, 0.3);
  Eigen::Matrix2d r;
  r << rng.uniform(-0.7, 0.7), rng.uniform(-0.7, 0.7),
       rng.uniform(-0.7, 0.7), rng.uniform(-0.7, 0.7);
  theta.s_term = r * r.transpose() + 0.2 * Eigen::Matrix2d::Identity();
  theta.a_mat << 1.0 + rng.uniform(-0.15, 0.1), 0.25 + rng.uniform(-0.15, 0.15),
                 rng.uniform(-0.1, 0.1), 1.0 + rng.uniform(-0.15, 0.1);
  theta.b_mat << 0.0312 + rng.uniform(-0.05, 0.05),
                 0.25 + rng.uniform(-0.1, 0.1);
  theta.b_aff << rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05);
  for (int j = 0; j < 2; ++j) {
    theta.x_lb_mod[j] = rng.uniform(-0.2, 0.2);
    theta.x_ub_mod[j] = rng.uniform(-0.2, 0.2);
  }
  return theta;
}

inline Eigen::Vector2d random_state(TestRng& rng) {
  return Eigen::Vector2d(rng.uniform(-0.2, 1.2), rng.uniform(-1.2, 1.2));
}

// --------------------------------------------------------------------------
// Finite differences and grid search oracles.
// --------------------------------------------------------------------------

inline ParamDelta fd_grad_q(const ParamVector& theta, const MpcConfig& cfg,
                            const Eigen::Vector2d& s, double a,
                            double h = 1e-5) {
  ParamDelta grad;
  const ParamDelta base = theta.flatten();
  for (int k = 0; k < kParamDim; ++k) {
    ParamDelta up = base, dn = base;
    up[k] += h;
    dn[k] -= h;
    const double qu =
        action_value(ParamVector::unflatten(up), cfg, s, a).objective;
    const double qd =
        action_value(ParamVector::unflatten(dn), cfg, s, a).objective;
    grad[k] = (qu - qd) / (2.0 * h);
  }
  return grad;
}

inline Eigen::Matrix<double, 2, kParamDim> fd_model_jacobian(
    const ParamVector& theta, const Eigen::Vector2d& x, double u,
    double h = 1e-6) {
  Eigen::Matrix<double, 2, kParamDim> jac;
  const ParamDelta base = theta.flatten();
  for (int k = 0; k < kParamDim; ++k) {
    ParamDelta up = base, dn = base;
    up[k] += h;
    dn[k] -= h;
    const Eigen::Vector2d fu = model_predict(ParamVector::unflatten(up), x, u);
    const Eigen::Vector2d fd = model_predict(ParamVector::unflatten(dn), x, u);
    jac.col(k) = (fu - fd) / (2.0 * h);
  }
  return jac;
}

struct GridMin {
  double action = 0.0;
  double q_value = std::numeric_limits<double>::infinity();
};

// Refined grid search for min_a Q(s, a) over [-1, 1]: coarse 0.1 grid,
// three local refinements, then a parabolic vertex through the winner.
inline GridMin grid_min_action_value(const ParamVector& theta,
                                     const MpcConfig& cfg,
                                     const Eigen::Vector2d& s) {
  const auto q = [&](double a) {
    return action_value(theta, cfg, s, a).objective;
  };
  GridMin best;
  double lo = cfg.u_lower, hi = cfg.u_upper, step = 0.1;
  for (int round = 0; round < 4; ++round) {
    for (double a = lo; a <= hi + 1e-12; a += step) {
      const double v = q(std::clamp(a, cfg.u_lower, cfg.u_upper));
      if (v < best.q_value) {
        best.q_value = v;
        best.action = std::clamp(a, cfg.u_lower, cfg.u_upper);
      }
    }
    lo = std::max(cfg.u_lower, best.action - step);
    hi = std::min(cfg.u_upper, best.action + step);
    step /= 10.0;
  }
  // parabolic vertex through the final neighbors, clipped to the bounds
  const double h = step * 10.0;
  const double am = std::max(cfg.u_lower, best.action - h);
  const double ap = std::min(cfg.u_upper, best.action + h);
  if (ap - am > 1e-9) {
    const double fm = q(am), f0 = best.q_value, fp = q(ap);
    const double denom = fm - 2.0 * f0 + fp;
    if (std::abs(denom) > 1e-14) {
      const double vertex =
          best.action + 0.5 * h * (fm - fp) / denom;
      const double va = std::clamp(vertex, cfg.u_lower, cfg.u_upper);
      const double fv = q(va);
      if (fv < best.q_value) {
        best.q_value = fv;
        best.action = va;
      }
    }
  }
  return best;
}

}  // namespace rlmpc::testing
