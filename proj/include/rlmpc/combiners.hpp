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

// Strategies for combining the TD (RL) parameter step with the
// prediction-error (model-fit) step when both act on the same parameter
// vector:
//
//   baseline      RL step only
//   sum           weighted sum of both raw steps
//   parallel      model step projected along the RL step direction
//   orthogonal    model step projected orthogonally to the RL step
//   nullspace     model step projected into the nullspace of the RL
//                 Gauss-Newton matrix
//   svp           model step projected onto the span of the p smallest
//                 singular directions of the RL Gauss-Newton matrix
//   hierarchical  quasi-Newton step on the KKT system of "minimize the
//                 model objective subject to stationarity of the RL
//                 objective", with regularized inverses
//
// The scaling by alpha / beta happens here and only here; the raw learner
// steps passed in carry unit scale.

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>

#include "rlmpc/learners.hpp"

namespace rlmpc {

enum class CombineMethod {
  baseline,
  sum,
  hierarchical,
  parallel,
  orthogonal,
  nullspace,
  svp,
};

inline const char* method_name(CombineMethod m) {
  switch (m) {
    case CombineMethod::baseline: return "baseline";
    case CombineMethod::sum: return "sum";
    case CombineMethod::hierarchical: return "hierarchical";
    case CombineMethod::parallel: return "parallel";
    case CombineMethod::orthogonal: return "orthogonal";
    case CombineMethod::nullspace: return "nullspace";
    case CombineMethod::svp: return "svp";
  }
  return "unknown";
}

inline CombineMethod method_from_name(const std::string& name) {
  for (CombineMethod m :
       {CombineMethod::baseline, CombineMethod::sum, CombineMethod::hierarchical,
        CombineMethod::parallel, CombineMethod::orthogonal,
        CombineMethod::nullspace, CombineMethod::svp}) {
    if (name == method_name(m)) return m;
  }
  throw std::invalid_argument("unknown combiner method: " + name);
}

/// Selection rule for the singular value projection: either a fixed count
/// of smallest singular directions, or every direction whose singular
/// value is below `threshold * sigma_max`.
struct SvpMode {
  enum class Kind { fixed_p, threshold };
  Kind kind = Kind::threshold;
  int p = 0;
  double threshold = 1e-6;
};

struct NullspaceBases {
  Matrix n_basis;  // 19 x k, orthonormal, spans the numerical nullspace
  Matrix f_basis;  // 19 x (19 - k), orthonormal complement
};

/// Splits the eigenspace of a symmetric matrix at `rank_tol * sigma_max`.
inline NullspaceBases nullspace_basis(const Matrix& h, double rank_tol = 1e-8) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  const Vector sigma = es.eigenvalues().cwiseAbs();
  const double sigma_max = sigma.size() ? sigma.maxCoeff() : 0.0;
  const double cut = rank_tol * sigma_max;

  std::vector<Eigen::Index> null_idx, full_idx;
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    (sigma[i] <= cut ? null_idx : full_idx).push_back(i);

  NullspaceBases bases;
  bases.n_basis.resize(h.rows(), static_cast<Eigen::Index>(null_idx.size()));
  bases.f_basis.resize(h.rows(), static_cast<Eigen::Index>(full_idx.size()));
  for (std::size_t c = 0; c < null_idx.size(); ++c)
    bases.n_basis.col(static_cast<Eigen::Index>(c)) =
        es.eigenvectors().col(null_idx[c]);
  for (std::size_t c = 0; c < full_idx.size(); ++c)
    bases.f_basis.col(static_cast<Eigen::Index>(c)) =
        es.eigenvectors().col(full_idx[c]);
  return bases;
}

/// alpha * dq + beta * df.
inline UpdateStep step_sum(const UpdateStep& dq, const UpdateStep& df,
                           double alpha, double beta) {
  return UpdateStep{alpha * dq.delta + beta * df.delta, StepKind::combined};
}

/// Component of df along dq; zero when dq vanishes.
inline UpdateStep step_parallel(const UpdateStep& df, const UpdateStep& dq) {
  const double nq = dq.delta.squaredNorm();
  if (nq <= 1e-24) return UpdateStep{ParamDelta::Zero(), StepKind::pem};
  return UpdateStep{(dq.delta.dot(df.delta) / nq) * dq.delta, StepKind::pem};
}

/// Component of df orthogonal to dq; df itself when dq vanishes.
inline UpdateStep step_orthogonal(const UpdateStep& df, const UpdateStep& dq) {
  return UpdateStep{df.delta - step_parallel(df, dq).delta, StepKind::pem};
}

/// N N' df, the model step restricted to directions the RL quadratic
/// model does not see.
inline UpdateStep step_nullspace(const UpdateStep& df,
                                 const NullspaceBases& bases) {
  if (bases.n_basis.cols() == 0)
    return UpdateStep{ParamDelta::Zero(), StepKind::pem};
  return UpdateStep{bases.n_basis * (bases.n_basis.transpose() * df.delta),
                    StepKind::pem};
}

/// Projection of df onto the span of the selected smallest singular
/// directions of h. In threshold mode the cut is relative to sigma_max;
/// if nothing falls below it the step is zero.
inline UpdateStep step_svp(const UpdateStep& df, const Matrix& h,
                           const SvpMode& mode) {
  if (mode.kind == SvpMode::Kind::fixed_p &&
      (mode.p < 0 || mode.p > static_cast<int>(h.rows())))
    throw std::invalid_argument("svp: p out of range");
  if (mode.kind == SvpMode::Kind::threshold && mode.threshold < 0.0)
    throw std::invalid_argument("svp: negative threshold");

  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  const Vector sigma = es.eigenvalues().cwiseAbs();
  const double sigma_max = sigma.size() ? sigma.maxCoeff() : 0.0;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(sigma.size()));
  for (std::size_t i = 0; i < order.size(); ++i)
    order[i] = static_cast<Eigen::Index>(i);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return sigma[a] < sigma[b]; });

  Eigen::Index take = 0;
  if (mode.kind == SvpMode::Kind::fixed_p) {
    take = mode.p;
  } else {
    const double cut = mode.threshold * sigma_max;
    while (take < sigma.size() && sigma[order[static_cast<std::size_t>(take)]] <= cut)
      ++take;
  }

  ParamDelta out = ParamDelta::Zero();
  for (Eigen::Index c = 0; c < take; ++c) {
    const auto v = es.eigenvectors().col(order[static_cast<std::size_t>(c)]);
    out += v * (v.dot(df.delta));
  }
  return UpdateStep{out, StepKind::pem};
}

namespace combiner_detail {

// Pseudo-inverse of a symmetric PSD matrix at a relative eigenvalue cut.
inline Matrix pinv_psd(const Matrix& m, double rank_tol) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  const Vector ev = es.eigenvalues();
  const double scale = ev.size() ? ev.cwiseAbs().maxCoeff() : 0.0;
  Vector inv = Vector::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (std::abs(ev[i]) > rank_tol * scale && ev[i] != 0.0) inv[i] = 1.0 / ev[i];
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace combiner_detail

/// Components of the hierarchical quasi-Newton step: the step in the RL
/// Hessian's range space, the model step confined to its nullspace, and
/// their sum.
struct HierarchicalStep {
  ParamDelta rl_component = ParamDelta::Zero();
  ParamDelta pem_component = ParamDelta::Zero();
  ParamDelta total = ParamDelta::Zero();
};

/// Exact (pseudo-inverse) form of the hierarchical step, from the
/// gradients and Gauss-Newton Hessians of the two objectives.
inline HierarchicalStep hierarchical_step_exact(const Matrix& hess_rl,
                                                const Vector& grad_rl,
                                                const Matrix& hess_pem,
                                                const Vector& grad_pem,
                                                double rank_tol = 1e-8) {
  using combiner_detail::pinv_psd;
  HierarchicalStep out;
  out.rl_component = -pinv_psd(hess_rl, rank_tol) * grad_rl;

  const NullspaceBases bases = nullspace_basis(hess_rl, rank_tol);
  if (bases.n_basis.cols() > 0) {
    const Matrix core =
        bases.n_basis.transpose() * hess_pem * bases.n_basis;
    const Matrix pinv_perp =
        bases.n_basis * pinv_psd(core, rank_tol) * bases.n_basis.transpose();
    out.pem_component = -pinv_perp * grad_pem +
                        pinv_perp * hess_pem * out.rl_component;
  }
  out.total = out.rl_component + out.pem_component;
  return out;
}

/// Regularized form: the two inverses get lambda terms instead of
/// pseudo-inverse cuts. As printed, the RL solve is regularized by
/// lambda_f and the nullspace-projected model solve by lambda_q;
/// `swap_regularizers` exchanges the two.
inline HierarchicalStep hierarchical_step_regularized(
    const Matrix& hess_rl, const Vector& grad_rl, const Matrix& hess_pem,
    const Vector& grad_pem, double lambda_q, double lambda_f,
    double rank_tol = 1e-8, bool swap_regularizers = false) {
  if (!(lambda_q > 0.0) || !(lambda_f > 0.0))
    throw std::invalid_argument("hierarchical: lambdas must be positive");
  const double reg_rl = swap_regularizers ? lambda_q : lambda_f;
  const double reg_pem = swap_regularizers ? lambda_f : lambda_q;
  const Eigen::Index n = hess_rl.rows();

  HierarchicalStep out;
  out.rl_component =
      -(hess_rl + reg_rl * Matrix::Identity(n, n)).ldlt().solve(grad_rl);

  const NullspaceBases bases = nullspace_basis(hess_rl, rank_tol);
  if (bases.n_basis.cols() > 0) {
    const Matrix core =
        bases.n_basis.transpose() *
        (hess_pem + reg_pem * Matrix::Identity(n, n)) * bases.n_basis;
    const Matrix pinv_perp =
        bases.n_basis * core.ldlt().solve(bases.n_basis.transpose().eval());
    out.pem_component = -pinv_perp * grad_pem +
                        pinv_perp * hess_pem * out.rl_component;
  }
  out.total = out.rl_component + out.pem_component;
  return out;
}

/// Hierarchical step over a batch, Gauss-Newton approximations for both
/// Hessians (grad psi = -J_Q' delta, grad phi = -J_f' e).
inline UpdateStep step_hierarchical(const ParamVector& theta,
                                    const MpcConfig& cfg, const Batch& batch,
                                    double lambda_q, double lambda_f,
                                    double rank_tol = 1e-8,
                                    bool swap_regularizers = false) {
  const RlLinearization rl = rl_linearize(theta, cfg, batch);
  const PemLinearization pem = pem_linearize(theta, batch);
  const Matrix hess_rl = rl.j_q.transpose() * rl.j_q;
  const Vector grad_rl = -rl.j_q.transpose() * rl.errors;
  const Matrix hess_pem = pem.j_f.transpose() * pem.j_f;
  const Vector grad_pem = -pem.j_f.transpose() * pem.errors;
  const HierarchicalStep h = hierarchical_step_regularized(
      hess_rl, grad_rl, hess_pem, grad_pem, lambda_q, lambda_f, rank_tol,
      swap_regularizers);
  return UpdateStep{h.total, StepKind::combined};
}

/// Step sizes and regularizers for one combined update.
struct UpdateHyper {
  double alpha = 0.1;
  double beta = 0.5;
  double lambda_q = 1e-6;
  double lambda_f = 1e-6;
  SvpMode svp;
  double rank_tol = 1e-8;
  bool hier_swap_reg = false;
};

/// Dispatch over the combination strategies from precomputed batch
/// linearizations. `pem` may be absent only for the baseline method.
inline UpdateStep compose_update_from(CombineMethod method,
                                      const RlLinearization& rl,
                                      const std::optional<PemLinearization>& pem,
                                      const UpdateHyper& hyper) {
  const UpdateStep dq{rl_gn_delta_from(rl, 1.0, hyper.lambda_q), StepKind::rl};
  if (method == CombineMethod::baseline)
    return UpdateStep{hyper.alpha * dq.delta, StepKind::rl};

  if (!pem)
    throw std::invalid_argument("compose_update: method needs a PEM step");
  const UpdateStep df{pem_delta_from(*pem, 1.0, hyper.lambda_f), StepKind::pem};

  switch (method) {
    case CombineMethod::sum:
      return step_sum(dq, df, hyper.alpha, hyper.beta);
    case CombineMethod::parallel:
      return UpdateStep{hyper.alpha * dq.delta +
                            hyper.beta * step_parallel(df, dq).delta,
                        StepKind::combined};
    case CombineMethod::orthogonal:
      return UpdateStep{hyper.alpha * dq.delta +
                            hyper.beta * step_orthogonal(df, dq).delta,
                        StepKind::combined};
    case CombineMethod::nullspace: {
      const Matrix h = rl.j_q.transpose() * rl.j_q;
      const NullspaceBases bases = nullspace_basis(h, hyper.rank_tol);
      return UpdateStep{hyper.alpha * dq.delta +
                            hyper.beta * step_nullspace(df, bases).delta,
                        StepKind::combined};
    }
    case CombineMethod::svp: {
      const Matrix h = rl.j_q.transpose() * rl.j_q;
      return UpdateStep{hyper.alpha * dq.delta +
                            hyper.beta * step_svp(df, h, hyper.svp).delta,
                        StepKind::combined};
    }
    case CombineMethod::hierarchical: {
      const Matrix hess_rl = rl.j_q.transpose() * rl.j_q;
      const Vector grad_rl = -rl.j_q.transpose() * rl.errors;
      const Matrix hess_pem = pem->j_f.transpose() * pem->j_f;
      const Vector grad_pem = -pem->j_f.transpose() * pem->errors;
      const HierarchicalStep h = hierarchical_step_regularized(
          hess_rl, grad_rl, hess_pem, grad_pem, hyper.lambda_q, hyper.lambda_f,
          hyper.rank_tol, hyper.hier_swap_reg);
      return UpdateStep{hyper.alpha * h.total, StepKind::combined};
    }
    case CombineMethod::baseline:
      break;  // handled above
  }
  throw std::logic_error("compose_update: unhandled method");
}

/// One combined parameter update for the chosen method. The baseline
/// method touches no model-fit code.
inline UpdateStep compose_update(CombineMethod method, const ParamVector& theta,
                                 const MpcConfig& cfg, const Batch& batch,
                                 const UpdateHyper& hyper) {
  const RlLinearization rl = rl_linearize(theta, cfg, batch);
  std::optional<PemLinearization> pem;
  if (method != CombineMethod::baseline) pem = pem_linearize(theta, batch);
  return compose_update_from(method, rl, pem, hyper);
}

}  // namespace rlmpc
