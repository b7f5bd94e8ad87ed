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

// Dense convex quadratic programming:
//
//   minimize    1/2 x'Hx + g'x
//   subject to  Ae x = be
//               l <= Ai x <= u      (entries of l, u may be +-inf)
//
// solved with a primal active-set method. Each iteration solves the
// equality-constrained subproblem on the working set through the KKT
// system (LU fast path); when the reduced Hessian is singular, a
// nullspace/eigenvalue path handles zero-curvature directions and
// unbounded rays. Infeasible starts go through a phase-I subproblem
// that minimizes the squared worst constraint violation, so no big-M
// constant enters the arithmetic.
//
// Sized for small dense problems (tens of variables). Exact working-set
// duals are reported: >= 0 for an active upper bound, <= 0 for an active
// lower bound, with equality duals following the Lagrangian
// L = f + lambda'(Ae x - be) + mu'(Ai x - bound).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace rlmpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class QpStatus { optimal, infeasible, max_iter };

struct QpProblem {
  Matrix hessian;      // n x n, symmetric PSD
  Vector linear_cost;  // n
  Matrix eq_matrix;    // me x n
  Vector eq_rhs;       // me
  Matrix ineq_matrix;  // mi x n
  Vector ineq_lower;   // mi
  Vector ineq_upper;   // mi

  Eigen::Index num_vars() const { return linear_cost.size(); }
  Eigen::Index num_eq() const { return eq_rhs.size(); }
  Eigen::Index num_ineq() const { return ineq_lower.size(); }
};

struct QpSolution {
  Vector primal;
  Vector eq_duals;
  Vector ineq_duals;  // >= 0 when the upper side is active, <= 0 for lower
  double objective = 0.0;
  QpStatus status = QpStatus::max_iter;
  double kkt_residual = kInfinity;
};

namespace qp_detail {

// One-sided row a'x <= rhs. side = +1 encodes the upper side of source
// inequality `source`, side = -1 the lower side (stored negated).
struct Row {
  Vector coeffs;
  double rhs = 0.0;
  int source = -1;
  int side = 0;
};

inline double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline void validate(const QpProblem& p) {
  const Eigen::Index n = p.num_vars();
  if (p.hessian.rows() != n || p.hessian.cols() != n)
    throw std::invalid_argument("qp: hessian dimension mismatch");
  if (p.eq_matrix.rows() != p.num_eq() ||
      (p.num_eq() > 0 && p.eq_matrix.cols() != n))
    throw std::invalid_argument("qp: equality block dimension mismatch");
  if (p.ineq_matrix.rows() != p.num_ineq() ||
      p.ineq_upper.size() != p.num_ineq() ||
      (p.num_ineq() > 0 && p.ineq_matrix.cols() != n))
    throw std::invalid_argument("qp: inequality block dimension mismatch");

  const double scale = std::max(1.0, max_abs(p.hessian));
  const double asym = max_abs(p.hessian - p.hessian.transpose());
  if (asym > 1e-12 * scale)
    throw std::invalid_argument("qp: hessian is not symmetric");
  if (n > 0) {
    // cheap pivoted-Cholesky screen; the eigensolver confirms rejections
    const Eigen::LDLT<Matrix> ldlt(p.hessian);
    if (ldlt.info() != Eigen::Success ||
        ldlt.vectorD().minCoeff() < -1e-10 * scale) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(p.hessian,
                                               Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() < -1e-10 * scale)
        throw std::invalid_argument(
            "qp: hessian is not positive semidefinite");
    }
  }
  for (Eigen::Index j = 0; j < p.num_ineq(); ++j) {
    if (p.ineq_lower[j] > p.ineq_upper[j])
      throw std::invalid_argument("qp: crossed inequality bounds");
  }
}

// Greedily keeps rows that are linearly independent of the rows already
// held in `basis` (orthonormal, one column per accepted row).
class IndependenceFilter {
 public:
  explicit IndependenceFilter(Eigen::Index dim) : basis_(dim, 0) {}

  bool try_add(const Vector& row) {
    Vector r = row;
    for (Eigen::Index c = 0; c < basis_.cols(); ++c)
      r -= basis_.col(c).dot(r) * basis_.col(c);
    // second orthogonalization pass for numerical safety
    for (Eigen::Index c = 0; c < basis_.cols(); ++c)
      r -= basis_.col(c).dot(r) * basis_.col(c);
    const double norm = r.norm();
    if (norm <= 1e-10 * std::max(1.0, row.norm())) return false;
    basis_.conservativeResize(Eigen::NoChange, basis_.cols() + 1);
    basis_.col(basis_.cols() - 1) = r / norm;
    return true;
  }

 private:
  Matrix basis_;
};

struct ActiveSetResult {
  Vector x;
  Vector eq_duals;            // one per equality row
  std::vector<double> row_duals;  // one per one-sided row, >= 0 if active
  bool optimal = false;
  bool unbounded = false;
};

// Primal active-set loop over   min 1/2 x'Hx + g'x
//                               s.t. Aeq x = beq, rows[j].a'x <= rows[j].rhs
// starting from a feasible x0.
//
// Each iteration solves the equality-constrained subproblem on the working
// set. The KKT matrix is factorized once per "base" working set; adding a
// constraint appends a bordered column, and removing a base constraint
// appends a unit border that zeroes its multiplier and releases its row, so
// most iterations cost two triangular solves instead of a factorization.
// When the KKT system is singular (zero-curvature subspace), a nullspace/
// eigenvalue path takes over and can emit unbounded descent rays.
class ActiveSetSolver {
 public:
  ActiveSetSolver(const Matrix& h, const Vector& g, const Matrix& aeq,
                  const Vector& beq, const std::vector<Row>& rows)
      : h_(h), g_(g), aeq_(aeq), beq_(beq), rows_(rows), n_(g.size()),
        me_(aeq.rows()) {}

  ActiveSetResult run(const Vector& x0, int max_iter) {
    ActiveSetResult res;
    res.x = x0;
    res.row_duals.assign(rows_.size(), 0.0);

    in_working_.assign(rows_.size(), 0);
    working_.clear();
    pick_initial_working_set(res.x);
    refactorize();

    for (int iter = 0; iter < max_iter; ++iter) {
      const bool bland = iter > (3 * max_iter) / 4;

      Vector x_eqp, eta;  // eta: duals aligned with [equalities; working_]
      bool ray = false;
      Vector p;
      if (solve_working_kkt(x_eqp, eta)) {
        p = x_eqp - res.x;
      } else if (!nullspace_step(res.x, p, ray, eta)) {
        res.unbounded = true;
        return res;
      }

      const double step_norm = p.size() ? p.cwiseAbs().maxCoeff() : 0.0;
      if (!ray && step_norm <= 1e-11 * (1.0 + res.x.cwiseAbs().maxCoeff())) {
        // Stationary on the working set: check multiplier signs.
        const double eta_scale = eta.size() ? eta.cwiseAbs().maxCoeff() : 0.0;
        int drop = -1;
        double most_negative = -1e-10 * (1.0 + eta_scale);
        for (std::size_t k = 0; k < working_.size(); ++k) {
          const double d = eta[me_ + static_cast<Eigen::Index>(k)];
          if (d < most_negative) {
            if (bland) {  // smallest row index wins under Bland's rule
              if (drop == -1 || working_[k] < working_[drop])
                drop = static_cast<int>(k);
            } else {
              most_negative = d;
              drop = static_cast<int>(k);
            }
          }
        }
        if (drop == -1) {
          res.eq_duals = eta.head(me_);
          for (std::size_t k = 0; k < working_.size(); ++k)
            res.row_duals[working_[k]] =
                std::max(0.0, eta[me_ + static_cast<Eigen::Index>(k)]);
          res.optimal = true;
          return res;
        }
        remove_working(drop);
        continue;
      }

      // Line search to the nearest blocking row.
      double alpha = ray ? kInfinity : 1.0;
      int blocking = -1;
      for (std::size_t j = 0; j < rows_.size(); ++j) {
        if (in_working_[j]) continue;
        const double d = rows_[j].coeffs.dot(p);
        if (d <= 1e-13 * (1.0 + step_norm)) continue;
        const double slack = rows_[j].rhs - rows_[j].coeffs.dot(res.x);
        const double a = std::max(0.0, slack) / d;
        if (a < alpha - 1e-14 * (1.0 + alpha)) {
          alpha = a;
          blocking = static_cast<int>(j);
        } else if (blocking >= 0 && a <= alpha + 1e-14 * (1.0 + alpha) &&
                   bland && static_cast<int>(j) < blocking) {
          blocking = static_cast<int>(j);
        }
      }
      if (ray && blocking == -1) {
        res.unbounded = true;
        return res;
      }
      res.x += alpha * p;
      if (blocking >= 0) add_working(blocking);
    }
    return res;  // max_iter: res.optimal stays false
  }

 private:
  struct Border {
    bool is_add = true;  // add: new constraint column; drop: released base row
    int payload = -1;    // add: rows_ index; drop: position within base_
    Vector col;          // border column in K0 coordinates
    Vector w;            // K0^{-1} col
    double rhs = 0.0;
  };

  void pick_initial_working_set(const Vector& x) {
    IndependenceFilter filter(n_);
    for (Eigen::Index i = 0; i < me_; ++i)
      filter.try_add(aeq_.row(i).transpose());
    for (std::size_t j = 0; j < rows_.size(); ++j) {
      const double slack = rows_[j].rhs - rows_[j].coeffs.dot(x);
      if (std::abs(slack) <= 1e-10 * (1.0 + std::abs(rows_[j].rhs)) &&
          filter.try_add(rows_[j].coeffs)) {
        in_working_[j] = 1;
        working_.push_back(static_cast<int>(j));
      }
    }
  }

  // Rebuilds the base KKT factorization from the current working set.
  void refactorize() {
    base_ = working_;
    borders_.clear();
    const Eigen::Index m0 = me_ + static_cast<Eigen::Index>(base_.size());
    Matrix kkt = Matrix::Zero(n_ + m0, n_ + m0);
    kkt.topLeftCorner(n_, n_) = h_;
    kkt.block(n_, 0, me_, n_) = aeq_;
    kkt.block(0, n_, n_, me_) = aeq_.transpose();
    rhs0_.resize(n_ + m0);
    rhs0_.head(n_) = -g_;
    rhs0_.segment(n_, me_) = beq_;
    for (std::size_t k = 0; k < base_.size(); ++k) {
      const Eigen::Index r = n_ + me_ + static_cast<Eigen::Index>(k);
      kkt.row(r).head(n_) = rows_[base_[k]].coeffs.transpose();
      kkt.col(r).head(n_) = rows_[base_[k]].coeffs;
      rhs0_[r] = rows_[base_[k]].rhs;
    }
    lu_.compute(kkt);
    y0_ = lu_.solve(rhs0_);
    y0_ += lu_.solve(rhs0_ - kkt * y0_);
    const double resid = (kkt * y0_ - rhs0_).cwiseAbs().maxCoeff();
    const double scale = 1.0 + rhs0_.cwiseAbs().maxCoeff() +
                         max_abs(kkt) * y0_.cwiseAbs().maxCoeff();
    base_ok_ = resid <= 1e-9 * scale;
    kkt0_ = std::move(kkt);
  }

  void add_working(int row) {
    in_working_[row] = 1;
    working_.push_back(row);
    if (!base_ok_) {
      refactorize();
      return;
    }
    // a previously dropped base row returning: cancel its drop border
    for (std::size_t i = 0; i < borders_.size(); ++i) {
      if (!borders_[i].is_add && base_[static_cast<std::size_t>(
                                     borders_[i].payload)] == row) {
        borders_.erase(borders_.begin() + static_cast<std::ptrdiff_t>(i));
        rebuild_schur();
        return;
      }
    }
    Border b;
    b.is_add = true;
    b.payload = row;
    b.col = Vector::Zero(y0_.size());
    b.col.head(n_) = rows_[row].coeffs;
    b.rhs = rows_[row].rhs;
    b.w = lu_.solve(b.col);
    borders_.push_back(std::move(b));
    rebuild_schur();
    if (borders_.size() > 12) refactorize();
  }

  void remove_working(int k) {
    const int row = working_[static_cast<std::size_t>(k)];
    in_working_[row] = 0;
    working_.erase(working_.begin() + k);
    if (!base_ok_) {
      refactorize();
      return;
    }
    // an added border leaving again: remove its column
    for (std::size_t i = 0; i < borders_.size(); ++i) {
      if (borders_[i].is_add && borders_[i].payload == row) {
        borders_.erase(borders_.begin() + static_cast<std::ptrdiff_t>(i));
        rebuild_schur();
        return;
      }
    }
    // release a base row: unit border forcing its multiplier to zero
    int pos = -1;
    for (std::size_t i = 0; i < base_.size(); ++i)
      if (base_[i] == row) pos = static_cast<int>(i);
    if (pos < 0) {
      refactorize();
      return;
    }
    Border b;
    b.is_add = false;
    b.payload = pos;
    b.col = Vector::Zero(y0_.size());
    b.col[n_ + me_ + pos] = 1.0;
    b.rhs = 0.0;
    b.w = lu_.solve(b.col);
    borders_.push_back(std::move(b));
    rebuild_schur();
    if (borders_.size() > 12) refactorize();
  }

  void rebuild_schur() {
    const Eigen::Index j = static_cast<Eigen::Index>(borders_.size());
    schur_.resize(j, j);
    for (Eigen::Index a = 0; a < j; ++a)
      for (Eigen::Index b = 0; b < j; ++b)
        schur_(a, b) = borders_[static_cast<std::size_t>(a)].col.dot(
            borders_[static_cast<std::size_t>(b)].w);
  }

  // Duals for the bordered system, aligned with [equalities; working_].
  bool solve_working_kkt(Vector& x_eqp, Vector& eta) {
    if (!base_ok_) return false;

    Vector y;
    Vector z = Vector::Zero(static_cast<Eigen::Index>(borders_.size()));
    if (borders_.empty()) {
      y = y0_;
    } else {
      const Eigen::Index j = static_cast<Eigen::Index>(borders_.size());
      Vector rhs2(j);
      for (Eigen::Index i = 0; i < j; ++i)
        rhs2[i] = borders_[static_cast<std::size_t>(i)].col.dot(y0_) -
                  borders_[static_cast<std::size_t>(i)].rhs;
      Eigen::PartialPivLU<Matrix> slu(schur_);
      z = slu.solve(rhs2);
      const double resid = (schur_ * z - rhs2).cwiseAbs().maxCoeff();
      if (!(resid <= 1e-9 * (1.0 + rhs2.cwiseAbs().maxCoeff() +
                             max_abs(schur_) * z.cwiseAbs().maxCoeff())))
        return false;  // singular reduced system, use the nullspace path
      y = y0_;
      for (Eigen::Index i = 0; i < j; ++i)
        y -= z[i] * borders_[static_cast<std::size_t>(i)].w;
    }

    x_eqp = y.head(n_);
    eta.resize(me_ + static_cast<Eigen::Index>(working_.size()));
    eta.head(me_) = y.segment(n_, me_);
    for (std::size_t k = 0; k < working_.size(); ++k) {
      const int row = working_[k];
      double d = 0.0;
      bool found = false;
      for (std::size_t i = 0; i < borders_.size() && !found; ++i) {
        if (borders_[i].is_add && borders_[i].payload == row) {
          d = z[static_cast<Eigen::Index>(i)];
          found = true;
        }
      }
      if (!found) {
        for (std::size_t i = 0; i < base_.size() && !found; ++i) {
          if (base_[i] == row) {
            d = y[n_ + me_ + static_cast<Eigen::Index>(i)];
            found = true;
          }
        }
      }
      if (!found) return false;  // bookkeeping failure; fall back
      eta[me_ + static_cast<Eigen::Index>(k)] = d;
    }
    return true;
  }

  // Assembles the working constraint matrix explicitly and resolves the
  // singular subproblem through the nullspace of the constraints. Returns
  // false when the subproblem is unbounded below.
  bool nullspace_step(const Vector& x, Vector& p, bool& ray, Vector& eta) {
    ray = false;
    const Eigen::Index mw = me_ + static_cast<Eigen::Index>(working_.size());
    Matrix aw(mw, n_);
    aw.topRows(me_) = aeq_;
    for (std::size_t k = 0; k < working_.size(); ++k)
      aw.row(me_ + static_cast<Eigen::Index>(k)) =
          rows_[working_[k]].coeffs.transpose();

    Eigen::ColPivHouseholderQR<Matrix> qr(aw.transpose());
    const Eigen::Index rank = qr.rank();
    Matrix q = qr.householderQ() * Matrix::Identity(n_, n_);
    Matrix zb = q.rightCols(n_ - rank);

    Vector grad = h_ * x + g_;
    if (zb.cols() == 0) {
      p = Vector::Zero(n_);
      eta = qr.solve(-grad);
      return true;
    }

    Matrix red = zb.transpose() * h_ * zb;
    Vector red_grad = zb.transpose() * grad;
    Eigen::SelfAdjointEigenSolver<Matrix> es(red);
    const Vector& evals = es.eigenvalues();
    const Matrix& evecs = es.eigenvectors();
    const double eig_scale = std::max(1.0, evals.cwiseAbs().maxCoeff());

    Vector null_grad = Vector::Zero(zb.cols());
    Vector newton = Vector::Zero(zb.cols());
    for (Eigen::Index i = 0; i < evals.size(); ++i) {
      const double c = evecs.col(i).dot(red_grad);
      if (evals[i] <= 1e-11 * eig_scale) {
        null_grad += c * evecs.col(i);
      } else {
        newton -= (c / evals[i]) * evecs.col(i);
      }
    }

    if (null_grad.cwiseAbs().maxCoeff() >
        1e-11 * (1.0 + red_grad.cwiseAbs().maxCoeff())) {
      p = zb * (-null_grad);  // zero curvature, strictly decreasing cost
      ray = true;
      return true;
    }

    p = zb * newton;
    if (p.cwiseAbs().maxCoeff() <= 1e-11 * (1.0 + x.cwiseAbs().maxCoeff())) {
      eta = qr.solve(-grad);
      p = Vector::Zero(n_);
    }
    return true;
  }

  const Matrix& h_;
  const Vector& g_;
  const Matrix& aeq_;
  const Vector& beq_;
  const std::vector<Row>& rows_;
  Eigen::Index n_;
  Eigen::Index me_;

  std::vector<char> in_working_;
  std::vector<int> working_;

  std::vector<int> base_;  // working rows pinned in the base factorization
  Matrix kkt0_;
  Eigen::PartialPivLU<Matrix> lu_;
  Vector rhs0_;
  Vector y0_;
  bool base_ok_ = false;
  std::vector<Border> borders_;
  Matrix schur_;
};

inline std::vector<Row> build_rows(const QpProblem& p) {
  std::vector<Row> rows;
  rows.reserve(static_cast<std::size_t>(2 * p.num_ineq()));
  for (Eigen::Index j = 0; j < p.num_ineq(); ++j) {
    if (std::isfinite(p.ineq_upper[j])) {
      Row r;
      r.coeffs = p.ineq_matrix.row(j).transpose();
      r.rhs = p.ineq_upper[j];
      r.source = static_cast<int>(j);
      r.side = +1;
      rows.push_back(std::move(r));
    }
    if (std::isfinite(p.ineq_lower[j])) {
      Row r;
      r.coeffs = -p.ineq_matrix.row(j).transpose();
      r.rhs = -p.ineq_lower[j];
      r.source = static_cast<int>(j);
      r.side = -1;
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

inline double worst_violation(const QpProblem& p, const Vector& x) {
  double v = 0.0;
  if (p.num_eq() > 0)
    v = (p.eq_matrix * x - p.eq_rhs).cwiseAbs().maxCoeff();
  for (Eigen::Index j = 0; j < p.num_ineq(); ++j) {
    const double ax = p.ineq_matrix.row(j).dot(x);
    if (std::isfinite(p.ineq_lower[j])) v = std::max(v, p.ineq_lower[j] - ax);
    if (std::isfinite(p.ineq_upper[j])) v = std::max(v, ax - p.ineq_upper[j]);
  }
  return v;
}

inline double kkt_residual(const QpProblem& p, const Vector& x,
                           const Vector& eq_duals, const Vector& ineq_duals) {
  Vector stat = p.hessian * x + p.linear_cost;
  if (p.num_eq() > 0) stat += p.eq_matrix.transpose() * eq_duals;
  if (p.num_ineq() > 0) stat += p.ineq_matrix.transpose() * ineq_duals;
  double res = stat.size() ? stat.cwiseAbs().maxCoeff() : 0.0;

  if (p.num_eq() > 0)
    res = std::max(res, (p.eq_matrix * x - p.eq_rhs).cwiseAbs().maxCoeff());
  for (Eigen::Index j = 0; j < p.num_ineq(); ++j) {
    const double ax = p.ineq_matrix.row(j).dot(x);
    if (std::isfinite(p.ineq_lower[j]))
      res = std::max(res, p.ineq_lower[j] - ax);
    if (std::isfinite(p.ineq_upper[j]))
      res = std::max(res, ax - p.ineq_upper[j]);
    const double mu = ineq_duals[j];
    if (mu > 0.0) res = std::max(res, mu * std::abs(ax - p.ineq_upper[j]));
    if (mu < 0.0) res = std::max(res, -mu * std::abs(ax - p.ineq_lower[j]));
  }
  return res;
}

// Phase I: minimize t^2 over (x, t) subject to the elastic constraints
// l - t <= Ai x <= u + t, Ae x = be, t >= 0. The optimal t is zero exactly
// when the original problem is feasible, and the x part is then feasible.
inline bool phase_one(const QpProblem& p, Vector& x_feasible) {
  const Eigen::Index n = p.num_vars();

  Vector x0 = Vector::Zero(n);
  if (p.num_eq() > 0) {
    x0 = p.eq_matrix.completeOrthogonalDecomposition().solve(p.eq_rhs);
    const double eq_res = (p.eq_matrix * x0 - p.eq_rhs).cwiseAbs().maxCoeff();
    if (eq_res > 1e-9 * (1.0 + p.eq_rhs.cwiseAbs().maxCoeff()))
      return false;  // inconsistent equalities
  }

  double t0 = 0.0;
  for (Eigen::Index j = 0; j < p.num_ineq(); ++j) {
    const double ax = p.ineq_matrix.row(j).dot(x0);
    if (std::isfinite(p.ineq_lower[j])) t0 = std::max(t0, p.ineq_lower[j] - ax);
    if (std::isfinite(p.ineq_upper[j])) t0 = std::max(t0, ax - p.ineq_upper[j]);
  }
  if (t0 <= 1e-11) {
    x_feasible = x0;
    return true;
  }

  Matrix h = Matrix::Zero(n + 1, n + 1);
  h(n, n) = 2.0;
  Vector g = Vector::Zero(n + 1);
  Matrix aeq(p.num_eq(), n + 1);
  if (p.num_eq() > 0) {
    aeq.leftCols(n) = p.eq_matrix;
    aeq.col(n).setZero();
  }

  std::vector<Row> rows = build_rows(p);
  for (Row& r : rows) {
    Vector ext(n + 1);
    ext.head(n) = r.coeffs;
    ext[n] = -1.0;  // elastic relaxation
    r.coeffs = std::move(ext);
  }
  Row tbound;
  tbound.coeffs = Vector::Zero(n + 1);
  tbound.coeffs[n] = -1.0;  // -t <= 0
  tbound.rhs = 0.0;
  rows.push_back(std::move(tbound));

  Vector start(n + 1);
  start.head(n) = x0;
  start[n] = t0;

  ActiveSetSolver solver(h, g, aeq, p.eq_rhs, rows);
  const int max_iter =
      200 + 10 * static_cast<int>(n + 1 + static_cast<Eigen::Index>(rows.size()));
  ActiveSetResult res = solver.run(start, max_iter);
  if (!res.optimal) return false;
  if (res.x[n] > 1e-8 * (1.0 + t0)) return false;
  x_feasible = res.x.head(n);
  return true;
}

}  // namespace qp_detail

/// Solves a dense convex QP from an optional feasible starting point.
/// The start is used when it satisfies all constraints to ~1e-9; otherwise
/// a phase-I subproblem computes one. Infeasibility is reported through
/// `status`, never thrown; invalid inputs (asymmetric or indefinite
/// Hessian, mismatched dimensions, crossed bounds) throw.
inline QpSolution solve_qp(const QpProblem& problem, const Vector* start = nullptr) {
  using namespace qp_detail;
  validate(problem);

  const Eigen::Index n = problem.num_vars();
  QpSolution sol;
  sol.eq_duals = Vector::Zero(problem.num_eq());
  sol.ineq_duals = Vector::Zero(problem.num_ineq());

  Vector x0;
  bool have_start = false;
  if (start != nullptr && start->size() == n &&
      worst_violation(problem, *start) <= 1e-9) {
    x0 = *start;
    have_start = true;
  }
  if (!have_start && !phase_one(problem, x0)) {
    sol.primal = Vector::Zero(n);
    sol.status = QpStatus::infeasible;
    sol.objective = 0.0;
    return sol;
  }

  std::vector<Row> rows = build_rows(problem);
  ActiveSetSolver solver(problem.hessian, problem.linear_cost,
                         problem.eq_matrix, problem.eq_rhs, rows);
  const int max_iter =
      200 + 10 * static_cast<int>(n + static_cast<Eigen::Index>(rows.size()));
  ActiveSetResult res = solver.run(x0, max_iter);

  sol.primal = res.x;
  sol.objective = 0.5 * res.x.dot(problem.hessian * res.x) +
                  problem.linear_cost.dot(res.x);
  if (!res.optimal) {
    sol.status = QpStatus::max_iter;
    return sol;
  }

  sol.eq_duals = res.eq_duals;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Row& r = rows[k];
    if (r.source < 0) continue;
    // upper rows add +mu, lower rows were negated so their dual enters with -1
    sol.ineq_duals[r.source] += static_cast<double>(r.side) * res.row_duals[k];
  }
  sol.status = QpStatus::optimal;
  sol.kkt_residual =
      kkt_residual(problem, sol.primal, sol.eq_duals, sol.ineq_duals);
  return sol;
}

}  // namespace rlmpc
