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

#include "rlmpc/qp.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "rlmpc/dare.hpp"
#include "support.hpp"

using namespace rlmpc;
using rlmpc::testing::TestRng;

namespace {

QpProblem one_var_qp() {
  QpProblem qp;
  qp.hessian = Matrix::Constant(1, 1, 1.0);
  qp.linear_cost = Vector::Zero(1);
  qp.eq_matrix = Matrix::Zero(0, 1);
  qp.eq_rhs = Vector::Zero(0);
  qp.ineq_matrix = Matrix::Zero(0, 1);
  qp.ineq_lower = Vector::Zero(0);
  qp.ineq_upper = Vector::Zero(0);
  return qp;
}

}  // namespace

TEST_CASE("unconstrained single variable minimum") {
  const QpProblem qp = one_var_qp();  // min 1/2 u^2
  const QpSolution sol = solve_qp(qp);
  REQUIRE(sol.status == QpStatus::optimal);
  CHECK(sol.primal[0] == Catch::Approx(0.0).margin(1e-12));
  CHECK(sol.objective == Catch::Approx(0.0).margin(1e-12));
  CHECK(sol.kkt_residual <= 1e-8);
}

TEST_CASE("single bound with analytic KKT multiplier") {
  // min 1/2 (u - 2)^2  s.t.  u <= 1
  QpProblem qp = one_var_qp();
  qp.linear_cost[0] = -2.0;
  qp.ineq_matrix = Matrix::Constant(1, 1, 1.0);
  qp.ineq_lower = Vector::Constant(1, -kInfinity);
  qp.ineq_upper = Vector::Constant(1, 1.0);

  const QpSolution sol = solve_qp(qp);
  REQUIRE(sol.status == QpStatus::optimal);
  CHECK(sol.primal[0] == Catch::Approx(1.0).margin(1e-10));
  CHECK(sol.ineq_duals[0] == Catch::Approx(1.0).margin(1e-10));
  const double u = sol.primal[0];
  CHECK(0.5 * (u - 2.0) * (u - 2.0) == Catch::Approx(0.5).margin(1e-10));
  CHECK(sol.kkt_residual <= 1e-8);
}

TEST_CASE("equality constrained quadratic") {
  // min 1/2 |x|^2  s.t.  x1 + x2 = 2   ->  x = (1, 1), dual = -1
  QpProblem qp;
  qp.hessian = Matrix::Identity(2, 2);
  qp.linear_cost = Vector::Zero(2);
  qp.eq_matrix = Matrix::Constant(1, 2, 1.0);
  qp.eq_rhs = Vector::Constant(1, 2.0);
  qp.ineq_matrix = Matrix::Zero(0, 2);
  qp.ineq_lower = Vector::Zero(0);
  qp.ineq_upper = Vector::Zero(0);

  const QpSolution sol = solve_qp(qp);
  REQUIRE(sol.status == QpStatus::optimal);
  CHECK(sol.primal[0] == Catch::Approx(1.0).margin(1e-10));
  CHECK(sol.primal[1] == Catch::Approx(1.0).margin(1e-10));
  CHECK(sol.eq_duals[0] == Catch::Approx(-1.0).margin(1e-10));
}

TEST_CASE("seeded 5-variable QP matches active-set enumeration") {
  TestRng rng(42);
  QpProblem qp = random_qp(rng, 5, 3);
  while (qp.num_vars() != 5 || qp.num_ineq() != 3) qp = random_qp(rng, 5, 3);
  // force all three rows two-sided
  for (int r = 0; r < 3; ++r) {
    if (!std::isfinite(qp.ineq_lower[r])) qp.ineq_lower[r] = qp.ineq_upper[r] - 2.0;
    if (!std::isfinite(qp.ineq_upper[r])) qp.ineq_upper[r] = qp.ineq_lower[r] + 2.0;
  }
  const auto oracle = rlmpc::testing::enumerate_qp_minimum(qp);
  REQUIRE(oracle.has_value());
  const QpSolution sol = solve_qp(qp);
  REQUIRE(sol.status == QpStatus::optimal);
  CHECK(sol.objective == Catch::Approx(*oracle).margin(1e-7));
}

TEST_CASE("solver agrees with enumeration oracle on seeded instances") {
  TestRng rng(7);
  int solved = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const QpProblem qp = random_qp(rng);
    const auto oracle = rlmpc::testing::enumerate_qp_minimum(qp);
    REQUIRE(oracle.has_value());  // generated around a feasible point
    const QpSolution sol = solve_qp(qp);
    REQUIRE(sol.status == QpStatus::optimal);
    CHECK(sol.objective == Catch::Approx(*oracle).margin(1e-7));
    CHECK(sol.kkt_residual <= 1e-8);

    // stationarity in the max norm, spelled out
    Vector stat = qp.hessian * sol.primal + qp.linear_cost;
    if (qp.num_eq() > 0) stat += qp.eq_matrix.transpose() * sol.eq_duals;
    if (qp.num_ineq() > 0) stat += qp.ineq_matrix.transpose() * sol.ineq_duals;
    CHECK(stat.cwiseAbs().maxCoeff() <= 1e-8);
    ++solved;
  }
  CHECK(solved == 40);
}

TEST_CASE("complementarity at optimum") {
  TestRng rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    const QpProblem qp = random_qp(rng);
    const QpSolution sol = solve_qp(qp);
    REQUIRE(sol.status == QpStatus::optimal);
    for (Eigen::Index j = 0; j < qp.num_ineq(); ++j) {
      const double ax = qp.ineq_matrix.row(j).dot(sol.primal);
      const double mu = sol.ineq_duals[j];
      if (mu > 0.0) CHECK(mu * std::abs(ax - qp.ineq_upper[j]) <= 1e-8);
      if (mu < 0.0) CHECK(-mu * std::abs(ax - qp.ineq_lower[j]) <= 1e-8);
    }
  }
}

TEST_CASE("contradictory inequalities report infeasible") {
  QpProblem qp = one_var_qp();
  qp.ineq_matrix = Matrix::Constant(2, 1, 1.0);
  qp.ineq_lower = Vector(2);
  qp.ineq_upper = Vector(2);
  qp.ineq_lower << 1.0, -kInfinity;
  qp.ineq_upper << kInfinity, -1.0;  // u >= 1 and u <= -1

  const QpSolution sol = solve_qp(qp);
  CHECK(sol.status == QpStatus::infeasible);
}

TEST_CASE("inconsistent equalities report infeasible") {
  QpProblem qp = one_var_qp();
  qp.eq_matrix = Matrix::Constant(2, 1, 1.0);
  qp.eq_rhs = Vector(2);
  qp.eq_rhs << 0.0, 1.0;

  const QpSolution sol = solve_qp(qp);
  CHECK(sol.status == QpStatus::infeasible);
}

TEST_CASE("invalid inputs are rejected") {
  SECTION("indefinite hessian") {
    QpProblem qp = one_var_qp();
    qp.hessian(0, 0) = -1.0;
    CHECK_THROWS_AS(solve_qp(qp), std::invalid_argument);
  }
  SECTION("asymmetric hessian") {
    QpProblem qp;
    qp.hessian = Matrix::Identity(2, 2);
    qp.hessian(0, 1) = 0.1;
    qp.linear_cost = Vector::Zero(2);
    qp.eq_matrix = Matrix::Zero(0, 2);
    qp.eq_rhs = Vector::Zero(0);
    qp.ineq_matrix = Matrix::Zero(0, 2);
    qp.ineq_lower = Vector::Zero(0);
    qp.ineq_upper = Vector::Zero(0);
    CHECK_THROWS_AS(solve_qp(qp), std::invalid_argument);
  }
  SECTION("crossed bounds") {
    QpProblem qp = one_var_qp();
    qp.ineq_matrix = Matrix::Constant(1, 1, 1.0);
    qp.ineq_lower = Vector::Constant(1, 1.0);
    qp.ineq_upper = Vector::Constant(1, -1.0);
    CHECK_THROWS_AS(solve_qp(qp), std::invalid_argument);
  }
}

TEST_CASE("semidefinite hessian with linear slack-like variable") {
  // min 1/2 x^2 + 10 s  s.t.  x - s <= 1, s >= 0, x >= 2
  // forces s = 1 through zero-curvature directions
  QpProblem qp;
  qp.hessian = Matrix::Zero(2, 2);
  qp.hessian(0, 0) = 1.0;
  qp.linear_cost = Vector(2);
  qp.linear_cost << 0.0, 10.0;
  qp.eq_matrix = Matrix::Zero(0, 2);
  qp.eq_rhs = Vector::Zero(0);
  qp.ineq_matrix = Matrix(3, 2);
  qp.ineq_matrix << 1.0, -1.0,
                    0.0, 1.0,
                    1.0, 0.0;
  qp.ineq_lower = Vector(3);
  qp.ineq_upper = Vector(3);
  qp.ineq_lower << -kInfinity, 0.0, 2.0;
  qp.ineq_upper << 1.0, kInfinity, kInfinity;

  const QpSolution sol = solve_qp(qp);
  REQUIRE(sol.status == QpStatus::optimal);
  CHECK(sol.primal[0] == Catch::Approx(2.0).margin(1e-9));
  CHECK(sol.primal[1] == Catch::Approx(1.0).margin(1e-9));
  CHECK(sol.objective == Catch::Approx(2.0 + 10.0).margin(1e-9));
  CHECK(sol.kkt_residual <= 1e-8);
}

TEST_CASE("dare scalar fixed point is the golden ratio") {
  DareSpec spec;
  spec.a = Matrix::Constant(1, 1, 1.0);
  spec.b = Matrix::Constant(1, 1, 1.0);
  spec.q = Matrix::Constant(1, 1, 1.0);
  spec.r = Matrix::Constant(1, 1, 1.0);
  const Matrix s = solve_dare(spec);
  CHECK(s(0, 0) == Catch::Approx(0.5 * (1.0 + std::sqrt(5.0))).margin(1e-10));
  CHECK(dare_residual(spec, s) <= 1e-9);
}

TEST_CASE("dare with a = 0 returns q") {
  DareSpec spec;
  spec.a = Matrix::Zero(2, 2);
  spec.b = Matrix::Constant(2, 1, 1.0);
  spec.q = (Matrix(2, 2) << 2.0, 0.5, 0.5, 3.0).finished();
  spec.r = Matrix::Constant(1, 1, 1.0);
  const Matrix s = solve_dare(spec);
  CHECK((s - spec.q).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("dare for the default controller model") {
  DareSpec spec;
  spec.a = (Matrix(2, 2) << 1.0, 0.25, 0.0, 1.0).finished();
  spec.b = (Matrix(2, 1) << 0.0312, 0.25).finished();
  spec.q = Matrix::Identity(2, 2);
  spec.r = Matrix::Constant(1, 1, 0.5);
  const Matrix s = solve_dare(spec);
  CHECK(dare_residual(spec, s) <= 1e-9);
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  CHECK(es.eigenvalues().minCoeff() >= 0.0);
}

TEST_CASE("dare diverges for a non-stabilizable pair") {
  DareSpec spec;
  spec.a = Matrix::Constant(1, 1, 2.0);
  spec.b = Matrix::Zero(1, 1);
  spec.q = Matrix::Constant(1, 1, 1.0);
  spec.r = Matrix::Constant(1, 1, 1.0);
  CHECK_THROWS_AS(solve_dare(spec), std::runtime_error);
}
