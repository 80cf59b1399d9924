//  Copyright 2026 The l1refine Authors. All Rights Reserved.
//
//  Licensed under the Apache License, Version 2.0 (the "License");
//  you may not use this file except in compliance with the License.
//  You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.

#include <cmath>

#include "doctest.h"
#include "l1refine/error.hpp"
#include "l1refine/opa.hpp"
#include "oracles.hpp"

using namespace l1refine;

namespace {

Matrix rotation2(double theta) {
  Matrix r(2, 2);
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

}  // namespace

TEST_CASE("l2_opa closed-form cases") {
  oracle::Rand rng(1);
  const Matrix a = rng.matrix(7, 4);
  CHECK((l2_opa({a, a}).matrix() - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-9);

  const Matrix a2 = rng.matrix(6, 2);
  const Matrix r = rotation2(0.7);
  const OrthogonalMap m = l2_opa({a2, a2 * r});
  CHECK((m.matrix() - r).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(m.ortho_error() <= 1e-10);
}

TEST_CASE("l2_opa beats sampled orthogonal matrices") {
  oracle::Rand rng(2);
  const Matrix a = rng.matrix(6, 3);
  const Matrix b = a * rng.orthogonal(3) + 0.1 * rng.matrix(6, 3);
  const AlignedPairMatrices p(a, b);
  const double best = l2_loss(p, l2_opa(p).matrix());
  for (int i = 0; i < 10000; ++i) {
    REQUIRE(best <= l2_loss(p, rng.orthogonal(3)) + 1e-9);
  }
}

TEST_CASE("l2_opa handles rank deficiency and rejects non-finite input") {
  const Matrix a = Matrix::Zero(3, 3);
  CHECK(l2_opa({a, a}).ortho_error() <= 1e-10);
  Matrix bad = Matrix::Ones(2, 2);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(AlignedPairMatrices(bad, bad), NumericalError);
}

TEST_CASE("l1_loss") {
  oracle::Rand rng(3);
  const Matrix a = rng.matrix(5, 3);
  const Matrix m = rng.orthogonal(3);
  CHECK(l1_loss({a, a * m}, m) == 0.0);
  CHECK(l1_loss({Matrix::Identity(2, 2), Matrix::Zero(2, 2)}, Matrix::Identity(2, 2)) ==
        2.0);
  const Matrix b = rng.matrix(5, 3);
  CHECK(l1_loss({a, b}, m) ==
        doctest::Approx(oracle::abs_sum_residual(a, m, b)).epsilon(1e-13));
}

TEST_CASE("smoothed_l1_objective") {
  oracle::Rand rng(4);
  const Matrix a = rng.matrix(4, 2);
  const Matrix m = rng.orthogonal(2);
  CHECK(smoothed_l1_objective({a, a * m}, m, 10.0) == 0.0);

  Matrix one(1, 1);
  one << 1.0;
  CHECK(std::abs(smoothed_l1_objective({one, Matrix::Zero(1, 1)}, one, 1e8) - 1.0) <=
        1e-9);

  const Matrix b = rng.matrix(4, 2);
  const AlignedPairMatrices p(a, b);
  CHECK(smoothed_l1_objective(p, m, 10.0) ==
        doctest::Approx(oracle::smoothed(a, m, b, 10.0)).epsilon(1e-12));
  const double l1 = l1_loss(p, m);
  for (double alpha : {0.1, 1.0, 10.0, 1e3, 1e8}) {
    const double f = smoothed_l1_objective(p, m, alpha);
    CHECK(f >= 0.0);
    CHECK(f <= l1 + 1e-12);
  }
  CHECK(std::abs(smoothed_l1_objective(p, m, 1e8) - l1) <= 1e-9);
}

TEST_CASE("l1_gradient") {
  oracle::Rand rng(5);
  const Matrix a = rng.matrix(5, 3);
  const Matrix m = rng.orthogonal(3);
  CHECK(l1_gradient({a, a * m}, m, 1e8).cwiseAbs().maxCoeff() == 0.0);

  Matrix one(1, 1), half(1, 1);
  one << 1.0;
  half << 0.5;
  const double g = l1_gradient({one, Matrix::Zero(1, 1)}, half, 1.0)(0, 0);
  CHECK(g == doctest::Approx(0.85534).epsilon(1e-5));
  CHECK(g == doctest::Approx(std::tanh(0.5) + 0.5 / std::pow(std::cosh(0.5), 2))
                 .epsilon(1e-14));

  const Matrix b = rng.matrix(5, 3);
  const AlignedPairMatrices p(a, b);
  const Matrix analytic = l1_gradient(p, m, 10.0);
  const Matrix fd = oracle::finite_difference(
      [&](const Matrix& x) { return oracle::smoothed(a, x, b, 10.0); }, m, 1e-6);
  CHECK((analytic - fd).norm() / fd.norm() <= 1e-4);
}

TEST_CASE("l1_gradient saturates without overflow") {
  Matrix a(1, 1), m(1, 1);
  a << 1.0;
  m << 1.0;
  for (double b : {-5.0, 5.0, 0.999999}) {
    Matrix bm(1, 1);
    bm << b;
    const Matrix g = l1_gradient({a, bm}, m, 1e8);
    CHECK(std::isfinite(g(0, 0)));
    CHECK(std::abs(g(0, 0)) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("tangent_project") {
  oracle::Rand rng(6);
  const Matrix m = rng.orthogonal(4);
  Matrix s = rng.matrix(4, 4);
  s = s - s.transpose().eval();
  CHECK((tangent_project(m, m * s) - m * s).cwiseAbs().maxCoeff() <= 1e-10);

  Matrix sym = rng.matrix(3, 3);
  sym = sym + sym.transpose().eval();
  CHECK(tangent_project(Matrix::Identity(3, 3), sym).cwiseAbs().maxCoeff() <= 1e-15);

  const Matrix g = rng.matrix(4, 4);
  const Matrix pi = tangent_project(m, g);
  CHECK((m.transpose() * pi + pi.transpose() * m).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("orthogonality_error") {
  CHECK(orthogonality_error(Matrix::Identity(3, 3)) == 0.0);
  CHECK(orthogonality_error(2.0 * Matrix::Identity(2, 2)) == 3.0);
  oracle::Rand rng(7);
  const Eigen::HouseholderQR<Matrix> qr(rng.matrix(6, 6));
  const Matrix q = qr.householderQ() * Matrix::Identity(6, 6);
  CHECK(orthogonality_error(q) <= 1e-12);
}

TEST_CASE("SolverConfig validation") {
  SolverConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.alpha == 1e8);
  CHECK(c.epsilon == 1e-5);
  CHECK(c.dt == 1e-6);
  CHECK(c.t_budget == 5e-3);
  CHECK(c.abs_tol == 1e-7);
  CHECK(c.rel_tol == 1e-5);
  CHECK(c.max_order == 15);
  CHECK(c.loss_check_stride == 1);
  c.dt = 1.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgumentError);
  c = SolverConfig{};
  c.alpha = -1;
  CHECK_THROWS_AS(c.validate(), InvalidArgumentError);
  c = SolverConfig{};
  c.loss_check_stride = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgumentError);
}

TEST_CASE("integrate_l1_flow at a stationary point") {
  oracle::Rand rng(8);
  const Matrix a = rng.matrix(10, 3);
  const Matrix m0 = rng.orthogonal(3);
  SolverConfig cfg;
  cfg.dt = 1e-4;
  cfg.t_budget = 1e-2;
  const FlowResult r = integrate_l1_flow({a, a * m0}, OrthogonalMap(m0), cfg);
  CHECK(r.report.stop_reason == StopReason::kBudgetExhausted);
  CHECK(r.map.matrix() == m0);
  for (const auto& [t, loss] : r.report.loss_trace) CHECK(loss == 0.0);
  CHECK(r.report.loss_trace.size() == r.report.steps_taken + 1);
  CHECK(r.report.loss_trace.back().first == doctest::Approx(1e-2));
}

TEST_CASE("a budget of one dt takes one step") {
  oracle::Rand rng(9);
  const Matrix a = rng.matrix(8, 3);
  const Matrix b = rng.matrix(8, 3);
  SolverConfig cfg;
  cfg.t_budget = cfg.dt;
  const FlowResult r = integrate_l1_flow({a, b}, OrthogonalMap::identity(3), cfg);
  CHECK(r.report.steps_taken == 1);
  CHECK(r.report.loss_trace.size() == 2);
}

TEST_CASE("integrate_l1_flow preconditions") {
  oracle::Rand rng(10);
  const Matrix a = rng.matrix(5, 2);
  CHECK_THROWS_AS(integrate_l1_flow({a, a}, OrthogonalMap(2.0 * Matrix::Identity(2, 2)),
                                    SolverConfig{}),
                  PreconditionError);
  CHECK_THROWS_AS(integrate_l1_flow({a, a}, OrthogonalMap::identity(3), SolverConfig{}),
                  DimensionMismatchError);
  SolverConfig bad;
  bad.epsilon = 0.0;
  CHECK_THROWS_AS(integrate_l1_flow({a, a}, OrthogonalMap::identity(2), bad),
                  InvalidArgumentError);
}

TEST_CASE("integrate_l1_flow reports non-finite states") {
  Matrix a = Matrix::Identity(2, 2) * 1e300;
  Matrix b = Matrix::Zero(2, 2);
  b(0, 1) = 1e300;
  SolverConfig cfg;
  cfg.alpha = 1.0;
  cfg.dt = 1e-3;
  cfg.t_budget = 1e-2;
  CHECK_THROWS_AS(integrate_l1_flow({a, b}, OrthogonalMap::identity(2), cfg),
                  NumericalError);
}

TEST_CASE("integrate_l1_flow returns the best iterate") {
  oracle::Rand rng(11);
  for (auto integrator : {Integrator::kRk4Fixed, Integrator::kRk4Adaptive}) {
    for (auto comparison : {LossComparison::kPrevious, LossComparison::kRunningMinimum}) {
      const Matrix a = rng.matrix(40, 4);
      const Matrix q = rng.orthogonal(4);
      Matrix b = a * q + 0.05 * rng.matrix(40, 4);
      b.row(3) *= -4.0;
      SolverConfig cfg;
      cfg.dt = 1e-4;
      cfg.t_budget = 2e-2;
      cfg.integrator = integrator;
      cfg.comparison = comparison;
      const AlignedPairMatrices p(a, b);
      const OrthogonalMap m0 = l2_opa(p);
      std::vector<std::pair<double, double>> seen;
      const FlowResult r = integrate_l1_flow(
          p, m0, cfg, [&](double t, const Matrix& m, double loss) {
            CHECK(orthogonality_error(m) <= cfg.epsilon);
            CHECK(loss == doctest::Approx(l1_loss(p, m)).epsilon(1e-12));
            seen.emplace_back(t, loss);
          });
      double best = seen.front().second;
      for (const auto& [t, loss] : seen) best = std::min(best, loss);
      CHECK(l1_loss(p, r.map.matrix()) == best);
      CHECK(best <= l1_loss(p, m0.matrix()));
      CHECK(r.map.ortho_error() <= cfg.epsilon);
      CHECK(r.report.final_ortho_error == r.map.ortho_error());
      CHECK(!r.report.loss_trace.empty());
      CHECK(r.report.wall_time_s >= 0.0);
    }
  }
}

TEST_CASE("stride spaces out the stopping checks") {
  oracle::Rand rng(12);
  const Matrix a = rng.matrix(20, 3);
  const Matrix b = a * rng.orthogonal(3);
  SolverConfig cfg;
  cfg.dt = 1e-4;
  cfg.t_budget = 1e-3;
  cfg.loss_check_stride = 4;
  cfg.alpha = 10.0;
  const FlowResult r = integrate_l1_flow({a, b}, OrthogonalMap::identity(3), cfg);
  if (r.report.stop_reason == StopReason::kBudgetExhausted) {
    CHECK(r.report.steps_taken == 10);
    CHECK(r.report.loss_trace.size() == 4);  // t = 0, 4dt, 8dt, 10dt
  }
  for (std::size_t i = 1; i + 1 < r.report.loss_trace.size(); ++i) {
    CHECK(r.report.loss_trace[i].first == doctest::Approx(4e-4 * i));
  }
}

TEST_CASE("adaptive mode respects the budget and dt") {
  oracle::Rand rng(13);
  const Matrix a = rng.matrix(30, 3);
  const Matrix b = a * rng.orthogonal(3) + 0.01 * rng.matrix(30, 3);
  SolverConfig cfg;
  cfg.integrator = Integrator::kRk4Adaptive;
  cfg.dt = 1e-4;
  cfg.t_budget = 3e-3;
  cfg.alpha = 100.0;
  const FlowResult r = integrate_l1_flow({a, b}, OrthogonalMap::identity(3), cfg);
  double prev = 0.0;
  for (const auto& [t, loss] : r.report.loss_trace) {
    CHECK(t >= prev);
    CHECK(t - prev <= cfg.dt * (1 + 1e-12));
    CHECK(t <= cfg.t_budget);
    prev = t;
  }
  if (r.report.stop_reason == StopReason::kBudgetExhausted) {
    CHECK(r.report.loss_trace.back().first == cfg.t_budget);
  }
}
