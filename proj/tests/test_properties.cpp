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

// Randomised checks of the invariants each module promises.

#include <algorithm>
#include <string>

#include "doctest.h"
#include "l1refine/eval.hpp"
#include "l1refine/opa.hpp"
#include "l1refine/retrieval.hpp"
#include "l1refine/synth.hpp"
#include "oracles.hpp"

using namespace l1refine;

TEST_CASE("gradient matches central differences") {
  oracle::Rand rng(101);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = rng.integer(1, 6), d = rng.integer(1, 6);
    const double alpha = rng.uniform(0.1, 100.0);
    const Matrix a = rng.matrix(n, d), b = rng.matrix(n, d);
    const Matrix m = rng.orthogonal(d);
    const Matrix fd = oracle::finite_difference(
        [&](const Matrix& x) { return oracle::smoothed(a, x, b, alpha); }, m, 1e-6);
    const Matrix g = l1_gradient({a, b}, m, alpha);
    CHECK((g - fd).norm() <= 1e-4 * std::max(fd.norm(), 1e-8));
  }
}

TEST_CASE("projection lands in the tangent space") {
  oracle::Rand rng(102);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = rng.integer(1, 8);
    const Matrix m = rng.orthogonal(d);
    const Matrix p = tangent_project(m, rng.matrix(d, d) * rng.uniform(0.1, 10.0));
    CHECK((m.transpose() * p + p.transpose() * m).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("l2_opa is not beaten by nearby or random orthogonal maps") {
  oracle::Rand rng(103);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = rng.integer(2, 5), n = rng.integer(d, 10);
    const Matrix a = rng.matrix(n, d);
    const Matrix b = a * rng.orthogonal(d) + 0.3 * rng.matrix(n, d);
    const AlignedPairMatrices p(a, b);
    const Matrix best = l2_opa(p).matrix();
    const double loss = l2_loss(p, best);
    for (int k = 0; k < 200; ++k) {
      Matrix s = rng.matrix(d, d) * 1e-3;
      s = s - s.transpose().eval();
      const Matrix id = Matrix::Identity(d, d);
      const Matrix near = best * (id - 0.5 * s).inverse() * (id + 0.5 * s);
      CHECK(loss <= l2_loss(p, near) + 1e-9);
      CHECK(loss <= l2_loss(p, rng.orthogonal(d)) + 1e-9);
    }
  }
}

TEST_CASE("one small step barely moves off the manifold") {
  oracle::Rand rng(104);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = rng.integer(2, 6), n = rng.integer(d, 30);
    const Matrix a = rng.matrix(n, d), b = rng.matrix(n, d);
    SolverConfig cfg;
    cfg.t_budget = cfg.dt;
    const OrthogonalMap m0(rng.orthogonal(d));
    double after = m0.ortho_error();
    integrate_l1_flow({a, b}, m0, cfg, [&](double t, const Matrix& m, double) {
      if (t > 0) after = orthogonality_error(m);
    });
    CHECK(std::abs(after - m0.ortho_error()) <= 1e-9);
  }
}

TEST_CASE("flow never returns a worse map and traces fall until they stop") {
  oracle::Rand rng(105);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = rng.integer(2, 5), n = rng.integer(2 * d, 40);
    const Matrix a = rng.matrix(n, d);
    Matrix b = a * rng.orthogonal(d) + 0.05 * rng.matrix(n, d);
    b.row(0) *= -3.0;
    SolverConfig cfg;
    cfg.dt = 1e-4;
    cfg.t_budget = 2e-2;
    cfg.alpha = trial % 2 ? 1e8 : 50.0;
    const AlignedPairMatrices p(a, b);
    const OrthogonalMap m0 = trial % 3 ? OrthogonalMap::identity(d) : l2_opa(p);
    const FlowResult r = integrate_l1_flow(p, m0, cfg);
    CHECK(l1_loss(p, r.map.matrix()) <= l1_loss(p, m0.matrix()));
    CHECK(r.map.ortho_error() <= cfg.epsilon);
    const auto& tr = r.report.loss_trace;
    const std::size_t accepted =
        r.report.stop_reason == StopReason::kBudgetExhausted ? tr.size() : tr.size() - 1;
    for (std::size_t i = 1; i < accepted; ++i) CHECK(tr[i].second <= tr[i - 1].second);
  }
}

TEST_CASE("csls equals the oracle on small spaces") {
  // With d = 1 every cosine is +-1 and ties are decided by rounding alone.
  oracle::Rand rng(106);
  for (int trial = 0; trial < 30; ++trial) {
    const int ns = rng.integer(1, 50), nt = rng.integer(1, 50), d = rng.integer(2, 8);
    const Matrix s = rng.matrix(ns, d), t = rng.matrix(nt, d);
    const int k = rng.integer(1, std::min(ns, nt));
    CHECK(csls_dictionary(s, t, k).pairs ==
          oracle::csls(oracle::to_rows(s), oracle::to_rows(t), k));
  }
}

TEST_CASE("BLI scores survive a common orthogonal transform") {
  oracle::Rand rng(107);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = rng.integer(5, 30), d = rng.integer(2, 6);
    std::vector<std::string> sw, tw;
    for (int i = 0; i < n; ++i) {
      sw.push_back("s" + std::to_string(i));
      tw.push_back("t" + std::to_string(i));
    }
    const Matrix s = rng.matrix(n, d), t = rng.matrix(n, d), q = rng.orthogonal(d);
    GoldDictionary gold;
    for (int i = 0; i < n; i += 2) gold.entries.push_back({sw[i], {tw[(i * 7) % n]}});
    for (auto method : {RetrievalMethod::kNearestNeighbour, RetrievalMethod::kCsls}) {
      const int k = std::min(3, n);
      const EmbeddingMatrix es(sw, s), et(tw, t), rs(sw, s * q), rt(tw, t * q);
      CHECK(bli_mrr(es, et, gold, method, k).value == bli_mrr(rs, rt, gold, method, k).value);
      CHECK(bli_accuracy(es, et, gold, method, k).value ==
            bli_mrr(es, et, gold, method, k, 1).value);
    }
  }
}

TEST_CASE("iqr_outliers equals the sort-based oracle") {
  oracle::Rand rng(108);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(rng.integer(4, 80)));
    for (double& x : v) x = rng.integer(0, 3) == 0 ? std::round(rng.normal()) : rng.normal();
    if (trial % 5 == 0) v[0] = 50.0;
    CHECK(iqr_outliers(v) == oracle::iqr(v));
  }
}

TEST_CASE("inlier residuals stay within the documented bound") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SyntheticParams p;
    p.seed = seed;
    p.n = 60;
    p.d = 5;
    p.sigma = 0.05;
    p.outlier_frac = 0.2;
    const SyntheticProblem prob = gen_synthetic(p);
    CHECK(orthogonality_error(prob.q) <= 1e-12);
    for (Eigen::Index i = 0; i < prob.a.rows(); ++i) {
      if (prob.outlier_mask[static_cast<std::size_t>(i)]) continue;
      CHECK((prob.a.row(i) * prob.q - prob.b.row(i)).norm() <=
            6.0 * p.sigma * std::sqrt(static_cast<double>(p.d)));
    }
  }
}
