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

#include <algorithm>
#include <string>

#include "doctest.h"
#include "l1refine/error.hpp"
#include "l1refine/pipeline.hpp"
#include "l1refine/synth.hpp"
#include "oracles.hpp"

using namespace l1refine;

namespace {

std::vector<std::string> names(const std::string& prefix, std::size_t n) {
  std::vector<std::string> w;
  for (std::size_t i = 0; i < n; ++i) w.push_back(prefix + std::to_string(i));
  return w;
}

RefineRequest request_for(const Matrix& src, const Matrix& tgt) {
  RefineRequest req;
  req.source = EmbeddingMatrix(names("s", static_cast<std::size_t>(src.rows())), src);
  req.target = EmbeddingMatrix(names("t", static_cast<std::size_t>(tgt.rows())), tgt);
  req.solver.dt = 1e-4;
  req.solver.t_budget = 5e-2;
  return req;
}

// Source already mapped near the planted rotation, as an existing
// alignment would be.
RefineRequest prealigned(std::uint64_t seed, double sigma, double frac) {
  SyntheticParams p;
  p.seed = seed;
  p.sigma = sigma;
  p.outlier_frac = frac;
  const SyntheticProblem prob = gen_synthetic(p);
  const Matrix base = perturb_rotation(prob.q, 0.2, seed + 1000);
  return request_for(prob.a * base, prob.b);
}

}  // namespace

TEST_CASE("already aligned spaces are a fixed point") {
  const Matrix x = oracle::Rand(1).orthogonal(12).leftCols(6);
  RefineRequest req = request_for(x, x);
  for (auto loss : {LossKind::kL1, LossKind::kL2}) {
    req.loss = loss;
    const RefineResult r = refine(req);
    CHECK(r.dictionary.size() == 12);
    for (std::size_t i = 0; i < 12; ++i) CHECK(r.dictionary.pairs[i] == std::pair{i, i});
    CHECK((r.map.matrix() - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((r.refined.vectors() - x).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("nn retrieval on a 5-word toy pair") {
  Matrix s(5, 2), t(5, 2);
  s << 1, 0, 0, 1, -1, 0, 0.7, 0.7, 0.1, -1;
  t << 0.9, 0.2, -0.1, 1, -1, 0.05, 0.95, 0.05, 0.2, -0.9;
  RefineRequest req = request_for(s, t);
  req.retrieval = RetrievalMethod::kNearestNeighbour;
  const auto sr = oracle::to_rows(s), tr = oracle::to_rows(t);
  const oracle::Pairs expected = oracle::mutual(oracle::nn(sr, tr), oracle::nn(tr, sr));
  CHECK(bootstrap_dictionary(req).pairs == expected);
  // s3 prefers t0, which picks s0 back; s0 and t3 pick each other.
  CHECK(expected == oracle::Pairs{{0, 3}, {1, 1}, {2, 2}, {4, 4}});
}

TEST_CASE("the mutual dictionary always holds the most similar pair") {
  oracle::Rand rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix s = rng.matrix(rng.integer(2, 30), 4);
    const Matrix t = rng.matrix(rng.integer(2, 30), 4);
    RefineRequest req = request_for(s, t);
    req.retrieval = RetrievalMethod::kNearestNeighbour;
    const auto cos = oracle::cosine_matrix(oracle::to_rows(s), oracle::to_rows(t));
    std::pair<std::size_t, std::size_t> best{0, 0};
    for (std::size_t i = 0; i < cos.size(); ++i)
      for (std::size_t j = 0; j < cos[i].size(); ++j)
        if (cos[i][j] > cos[best.first][best.second]) best = {i, j};
    const BilingualDictionary d = bootstrap_dictionary(req);
    CHECK(std::find(d.pairs.begin(), d.pairs.end(), best) != d.pairs.end());
  }
}

TEST_CASE("direction flag moves the target instead") {
  const RefineRequest fwd = prealigned(3, 0.01, 0.1);
  RefineRequest rev = fwd;
  rev.reverse = true;
  rev.loss = LossKind::kL2;
  RefineRequest fwd2 = fwd;
  fwd2.loss = LossKind::kL2;
  const RefineResult a = refine(fwd2);
  const RefineResult b = refine(rev);
  CHECK(b.refined.words() == fwd.target.words());
  // The reverse L2 map is the transpose of the forward one when the mutual
  // dictionary is symmetric.
  if (a.dictionary.size() == b.dictionary.size()) {
    CHECK((a.map.matrix().transpose() - b.map.matrix()).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("refinement keeps vocabulary, order, norms and cosines") {
  RefineRequest req = prealigned(4, 0.01, 0.1);
  Matrix scaled = req.source.vectors();
  for (Eigen::Index i = 0; i < scaled.rows(); ++i) scaled.row(i) *= 1.0 + 0.01 * i;
  req.source = req.source.with_vectors(scaled);
  const RefineResult r = l1_refine(req);
  CHECK(r.refined.words() == req.source.words());
  CHECK(r.map.ortho_error() <= req.solver.epsilon);
  const Matrix before = scaled * scaled.transpose();
  const Matrix after = r.refined.vectors() * r.refined.vectors().transpose();
  // |x^T (M M^T - I) y| <= d max|M^T M - I| |x| |y|
  const double tol = static_cast<double>(scaled.cols()) * req.solver.epsilon *
                     before.diagonal().maxCoeff();
  CHECK((before - after).cwiseAbs().maxCoeff() <= tol);
}

TEST_CASE("l1_refine is bitwise deterministic") {
  const RefineRequest req = prealigned(5, 0.01, 0.1);
  const RefineResult a = l1_refine(req), b = l1_refine(req);
  CHECK(a.map.matrix() == b.map.matrix());
  CHECK(a.refined.vectors() == b.refined.vectors());
  CHECK(a.report.loss_trace == b.report.loss_trace);
  CHECK(a.dictionary == b.dictionary);
}

TEST_CASE("l2_refine recovers a planted rotation without noise") {
  SyntheticParams p;
  p.sigma = 0.0;
  p.outlier_frac = 0.0;
  const SyntheticProblem prob = gen_synthetic(p);
  const Matrix base = perturb_rotation(prob.q, 0.2, 77);
  RefineRequest req = request_for(prob.a * base, prob.b);
  req.loss = LossKind::kL2;
  const RefineResult r = l2_refine(req);
  CHECK(r.dictionary.size() == 200);
  CHECK(recovery_error(base * r.map.matrix(), prob.q) <= 1e-9);
  const AlignedPairMatrices pairs(r.refined.vectors(), prob.b);
  CHECK(l2_loss(pairs, Matrix::Identity(10, 10)) <= 1e-9);
  CHECK(r.report.loss_trace.size() == 2);
  CHECK(r.report.steps_taken == 1);
  CHECK(r.report.stop_reason == StopReason::kBudgetExhausted);
}

TEST_CASE("L2 and L1 refiners are each optimal in their own loss") {
  for (std::uint64_t seed : {6u, 7u}) {
    RefineRequest req = prealigned(seed, 0.01, 0.1);
    req.loss = LossKind::kL1;
    const RefineResult l1 = refine(req);
    req.loss = LossKind::kL2;
    const RefineResult l2 = refine(req);
    REQUIRE(l1.dictionary == l2.dictionary);
    const AlignedPairMatrices pairs = compose_pair_matrices(
        l1.dictionary, unit_normalize_rows(req.source.vectors()),
        unit_normalize_rows(req.target.vectors()));
    CHECK(l2_loss(pairs, l2.map.matrix()) <= l2_loss(pairs, l1.map.matrix()) + 1e-12);
    CHECK(l1_loss(pairs, l1.map.matrix()) <= l1_loss(pairs, l2.map.matrix()));
  }
}

TEST_CASE("clean data: L2 refinement output has the lower L2 loss") {
  SyntheticParams p;
  p.seed = 8;
  p.outlier_frac = 0.0;
  const SyntheticProblem prob = gen_synthetic(p);
  RefineRequest req = request_for(prob.a * perturb_rotation(prob.q, 0.2, 8), prob.b);
  req.loss = LossKind::kL1;
  const RefineResult l1 = refine(req);
  req.loss = LossKind::kL2;
  const RefineResult l2 = refine(req);
  const AlignedPairMatrices pairs =
      compose_pair_matrices(l2.dictionary, req.source.vectors(), req.target.vectors());
  CHECK(l2_loss(pairs, l2.map.matrix()) <= l2_loss(pairs, l1.map.matrix()) + 1e-12);
}

TEST_CASE("L1 refinement lands closer to the planted map on most seeds") {
  int closer = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SyntheticParams p;
    p.seed = seed;
    const SyntheticProblem prob = gen_synthetic(p);
    const Matrix base = perturb_rotation(prob.q, 0.2, seed + 1000);
    RefineRequest req = request_for(prob.a * base, prob.b);
    req.loss = LossKind::kL1;
    const double e1 = recovery_error(base * l1_refine(req).map.matrix(), prob.q);
    req.loss = LossKind::kL2;
    const double e2 = recovery_error(base * l2_refine(req).map.matrix(), prob.q);
    closer += e1 < e2;
  }
  CHECK(closer > 10);
}

TEST_CASE("request validation") {
  RefineRequest req = request_for(Matrix::Identity(3, 3), Matrix::Identity(4, 4));
  CHECK_THROWS_AS(l1_refine(req), DimensionMismatchError);
  req = request_for(Matrix::Identity(3, 3), Matrix::Identity(3, 3));
  req.csls_k = 0;
  CHECK_THROWS_AS(l1_refine(req), InvalidArgumentError);
  req.csls_k = 4;
  CHECK_THROWS_AS(l1_refine(req), InvalidArgumentError);
  req = request_for(Matrix::Identity(3, 3), Matrix::Identity(3, 3));
  req.dictionary_rows = 0;
  CHECK_THROWS_AS(l1_refine(req), InvalidArgumentError);
  req.dictionary_rows = 2;
  CHECK_THROWS_AS(bootstrap_dictionary(req), InvalidArgumentError);
  req.csls_k = 2;
  CHECK(bootstrap_dictionary(req).size() == 2);
}
