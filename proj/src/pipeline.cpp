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

#include "l1refine/pipeline.hpp"

#include <chrono>
#include <string>

#include "l1refine/error.hpp"

namespace l1refine {
namespace {

struct Roles {
  const EmbeddingMatrix& moved;
  const EmbeddingMatrix& fixed;
};

Roles roles(const RefineRequest& req) {
  if (req.reverse) return {req.target, req.source};
  return {req.source, req.target};
}

Matrix leading_rows(const Matrix& m, std::optional<std::size_t> limit) {
  if (!limit || *limit >= static_cast<std::size_t>(m.rows())) return m;
  return m.topRows(static_cast<Eigen::Index>(*limit));
}

struct Prepared {
  BilingualDictionary dictionary;
  AlignedPairMatrices pairs;
  std::size_t forward_size;
  std::size_t backward_size;
};

Prepared prepare(const RefineRequest& req) {
  req.validate();
  const auto [moved, fixed] = roles(req);
  const Matrix x = unit_normalize_rows(moved.vectors());
  const Matrix y = unit_normalize_rows(fixed.vectors());
  const Matrix xs = leading_rows(x, req.dictionary_rows);
  const Matrix ys = leading_rows(y, req.dictionary_rows);

  const BilingualDictionary forward =
      build_dictionary(xs, ys, req.retrieval, req.csls_k);
  const BilingualDictionary backward =
      build_dictionary(ys, xs, req.retrieval, req.csls_k);
  BilingualDictionary dict = mutual_intersection(forward, backward);
  if (dict.empty()) {
    throw RefinementImpossibleError(
        "mutual dictionary is empty (forward " +
        std::to_string(forward.size()) + " pairs, backward " +
        std::to_string(backward.size()) + " pairs)");
  }
  AlignedPairMatrices pairs = compose_pair_matrices(dict, x, y);
  return {std::move(dict), std::move(pairs), forward.size(), backward.size()};
}

RefineResult finish(const RefineRequest& req, Prepared prep, OrthogonalMap map,
                    RefinementReport report) {
  const EmbeddingMatrix& moved = roles(req).moved;
  EmbeddingMatrix refined = moved.with_vectors(moved.vectors() * map.matrix());
  return {std::move(refined),        std::move(map),
          std::move(report),         std::move(prep.dictionary),
          prep.forward_size,         prep.backward_size};
}

}  // namespace

void RefineRequest::validate() const {
  if (source.empty() || target.empty()) {
    throw EmptyInputError("refinement needs non-empty source and target");
  }
  if (source.dim() != target.dim()) {
    throw DimensionMismatchError(
        "source dimension " + std::to_string(source.dim()) +
        " differs from target dimension " + std::to_string(target.dim()));
  }
  if (csls_k < 1) throw InvalidArgumentError("csls_k must be >= 1");
  if (dictionary_rows && *dictionary_rows == 0) {
    throw InvalidArgumentError("dictionary_rows must be positive");
  }
  solver.validate();
}

BilingualDictionary bootstrap_dictionary(const RefineRequest& req,
                                         std::size_t* forward_size,
                                         std::size_t* backward_size) {
  Prepared prep = prepare(req);
  if (forward_size) *forward_size = prep.forward_size;
  if (backward_size) *backward_size = prep.backward_size;
  return std::move(prep.dictionary);
}

RefineResult l1_refine(const RefineRequest& req) {
  Prepared prep = prepare(req);
  const Eigen::Index d = prep.pairs.dim();
  const OrthogonalMap m0 = req.initial_map == InitialMap::kL2
                               ? l2_opa(prep.pairs)
                               : OrthogonalMap::identity(d);
  FlowResult flow = integrate_l1_flow(prep.pairs, m0, req.solver);
  return finish(req, std::move(prep), std::move(flow.map),
                std::move(flow.report));
}

RefineResult l2_refine(const RefineRequest& req) {
  const auto started = std::chrono::steady_clock::now();
  Prepared prep = prepare(req);
  const Eigen::Index d = prep.pairs.dim();
  RefinementReport report;
  report.loss_trace.emplace_back(0.0,
                                 l1_loss(prep.pairs, Matrix::Identity(d, d)));
  OrthogonalMap map = l2_opa(prep.pairs);
  report.loss_trace.emplace_back(1.0, l1_loss(prep.pairs, map.matrix()));
  report.stop_reason = StopReason::kBudgetExhausted;
  report.steps_taken = 1;
  report.final_ortho_error = map.ortho_error();
  report.wall_time_s = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - started)
                           .count();
  return finish(req, std::move(prep), std::move(map), std::move(report));
}

RefineResult refine(const RefineRequest& req) {
  return req.loss == LossKind::kL2 ? l2_refine(req) : l1_refine(req);
}

}  // namespace l1refine
