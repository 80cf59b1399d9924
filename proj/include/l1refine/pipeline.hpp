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

// Post-hoc refinement of an existing cross-lingual alignment.
//
// Both refiners bootstrap a dictionary of mutual translations from the
// current shared space, stack the matched rows into A and B, fit an
// orthogonal map, and move the source space by it:
//
//   1. D_ab = retrieve(source -> target)
//   2. D_ba = retrieve(target -> source)
//   3. D    = D_ab intersected with D_ba
//   4. A, B = rows of D in source, target
//   5. M*   = L1 flow from M0 (l1_refine) or l2_opa (l2_refine)
//
// The result is source * M* alongside the unchanged target.

#pragma once

#include <cstddef>
#include <optional>

#include "l1refine/embed_io.hpp"
#include "l1refine/opa.hpp"
#include "l1refine/retrieval.hpp"

namespace l1refine {

enum class LossKind { kL1, kL2 };

enum class InitialMap {
  kIdentity,  // M0 = I
  kL2,        // M0 = l2_opa(A, B)
};

struct RefineRequest {
  EmbeddingMatrix source;  // already mapped into the shared space
  EmbeddingMatrix target;
  RetrievalMethod retrieval = RetrievalMethod::kCsls;
  int csls_k = kDefaultCslsK;
  SolverConfig solver;
  LossKind loss = LossKind::kL1;
  InitialMap initial_map = InitialMap::kIdentity;
  // Swap roles: move the target onto the source instead.
  bool reverse = false;
  // Build the dictionary from the first N rows of each space only.
  std::optional<std::size_t> dictionary_rows;

  /// Throws InvalidArgumentError / DimensionMismatchError / EmptyInputError.
  void validate() const;
};

struct RefineResult {
  EmbeddingMatrix refined;  // moved space, same words and order
  OrthogonalMap map;
  RefinementReport report;
  BilingualDictionary dictionary;  // (moved row, fixed row)
  std::size_t forward_size = 0;
  std::size_t backward_size = 0;
};

/// The dictionary used by both refiners. Throws RefinementImpossibleError
/// when the mutual intersection is empty.
BilingualDictionary bootstrap_dictionary(const RefineRequest& req,
                                         std::size_t* forward_size = nullptr,
                                         std::size_t* backward_size = nullptr);

RefineResult l1_refine(const RefineRequest& req);

/// The report holds two loss_trace points, (0, L1 at I) and (1, L1 at M*),
/// with one step and stop_reason budget_exhausted.
RefineResult l2_refine(const RefineRequest& req);

/// Dispatches on req.loss.
RefineResult refine(const RefineRequest& req);

}  // namespace l1refine
