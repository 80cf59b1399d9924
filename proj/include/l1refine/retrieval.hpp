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

#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "l1refine/embed_io.hpp"
#include "l1refine/opa.hpp"

namespace l1refine {

enum class RetrievalMethod { kNearestNeighbour, kCsls };

/// Ordered (source row, target row) index pairs.
struct BilingualDictionary {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
  bool operator==(const BilingualDictionary&) const = default;
};

inline constexpr int kDefaultCslsK = 10;

/// For each source row, the target row of highest cosine similarity.
/// Ties go to the lowest target index.
BilingualDictionary nn_dictionary(const Matrix& source, const Matrix& target);
BilingualDictionary nn_dictionary(const EmbeddingMatrix& source,
                                  const EmbeddingMatrix& target);

/// For each source row, the target row maximising
///   csls(x, y) = 2 cos(x, y) - r_T(x) - r_S(y)
/// where r_T(x) is the mean cosine of x to its k nearest targets and r_S(y)
/// the mean cosine of y to its k nearest sources.
BilingualDictionary csls_dictionary(const Matrix& source, const Matrix& target,
                                    int k = kDefaultCslsK);
BilingualDictionary csls_dictionary(const EmbeddingMatrix& source,
                                    const EmbeddingMatrix& target,
                                    int k = kDefaultCslsK);

BilingualDictionary build_dictionary(const Matrix& source, const Matrix& target,
                                     RetrievalMethod method, int k);

/// Pairs (i, j) of `forward` whose reverse (j, i) appears in `backward`,
/// sorted by i.
BilingualDictionary mutual_intersection(const BilingualDictionary& forward,
                                        const BilingualDictionary& backward);

/// Stacks the dictionary's source rows into A and target rows into B.
/// Throws RefinementImpossibleError on an empty dictionary.
AlignedPairMatrices compose_pair_matrices(const BilingualDictionary& dict,
                                          const Matrix& source,
                                          const Matrix& target);

// Mean cosine of every query row to its k most similar rows of `base`.
// Both inputs must already be unit-normalised.
Vector mean_topk_similarity(const Matrix& queries, const Matrix& base, int k);

/// Calls `visit(first_row, scores)` for consecutive row blocks of the
/// cosine matrix queries * base^T. Blocks are a fixed size so results do not
/// depend on how many threads run them; `visit` may be invoked concurrently
/// for different blocks.
void for_each_similarity_block(
    const Matrix& queries, const Matrix& base,
    const std::function<void(Eigen::Index, const Matrix&)>& visit);

/// Worker threads used by blocked retrieval: L1REFINE_NUM_THREADS if set,
/// else the hardware concurrency.
unsigned retrieval_threads();

}  // namespace l1refine
