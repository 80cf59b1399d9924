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

// Bilingual lexicon induction scores and per-pair distance analysis.

#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "l1refine/embed_io.hpp"
#include "l1refine/opa.hpp"
#include "l1refine/retrieval.hpp"

namespace l1refine {

enum class BliMetric { kAcc, kMrr };

std::string_view to_string(BliMetric m);

struct BliResult {
  BliMetric metric = BliMetric::kAcc;
  double value = 0.0;            // in [0, 1]
  std::size_t evaluated = 0;     // gold entries with an in-vocabulary source
  std::size_t skipped_oov = 0;   // the rest
};

inline constexpr int kDefaultMaxRank = 10;

/// Precision at rank 1. Each gold entry whose source is in `source`'s
/// vocabulary scores 1 when the top retrieved target is one of its
/// translations. Sources missing from the vocabulary are skipped and
/// counted. `k` is the CSLS neighbourhood and is ignored for NN retrieval.
///
/// Throws EmptyInputError for an empty gold dictionary or when every gold
/// source is out of vocabulary.
BliResult bli_accuracy(const EmbeddingMatrix& source,
                       const EmbeddingMatrix& target,
                       const GoldDictionary& gold, RetrievalMethod retrieval,
                       int k = kDefaultCslsK);

/// Mean over evaluated entries of 1 / (best 1-based rank of any accepted
/// translation), or 0 when none ranks within max_rank. Equal scores rank
/// the lower target index first.
BliResult bli_mrr(const EmbeddingMatrix& source, const EmbeddingMatrix& target,
                  const GoldDictionary& gold, RetrievalMethod retrieval,
                  int k = kDefaultCslsK, int max_rank = kDefaultMaxRank);

struct DistanceDeltaRow {
  std::size_t pair_id = 0;  // row of A and B
  double original = 0.0;    // |A_i M_before - B_i|
  double refined = 0.0;     // |A_i M_after - B_i|
  double delta = 0.0;       // refined - original
};

struct DistanceDeltaTable {
  std::vector<DistanceDeltaRow> rows;  // by original ascending, then pair_id
};

DistanceDeltaTable distance_delta(const AlignedPairMatrices& p,
                                  const OrthogonalMap& before,
                                  const OrthogonalMap& after);

/// Mean reduction (original - refined) over the top `fraction` of rows by
/// original distance minus the same mean over the bottom `fraction`. Each
/// group holds max(1, floor(fraction * rows)) rows.
double decile_contrast(const DistanceDeltaTable& table, double fraction = 0.1);

/// Quartiles by linear interpolation between order statistics: the p-th
/// quantile of sorted x[0..n-1] sits at position p (n - 1).
struct IqrFence {
  double q1 = 0.0;
  double q3 = 0.0;
  double threshold = 0.0;  // q3 + 1.5 (q3 - q1)
};

IqrFence iqr_fence(const std::vector<double>& values);

/// Indices, ascending, of values strictly above the IQR fence. Throws
/// TooFewValuesError for fewer than 4 values.
std::vector<std::size_t> iqr_outliers(const std::vector<double>& values);

}  // namespace l1refine
