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

#include "l1refine/eval.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "l1refine/error.hpp"

namespace l1refine {
namespace {

struct Query {
  std::size_t source_row;
  std::vector<std::size_t> accepted;  // target rows, may be empty
};

// Best 1-based rank among `accepted` under descending score, lower index
// first on ties; 0 when `accepted` is empty.
std::size_t best_rank(const Eigen::Ref<const Eigen::RowVectorXd>& scores,
                      const std::vector<std::size_t>& accepted) {
  std::size_t best = 0;
  for (const std::size_t j : accepted) {
    const double s = scores(static_cast<Eigen::Index>(j));
    std::size_t rank = 1;
    for (Eigen::Index c = 0; c < scores.size(); ++c) {
      const double other = scores(c);
      if (other > s || (other == s && static_cast<std::size_t>(c) < j)) ++rank;
    }
    if (best == 0 || rank < best) best = rank;
  }
  return best;
}

BliResult score(const EmbeddingMatrix& source, const EmbeddingMatrix& target,
                const GoldDictionary& gold, RetrievalMethod retrieval, int k,
                int max_rank, BliMetric metric) {
  if (gold.entries.empty()) throw EmptyInputError("gold dictionary is empty");
  if (source.empty() || target.empty()) {
    throw EmptyInputError("evaluation needs non-empty source and target");
  }
  if (source.dim() != target.dim()) {
    throw DimensionMismatchError(
        "source dimension " + std::to_string(source.dim()) +
        " differs from target dimension " + std::to_string(target.dim()));
  }
  if (max_rank < 1) throw InvalidArgumentError("max_rank must be >= 1");
  const auto min_rows = std::min(source.size(), target.size());
  if (retrieval == RetrievalMethod::kCsls &&
      (k < 1 || static_cast<std::size_t>(k) > min_rows)) {
    throw InvalidArgumentError("csls k = " + std::to_string(k) +
                               " must lie in [1, " + std::to_string(min_rows) +
                               "]");
  }

  BliResult result;
  result.metric = metric;
  std::vector<Query> queries;
  for (const GoldEntry& e : gold.entries) {
    const auto row = source.index_of(e.source);
    if (!row) {
      ++result.skipped_oov;
      continue;
    }
    Query q{*row, {}};
    for (const std::string& t : e.targets) {
      if (const auto j = target.index_of(t)) q.accepted.push_back(*j);
    }
    queries.push_back(std::move(q));
  }
  result.evaluated = queries.size();
  if (queries.empty()) {
    throw EmptyInputError("all " + std::to_string(result.skipped_oov) +
                          " gold sources are out of vocabulary");
  }

  const Matrix s = unit_normalize_rows(source.vectors());
  const Matrix t = unit_normalize_rows(target.vectors());
  Matrix query_rows(static_cast<Eigen::Index>(queries.size()), s.cols());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    query_rows.row(static_cast<Eigen::Index>(i)) =
        s.row(static_cast<Eigen::Index>(queries[i].source_row));
  }
  Vector r_source;  // r_S(y) for every target y
  Vector r_target;  // r_T(x) for every query x
  if (retrieval == RetrievalMethod::kCsls) {
    r_source = mean_topk_similarity(t, s, k);
    r_target = mean_topk_similarity(query_rows, t, k);
  }

  std::vector<double> per_query(queries.size(), 0.0);
  for_each_similarity_block(
      query_rows, t, [&](Eigen::Index first, const Matrix& cos) {
        for (Eigen::Index i = 0; i < cos.rows(); ++i) {
          const auto qi = static_cast<std::size_t>(first + i);
          Eigen::RowVectorXd row = cos.row(i);
          if (retrieval == RetrievalMethod::kCsls) {
            row = 2.0 * row - r_source.transpose();
            row.array() -= r_target(first + i);
          }
          const std::size_t rank = best_rank(row, queries[qi].accepted);
          if (rank != 0 && rank <= static_cast<std::size_t>(max_rank)) {
            per_query[qi] = 1.0 / static_cast<double>(rank);
          }
        }
      });
  double sum = 0.0;
  for (const double v : per_query) sum += v;
  result.value = sum / static_cast<double>(queries.size());
  return result;
}

double interpolated_quantile(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::string_view to_string(BliMetric m) {
  return m == BliMetric::kMrr ? "mrr" : "acc";
}

BliResult bli_accuracy(const EmbeddingMatrix& source,
                       const EmbeddingMatrix& target,
                       const GoldDictionary& gold, RetrievalMethod retrieval,
                       int k) {
  return score(source, target, gold, retrieval, k, 1, BliMetric::kAcc);
}

BliResult bli_mrr(const EmbeddingMatrix& source, const EmbeddingMatrix& target,
                  const GoldDictionary& gold, RetrievalMethod retrieval, int k,
                  int max_rank) {
  return score(source, target, gold, retrieval, k, max_rank, BliMetric::kMrr);
}

DistanceDeltaTable distance_delta(const AlignedPairMatrices& p,
                                  const OrthogonalMap& before,
                                  const OrthogonalMap& after) {
  if (before.dim() != p.dim() || after.dim() != p.dim()) {
    throw DimensionMismatchError(
        "maps must be " + std::to_string(p.dim()) + "x" +
        std::to_string(p.dim()) + " to match the pair matrices");
  }
  const Vector original = (p.a() * before.matrix() - p.b()).rowwise().norm();
  const Vector refined = (p.a() * after.matrix() - p.b()).rowwise().norm();
  DistanceDeltaTable table;
  table.rows.reserve(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    table.rows.push_back({static_cast<std::size_t>(i), original(i), refined(i),
                          refined(i) - original(i)});
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const DistanceDeltaRow& x, const DistanceDeltaRow& y) {
                     return x.original < y.original;
                   });
  return table;
}

double decile_contrast(const DistanceDeltaTable& table, double fraction) {
  if (table.rows.empty()) throw EmptyInputError("distance table is empty");
  if (!(fraction > 0.0 && fraction <= 0.5)) {
    throw InvalidArgumentError("fraction must lie in (0, 0.5]");
  }
  const std::size_t n = table.rows.size();
  const std::size_t group = std::max<std::size_t>(
      1, static_cast<std::size_t>(fraction * static_cast<double>(n)));
  double top = 0.0;
  double bottom = 0.0;
  for (std::size_t i = 0; i < group; ++i) {
    bottom -= table.rows[i].delta;
    top -= table.rows[n - 1 - i].delta;
  }
  return (top - bottom) / static_cast<double>(group);
}

IqrFence iqr_fence(const std::vector<double>& values) {
  if (values.size() < 4) {
    throw TooFewValuesError("IQR rule needs at least 4 values, got " +
                            std::to_string(values.size()));
  }
  for (const double v : values) {
    if (!std::isfinite(v)) throw InvalidArgumentError("IQR values must be finite");
  }
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  IqrFence f;
  f.q1 = interpolated_quantile(sorted, 0.25);
  f.q3 = interpolated_quantile(sorted, 0.75);
  f.threshold = f.q3 + 1.5 * (f.q3 - f.q1);
  return f;
}

std::vector<std::size_t> iqr_outliers(const std::vector<double>& values) {
  const IqrFence fence = iqr_fence(values);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] > fence.threshold) out.push_back(i);
  }
  return out;
}

}  // namespace l1refine
