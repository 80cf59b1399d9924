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

#include "l1refine/retrieval.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "l1refine/error.hpp"

namespace l1refine {
namespace {

constexpr Eigen::Index kBlockRows = 512;

void check_inputs(const Matrix& source, const Matrix& target) {
  if (source.rows() == 0 || target.rows() == 0) {
    throw EmptyInputError("retrieval needs non-empty source and target");
  }
  if (source.cols() != target.cols()) {
    throw DimensionMismatchError(
        "source dimension " + std::to_string(source.cols()) +
        " differs from target dimension " + std::to_string(target.cols()));
  }
}

// Index of the largest entry; first one wins on ties.
Eigen::Index argmax_lowest(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < row.size(); ++j) {
    if (row(j) > row(best)) best = j;
  }
  return best;
}

double mean_of_topk(const Eigen::Ref<const Eigen::RowVectorXd>& row, int k,
                    std::vector<double>& scratch) {
  scratch.assign(row.data(), row.data() + row.size());
  auto kth = scratch.begin() + (k - 1);
  std::nth_element(scratch.begin(), kth, scratch.end(), std::greater<>());
  // After nth_element the first k entries are the k largest, in some order;
  // sort them so the sum is independent of that order.
  std::sort(scratch.begin(), kth + 1, std::greater<>());
  double sum = 0.0;
  for (auto it = scratch.begin(); it != kth + 1; ++it) sum += *it;
  return sum / k;
}

}  // namespace

unsigned retrieval_threads() {
  if (const char* env = std::getenv("L1REFINE_NUM_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void for_each_similarity_block(
    const Matrix& queries, const Matrix& base,
    const std::function<void(Eigen::Index, const Matrix&)>& visit) {
  const Eigen::Index blocks = (queries.rows() + kBlockRows - 1) / kBlockRows;
  auto run_block = [&](Eigen::Index b) {
    const Eigen::Index first = b * kBlockRows;
    const Eigen::Index count = std::min(kBlockRows, queries.rows() - first);
    const Matrix scores = queries.middleRows(first, count) * base.transpose();
    visit(first, scores);
  };
  const unsigned threads =
      std::min<unsigned>(retrieval_threads(), static_cast<unsigned>(blocks));
  if (threads <= 1) {
    for (Eigen::Index b = 0; b < blocks; ++b) run_block(b);
    return;
  }
  std::atomic<Eigen::Index> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (Eigen::Index b = next++; b < blocks; b = next++) {
        try {
          run_block(b);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

Vector mean_topk_similarity(const Matrix& queries, const Matrix& base, int k) {
  if (k < 1 || k > base.rows()) {
    throw InvalidArgumentError("k = " + std::to_string(k) +
                               " outside [1, " + std::to_string(base.rows()) +
                               "]");
  }
  Vector out(queries.rows());
  for_each_similarity_block(queries, base, [&](Eigen::Index first,
                                               const Matrix& scores) {
    std::vector<double> scratch;
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
      out(first + i) = mean_of_topk(scores.row(i), k, scratch);
    }
  });
  return out;
}

BilingualDictionary nn_dictionary(const Matrix& source, const Matrix& target) {
  check_inputs(source, target);
  const Matrix s = unit_normalize_rows(source);
  const Matrix t = unit_normalize_rows(target);
  BilingualDictionary dict;
  dict.pairs.resize(static_cast<std::size_t>(s.rows()));
  for_each_similarity_block(s, t, [&](Eigen::Index first, const Matrix& scores) {
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
      dict.pairs[static_cast<std::size_t>(first + i)] = {
          static_cast<std::size_t>(first + i),
          static_cast<std::size_t>(argmax_lowest(scores.row(i)))};
    }
  });
  return dict;
}

BilingualDictionary nn_dictionary(const EmbeddingMatrix& source,
                                  const EmbeddingMatrix& target) {
  return nn_dictionary(source.vectors(), target.vectors());
}

BilingualDictionary csls_dictionary(const Matrix& source, const Matrix& target,
                                    int k) {
  check_inputs(source, target);
  if (k < 1 || k > std::min(source.rows(), target.rows())) {
    throw InvalidArgumentError(
        "csls k = " + std::to_string(k) + " must lie in [1, " +
        std::to_string(std::min(source.rows(), target.rows())) + "]");
  }
  const Matrix s = unit_normalize_rows(source);
  const Matrix t = unit_normalize_rows(target);
  const Vector r_target = mean_topk_similarity(s, t, k);  // r_T(x)
  const Vector r_source = mean_topk_similarity(t, s, k);  // r_S(y)

  BilingualDictionary dict;
  dict.pairs.resize(static_cast<std::size_t>(s.rows()));
  for_each_similarity_block(s, t, [&](Eigen::Index first, const Matrix& cos) {
    for (Eigen::Index i = 0; i < cos.rows(); ++i) {
      const Eigen::RowVectorXd score =
          2.0 * cos.row(i) - r_source.transpose() -
          Eigen::RowVectorXd::Constant(cos.cols(), r_target(first + i));
      dict.pairs[static_cast<std::size_t>(first + i)] = {
          static_cast<std::size_t>(first + i),
          static_cast<std::size_t>(argmax_lowest(score))};
    }
  });
  return dict;
}

BilingualDictionary csls_dictionary(const EmbeddingMatrix& source,
                                    const EmbeddingMatrix& target, int k) {
  return csls_dictionary(source.vectors(), target.vectors(), k);
}

BilingualDictionary build_dictionary(const Matrix& source, const Matrix& target,
                                     RetrievalMethod method, int k) {
  return method == RetrievalMethod::kCsls ? csls_dictionary(source, target, k)
                                          : nn_dictionary(source, target);
}

BilingualDictionary mutual_intersection(const BilingualDictionary& forward,
                                        const BilingualDictionary& backward) {
  std::vector<std::pair<std::size_t, std::size_t>> reversed;
  reversed.reserve(backward.size());
  for (const auto& [b, a] : backward.pairs) reversed.emplace_back(a, b);
  std::sort(reversed.begin(), reversed.end());

  BilingualDictionary out;
  for (const auto& pair : forward.pairs) {
    if (std::binary_search(reversed.begin(), reversed.end(), pair)) {
      out.pairs.push_back(pair);
    }
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  out.pairs.erase(std::unique(out.pairs.begin(), out.pairs.end()),
                  out.pairs.end());
  return out;
}

AlignedPairMatrices compose_pair_matrices(const BilingualDictionary& dict,
                                          const Matrix& source,
                                          const Matrix& target) {
  if (dict.empty()) {
    throw RefinementImpossibleError("dictionary is empty; nothing to align");
  }
  if (source.cols() != target.cols()) {
    throw DimensionMismatchError(
        "source dimension " + std::to_string(source.cols()) +
        " differs from target dimension " + std::to_string(target.cols()));
  }
  const auto n = static_cast<Eigen::Index>(dict.size());
  Matrix a(n, source.cols());
  Matrix b(n, target.cols());
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto [i, j] = dict.pairs[static_cast<std::size_t>(t)];
    if (i >= static_cast<std::size_t>(source.rows()) ||
        j >= static_cast<std::size_t>(target.rows())) {
      throw InvalidArgumentError("dictionary pair (" + std::to_string(i) +
                                 ", " + std::to_string(j) + ") out of range");
    }
    a.row(t) = source.row(static_cast<Eigen::Index>(i));
    b.row(t) = target.row(static_cast<Eigen::Index>(j));
  }
  return {std::move(a), std::move(b)};
}

}  // namespace l1refine
