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
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace l1refine {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A vocabulary paired with one dense row per word.
///
/// Tokens are compared by exact byte equality. Row i of vectors() belongs to
/// words()[i]. Instances are immutable once built; transformations return new
/// matrices.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  // Throws DimensionMismatchError if words.size() != vectors.rows(),
  // FormatError on duplicate tokens or non-finite entries.
  EmbeddingMatrix(std::vector<std::string> words, Matrix vectors);

  const std::vector<std::string>& words() const { return words_; }
  const Matrix& vectors() const { return vectors_; }
  std::size_t size() const { return words_.size(); }
  Eigen::Index dim() const { return vectors_.cols(); }
  bool empty() const { return words_.empty(); }

  std::optional<std::size_t> index_of(std::string_view token) const;

  // Rows dropped by the loader because the token had been seen already.
  std::size_t duplicates_skipped() const { return duplicates_skipped_; }
  void set_duplicates_skipped(std::size_t n) { duplicates_skipped_ = n; }

  // Same vocabulary, new values (e.g. after applying a map).
  EmbeddingMatrix with_vectors(Matrix vectors) const;

  // First `count` rows.
  EmbeddingMatrix head(std::size_t count) const;

 private:
  std::vector<std::string> words_;
  Matrix vectors_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t duplicates_skipped_ = 0;
};

/// Gold-standard translations: each source token with every acceptable
/// target, in first-seen order.
struct GoldEntry {
  std::string source;
  std::vector<std::string> targets;  // unique, non-empty
};

struct GoldDictionary {
  std::vector<GoldEntry> entries;

  std::size_t pair_count() const;
};

/// Reads the word2vec text format: a "<count> <dim>" header, then one
/// "<token> <dim floats>" row per line. Keeps the first
/// min(count, vocab_limit) entries.
EmbeddingMatrix load_embeddings(const std::filesystem::path& path,
                                std::optional<std::size_t> vocab_limit = {});

/// Writes the same text format with 6 significant digits per value.
void save_embeddings(const EmbeddingMatrix& emb,
                     const std::filesystem::path& path);

/// Scales every row to unit Euclidean norm. Throws DegenerateVectorError
/// naming the token of the first all-zero row.
EmbeddingMatrix unit_normalize(const EmbeddingMatrix& emb);

// Matrix-only variant used internally by retrieval.
Matrix unit_normalize_rows(const Matrix& m);

/// Reads "<src> <tgt>" lines, grouping targets per source. Exact duplicate
/// lines collapse to one pair.
GoldDictionary load_gold_dictionary(const std::filesystem::path& path);

/// Reads the same pair format without grouping: every distinct pair in file
/// order. Used where a pair's position is its identity.
std::vector<std::pair<std::string, std::string>> load_token_pairs(
    const std::filesystem::path& path);

}  // namespace l1refine
