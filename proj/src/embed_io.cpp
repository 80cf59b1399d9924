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

#include "l1refine/embed_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "l1refine/error.hpp"

namespace l1refine {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' ||
         c == '\f';
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string where(const std::filesystem::path& path, std::size_t line_no) {
  return path.string() + ":" + std::to_string(line_no);
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> words,
                                 Matrix vectors)
    : words_(std::move(words)), vectors_(std::move(vectors)) {
  if (static_cast<Eigen::Index>(words_.size()) != vectors_.rows()) {
    throw DimensionMismatchError(
        "embedding has " + std::to_string(words_.size()) + " words but " +
        std::to_string(vectors_.rows()) + " rows");
  }
  if (!vectors_.allFinite()) {
    throw FormatError("embedding contains non-finite values");
  }
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], i).second) {
      throw FormatError("duplicate token '" + words_[i] + "'");
    }
  }
}

std::optional<std::size_t> EmbeddingMatrix::index_of(
    std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EmbeddingMatrix EmbeddingMatrix::with_vectors(Matrix vectors) const {
  EmbeddingMatrix out(words_, std::move(vectors));
  out.duplicates_skipped_ = duplicates_skipped_;
  return out;
}

EmbeddingMatrix EmbeddingMatrix::head(std::size_t count) const {
  count = std::min(count, words_.size());
  std::vector<std::string> w(words_.begin(), words_.begin() + count);
  return EmbeddingMatrix(std::move(w),
                         vectors_.topRows(static_cast<Eigen::Index>(count)));
}

std::size_t GoldDictionary::pair_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.targets.size();
  return n;
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path,
                                std::optional<std::size_t> vocab_limit) {
  if (vocab_limit && *vocab_limit == 0) {
    throw InvalidArgumentError("vocab_limit must be positive");
  }
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embeddings file " + path.string());

  std::string line;
  std::size_t line_no = 0;
  std::size_t declared = 0;
  long dim = 0;
  // Header; leading blank lines are tolerated.
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    auto f = split_fields(line);
    if (f.empty()) continue;
    if (f.size() != 2 || !parse_number(f[0], declared) ||
        !parse_number(f[1], dim) || dim <= 0) {
      throw FormatError("malformed header at " + where(path, line_no) +
                        ", expected \"<count> <dim>\"");
    }
    have_header = true;
    break;
  }
  if (!have_header) throw EmptyInputError("no rows loaded from " + path.string());

  const std::size_t want =
      vocab_limit ? std::min(declared, *vocab_limit) : declared;
  std::vector<std::string> words;
  std::vector<double> values;
  words.reserve(want);
  values.reserve(want * static_cast<std::size_t>(dim));
  std::set<std::string, std::less<>> seen;
  std::size_t rows_read = 0;
  std::size_t duplicates = 0;

  while (words.size() < want && rows_read < declared &&
         std::getline(in, line)) {
    ++line_no;
    auto f = split_fields(line);
    if (f.empty()) continue;
    ++rows_read;
    if (static_cast<long>(f.size()) != dim + 1) {
      throw FormatError("dimension mismatch at " + where(path, line_no) +
                        ": expected " + std::to_string(dim) + " values, got " +
                        std::to_string(static_cast<long>(f.size()) - 1));
    }
    const std::size_t base = values.size();
    values.resize(base + static_cast<std::size_t>(dim));
    for (long k = 0; k < dim; ++k) {
      double v = 0.0;
      if (!parse_number(f[static_cast<std::size_t>(k + 1)], v) ||
          !std::isfinite(v)) {
        throw FormatError("bad value '" +
                          std::string(f[static_cast<std::size_t>(k + 1)]) +
                          "' at " + where(path, line_no));
      }
      values[base + static_cast<std::size_t>(k)] = v;
    }
    std::string token(f[0]);
    if (!seen.insert(token).second) {
      ++duplicates;
      values.resize(base);
      continue;
    }
    words.push_back(std::move(token));
  }
  if (words.size() < want && rows_read < declared) {
    throw FormatError(path.string() + " declares " + std::to_string(declared) +
                      " rows but ends after " + std::to_string(rows_read));
  }
  if (words.empty()) {
    throw EmptyInputError("no rows loaded from " + path.string());
  }

  Matrix m(static_cast<Eigen::Index>(words.size()), dim);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < dim; ++k) {
      m(i, k) = values[static_cast<std::size_t>(i * dim + k)];
    }
  }
  EmbeddingMatrix out(std::move(words), std::move(m));
  out.set_duplicates_skipped(duplicates);
  return out;
}

void save_embeddings(const EmbeddingMatrix& emb,
                     const std::filesystem::path& path) {
  if (emb.empty()) throw EmptyInputError("refusing to save empty embeddings");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << emb.size() << ' ' << emb.dim() << '\n';
  char buf[64];
  const Matrix& v = emb.vectors();
  for (std::size_t i = 0; i < emb.size(); ++i) {
    out << emb.words()[i];
    for (Eigen::Index k = 0; k < v.cols(); ++k) {
      auto res = std::to_chars(buf, buf + sizeof buf,
                               v(static_cast<Eigen::Index>(i), k),
                               std::chars_format::general, 6);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

Matrix unit_normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm == 0.0) {
      throw DegenerateVectorError("row " + std::to_string(i) +
                                  " has zero norm");
    }
    out.row(i) /= norm;
  }
  return out;
}

EmbeddingMatrix unit_normalize(const EmbeddingMatrix& emb) {
  const Matrix& v = emb.vectors();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    if (v.row(i).squaredNorm() == 0.0) {
      throw DegenerateVectorError(
          "zero vector for token '" +
          emb.words()[static_cast<std::size_t>(i)] + "'");
    }
  }
  return emb.with_vectors(unit_normalize_rows(v));
}

std::vector<std::pair<std::string, std::string>> load_token_pairs(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dictionary file " + path.string());
  std::vector<std::pair<std::string, std::string>> pairs;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto f = split_fields(line);
    if (f.empty()) continue;
    if (f.size() != 2) {
      throw FormatError("expected 2 fields at " + where(path, line_no) +
                        ", got " + std::to_string(f.size()));
    }
    std::pair<std::string, std::string> p{std::string(f[0]), std::string(f[1])};
    if (seen.insert(p).second) pairs.push_back(std::move(p));
  }
  if (pairs.empty()) {
    throw EmptyInputError("dictionary " + path.string() + " has no entries");
  }
  return pairs;
}

GoldDictionary load_gold_dictionary(const std::filesystem::path& path) {
  GoldDictionary gold;
  std::unordered_map<std::string, std::size_t> slot;
  for (auto& [src, tgt] : load_token_pairs(path)) {
    auto [it, inserted] = slot.emplace(src, gold.entries.size());
    if (inserted) gold.entries.push_back({src, {}});
    gold.entries[it->second].targets.push_back(std::move(tgt));
  }
  return gold;
}

}  // namespace l1refine
