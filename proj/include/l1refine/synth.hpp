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

// Planted-truth alignment problems.
//
// Randomness comes from std::mt19937_64 (the 64-bit Mersenne Twister, whose
// output sequence is fixed by the C++ standard). Uniforms take the top 53
// bits of each draw; normals use the cosine branch of Box-Muller. No
// std::*_distribution is used, since their output is implementation defined.

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "l1refine/opa.hpp"

namespace l1refine {

class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  double uniform();             // [0, 1)
  double normal();              // N(0, 1)
  std::size_t below(std::size_t bound);  // uniform in [0, bound)
  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols);

 private:
  std::mt19937_64 engine_;
};

struct SyntheticParams {
  std::size_t n = 200;
  std::size_t d = 10;
  double sigma = 0.01;
  double outlier_frac = 0.1;
  double outlier_scale = 1.0;
  std::uint64_t seed = 1;
};

struct SyntheticProblem {
  Matrix a;
  Matrix b;
  Matrix q;                          // planted rotation
  std::vector<bool> outlier_mask;    // per row
  SyntheticParams params;

  std::vector<std::size_t> outlier_indices() const;
  AlignedPairMatrices pairs() const { return {a, b}; }
};

/// Rows of A are random unit vectors; Q is a Haar-random rotation; inlier
/// rows are B_i = A_i Q + N(0, sigma^2) noise and ceil(outlier_frac * n)
/// rows are further pushed outlier_scale along a random unit direction.
/// Perturbed rows are re-normalised.
SyntheticProblem gen_synthetic(const SyntheticParams& params);

/// Number of rows gen_synthetic will contaminate.
std::size_t outlier_count(std::size_t n, double outlier_frac);

/// Random orthogonal matrix via QR with R's diagonal made positive.
/// With `rotation` set, the last column is negated when needed so that
/// det = +1.
Matrix random_orthogonal(SeededRng& rng, Eigen::Index d, bool rotation);

/// q * C where C is the Cayley transform of a seeded random skew matrix
/// with Frobenius norm `magnitude`. Stands in for an imperfect existing
/// alignment near q.
Matrix perturb_rotation(const Matrix& q, double magnitude, std::uint64_t seed);

/// Frobenius norm of M - Q.
double recovery_error(const Matrix& m, const Matrix& q);

}  // namespace l1refine
