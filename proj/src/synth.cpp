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

#include "l1refine/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "l1refine/error.hpp"

namespace l1refine {

double SeededRng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double SeededRng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t SeededRng::below(std::size_t bound) {
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = 0;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

Matrix SeededRng::normal_matrix(Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  // Row-major fill order, fixed for reproducibility.
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal();
  }
  return m;
}

Matrix random_orthogonal(SeededRng& rng, Eigen::Index d, bool rotation) {
  const Matrix g = rng.normal_matrix(d, d);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  if (rotation && q.determinant() < 0) q.col(d - 1) = -q.col(d - 1);
  return q;
}

std::size_t outlier_count(std::size_t n, double outlier_frac) {
  // The small offset keeps products like 0.1 * 200 from rounding up.
  const double raw = outlier_frac * static_cast<double>(n);
  return std::min(n, static_cast<std::size_t>(std::ceil(raw - 1e-9)));
}

std::vector<std::size_t> SyntheticProblem::outlier_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < outlier_mask.size(); ++i) {
    if (outlier_mask[i]) out.push_back(i);
  }
  return out;
}

SyntheticProblem gen_synthetic(const SyntheticParams& params) {
  const auto& [n, d, sigma, frac, scale, seed] = params;
  if (d < 2 || n < d) {
    throw InvalidArgumentError("synthetic problems need n >= d >= 2");
  }
  if (!(frac >= 0.0 && frac < 1.0)) {
    throw InvalidArgumentError("outlier_frac must lie in [0, 1)");
  }
  if (!(sigma >= 0.0) || !std::isfinite(sigma) || !(scale >= 0.0) ||
      !std::isfinite(scale)) {
    throw InvalidArgumentError("sigma and outlier_scale must be finite and >= 0");
  }

  SeededRng rng(seed);
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(d);

  SyntheticProblem prob;
  prob.params = params;
  prob.a = rng.normal_matrix(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) prob.a.row(i).normalize();
  prob.q = random_orthogonal(rng, cols, /*rotation=*/true);

  // Partial Fisher-Yates picks the contaminated rows.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  const std::size_t n_out = outlier_count(n, frac);
  for (std::size_t i = 0; i < n_out; ++i) {
    std::swap(order[i], order[i + rng.below(n - i)]);
  }
  prob.outlier_mask.assign(n, false);
  for (std::size_t i = 0; i < n_out; ++i) prob.outlier_mask[order[i]] = true;

  prob.b = prob.a * prob.q;
  if (sigma > 0.0) prob.b += sigma * rng.normal_matrix(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!prob.outlier_mask[static_cast<std::size_t>(i)]) continue;
    Vector dir = rng.normal_matrix(1, cols).row(0).transpose();
    dir.normalize();
    prob.b.row(i) += scale * dir.transpose();
  }
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (sigma > 0.0 || prob.outlier_mask[static_cast<std::size_t>(i)]) {
      const double norm = prob.b.row(i).norm();
      if (norm > 0.0) prob.b.row(i) /= norm;
    }
  }
  return prob;
}

Matrix perturb_rotation(const Matrix& q, double magnitude,
                        std::uint64_t seed) {
  if (q.rows() != q.cols()) {
    throw DimensionMismatchError("perturb_rotation needs a square matrix");
  }
  if (!(magnitude >= 0.0) || !std::isfinite(magnitude)) {
    throw InvalidArgumentError("perturbation magnitude must be finite and >= 0");
  }
  const Eigen::Index d = q.rows();
  SeededRng rng(seed);
  const Matrix g = rng.normal_matrix(d, d);
  Matrix k = g - g.transpose();
  const double norm = k.norm();
  if (norm > 0.0) k *= magnitude / norm;
  const Matrix id = Matrix::Identity(d, d);
  return q * (id - 0.5 * k).partialPivLu().solve(id + 0.5 * k);
}

double recovery_error(const Matrix& m, const Matrix& q) {
  if (m.rows() != q.rows() || m.cols() != q.cols()) {
    throw DimensionMismatchError("recovery_error needs equal shapes");
  }
  return (m - q).norm();
}

}  // namespace l1refine
