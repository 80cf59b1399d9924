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

// Orthogonal Procrustes solvers.
//
// Both solvers look for an orthogonal M minimising a norm of the residual
// AM - B, where row t of A and row t of B are a matched pair of vectors.
//
//  * l2_opa: the closed form M = U V^T from the SVD U S V^T = A^T B.
//  * integrate_l1_flow: the entrywise L1 norm, smoothed as
//      f(M) = sum_ij R_ij tanh(alpha R_ij),   R = AM - B,
//    and minimised by integrating dM/dt = -P_M(grad f) from M0, where P_M
//    projects onto the tangent space of the orthogonal group at M. No
//    retraction is applied; the run stops as soon as the L1 loss goes up,
//    M drifts more than epsilon away from orthogonality, or the time budget
//    is spent.

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace l1refine {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Row-matched source (A) and target (B) vectors, both n x d.
class AlignedPairMatrices {
 public:
  AlignedPairMatrices(Matrix a, Matrix b);

  const Matrix& a() const { return a_; }
  const Matrix& b() const { return b_; }
  Eigen::Index rows() const { return a_.rows(); }
  Eigen::Index dim() const { return a_.cols(); }

 private:
  Matrix a_;
  Matrix b_;
};

/// max_ij |M^T M - I|_ij
double orthogonality_error(const Matrix& m);

/// A square map together with its cached orthogonality error.
class OrthogonalMap {
 public:
  explicit OrthogonalMap(Matrix m);

  static OrthogonalMap identity(Eigen::Index d);

  const Matrix& matrix() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }
  double ortho_error() const { return ortho_error_; }
  bool is_orthogonal(double tol) const { return ortho_error_ <= tol; }

 private:
  Matrix m_;
  double ortho_error_;
};

enum class Integrator {
  kRk4Fixed,     // classical RK4, step dt
  kRk4Adaptive,  // RK4 with step doubling against abs_tol / rel_tol
};

enum class LossComparison {
  kPrevious,       // stop when the loss exceeds the previous check
  kRunningMinimum  // stop when it exceeds the best loss seen so far
};

struct SolverConfig {
  double alpha = 1e8;     // tanh smoothing
  double epsilon = 1e-5;  // allowed max|M^T M - I|
  double dt = 1e-6;       // step (initial step in adaptive mode)
  double t_budget = 5e-3; // total integration time
  double abs_tol = 1e-7;
  double rel_tol = 1e-5;
  int max_order = 15;  // recorded only; the RK4 integrators have fixed order
  int loss_check_stride = 1;
  Integrator integrator = Integrator::kRk4Fixed;
  LossComparison comparison = LossComparison::kPrevious;

  /// Throws InvalidArgumentError unless every field is positive and
  /// dt <= t_budget.
  void validate() const;
};

enum class StopReason { kLossIncreased, kOrthoDrift, kBudgetExhausted };

std::string_view to_string(StopReason r);

struct RefinementReport {
  std::vector<std::pair<double, double>> loss_trace;  // (t, L1 loss)
  StopReason stop_reason = StopReason::kBudgetExhausted;
  double final_ortho_error = 0.0;
  std::size_t steps_taken = 0;
  double wall_time_s = 0.0;
};

struct FlowResult {
  OrthogonalMap map;
  RefinementReport report;
};

/// Closed-form L2 solution M = U V^T of SVD(A^T B). Throws NumericalError
/// on non-finite input.
OrthogonalMap l2_opa(const AlignedPairMatrices& p);

/// Frobenius norm of AM - B.
double l2_loss(const AlignedPairMatrices& p, const Matrix& m);

/// Sum of |AM - B| over all entries.
double l1_loss(const AlignedPairMatrices& p, const Matrix& m);

/// sum_ij R_ij tanh(alpha R_ij) with R = AM - B.
double smoothed_l1_objective(const AlignedPairMatrices& p, const Matrix& m,
                             double alpha);

/// Gradient of smoothed_l1_objective in M:
///   A^T (tanh(Z) + Z .* sech^2(Z)),  Z = alpha (AM - B).
Matrix l1_gradient(const AlignedPairMatrices& p, const Matrix& m, double alpha);

/// 1/2 M (M^T G - G^T M) + (I - M M^T) G
Matrix tangent_project(const Matrix& m, const Matrix& g);

/// Called with (t, M, L1 loss) for M0 and for every later iterate that
/// passes the stopping checks.
using IterateObserver =
    std::function<void(double, const Matrix&, double)>;

/// Integrates the projected L1 flow from m0. The returned map is the last
/// iterate that achieved the lowest L1 loss among accepted checks, so its
/// loss never exceeds that of m0.
///
/// Throws PreconditionError if m0 is not orthogonal within cfg.epsilon and
/// NumericalError if a step produces non-finite values.
FlowResult integrate_l1_flow(const AlignedPairMatrices& p,
                             const OrthogonalMap& m0, const SolverConfig& cfg,
                             const IterateObserver& observe = {});

}  // namespace l1refine
