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

#include "l1refine/opa.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "l1refine/error.hpp"

namespace l1refine {
namespace {

// Past this |z|, tanh(z) is 1 and sech^2(z) is 0 to double precision.
constexpr double kSaturation = 20.0;

// d/dr [r tanh(alpha r)] evaluated at z = alpha r:
//   tanh(z) + z sech^2(z)
// using exp of non-positive arguments only.
double smoothed_sign_derivative(double z) {
  const double az = std::abs(z);
  if (az > kSaturation) return z > 0 ? 1.0 : -1.0;
  const double e = std::exp(-2.0 * az);
  const double th = std::copysign((1.0 - e) / (1.0 + e), z);
  const double sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
  return th + z * sech2;
}

double stable_tanh(double z) {
  const double az = std::abs(z);
  if (az > kSaturation) return z > 0 ? 1.0 : -1.0;
  const double e = std::exp(-2.0 * az);
  return std::copysign((1.0 - e) / (1.0 + e), z);
}

void check_shapes(const AlignedPairMatrices& p, const Matrix& m) {
  if (m.rows() != p.dim() || m.cols() != p.dim()) {
    throw DimensionMismatchError(
        "map is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
        " but pair matrices have dimension " + std::to_string(p.dim()));
  }
}

// Loss and gradient share the residual product.
struct Evaluation {
  double l1 = 0.0;
  Matrix gradient;
};

Evaluation evaluate(const AlignedPairMatrices& p, const Matrix& m,
                    double alpha) {
  Matrix r = p.a() * m - p.b();
  Evaluation ev;
  ev.l1 = r.cwiseAbs().sum();
  r = r.unaryExpr([alpha](double x) { return smoothed_sign_derivative(alpha * x); });
  ev.gradient = p.a().transpose() * r;
  return ev;
}

using ResidualSigns = Eigen::Matrix<signed char, Eigen::Dynamic, Eigen::Dynamic>;

ResidualSigns residual_signs(const AlignedPairMatrices& p, const Matrix& m) {
  const Matrix r = p.a() * m - p.b();
  return r.unaryExpr([](double x) -> signed char { return (x > 0) - (x < 0); });
}

Matrix flow_velocity(const Matrix& m, const Matrix& gradient) {
  return -tangent_project(m, gradient);
}

// Velocity at m; when `reference` is given, also flags whether any residual
// at m has a different sign from it.
Matrix flow_velocity(const AlignedPairMatrices& p, const Matrix& m,
                     double alpha, const ResidualSigns* reference = nullptr,
                     bool* crossed = nullptr) {
  Matrix r = p.a() * m - p.b();
  if (reference != nullptr) {
    for (Eigen::Index j = 0; j < r.cols() && !*crossed; ++j) {
      for (Eigen::Index i = 0; i < r.rows(); ++i) {
        const double x = r(i, j);
        if (static_cast<signed char>((x > 0) - (x < 0)) != (*reference)(i, j)) {
          *crossed = true;
          break;
        }
      }
    }
  }
  r = r.unaryExpr([alpha](double x) { return smoothed_sign_derivative(alpha * x); });
  return flow_velocity(m, p.a().transpose() * r);
}

// One classical RK4 step; k1 is supplied by the caller (it is the velocity
// at m, already known from the previous loss evaluation). With `reference`
// set, `crossed` reports a residual sign change at any stage point.
Matrix rk4_step(const AlignedPairMatrices& p, const Matrix& m, const Matrix& k1,
                double h, double alpha,
                const ResidualSigns* reference = nullptr,
                bool* crossed = nullptr) {
  const Matrix k2 = flow_velocity(p, m + 0.5 * h * k1, alpha, reference, crossed);
  const Matrix k3 = flow_velocity(p, m + 0.5 * h * k2, alpha, reference, crossed);
  const Matrix k4 = flow_velocity(p, m + h * k3, alpha, reference, crossed);
  return m + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

AlignedPairMatrices::AlignedPairMatrices(Matrix a, Matrix b)
    : a_(std::move(a)), b_(std::move(b)) {
  if (a_.rows() != b_.rows() || a_.cols() != b_.cols()) {
    throw DimensionMismatchError(
        "pair matrices differ in shape: A is " + std::to_string(a_.rows()) +
        "x" + std::to_string(a_.cols()) + ", B is " +
        std::to_string(b_.rows()) + "x" + std::to_string(b_.cols()));
  }
  if (!a_.allFinite() || !b_.allFinite()) {
    throw NumericalError("pair matrices contain non-finite entries");
  }
}

double orthogonality_error(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw DimensionMismatchError("orthogonality_error needs a square matrix");
  }
  const Matrix gram = m.transpose() * m - Matrix::Identity(m.rows(), m.cols());
  return gram.size() == 0 ? 0.0 : gram.cwiseAbs().maxCoeff();
}

OrthogonalMap::OrthogonalMap(Matrix m)
    : m_(std::move(m)), ortho_error_(orthogonality_error(m_)) {}

OrthogonalMap OrthogonalMap::identity(Eigen::Index d) {
  return OrthogonalMap(Matrix::Identity(d, d));
}

void SolverConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidArgumentError(std::string(name) + " must be positive");
    }
  };
  positive(alpha, "alpha");
  positive(epsilon, "epsilon");
  positive(dt, "dt");
  positive(t_budget, "t_budget");
  positive(abs_tol, "abs_tol");
  positive(rel_tol, "rel_tol");
  if (max_order <= 0) throw InvalidArgumentError("max_order must be positive");
  if (loss_check_stride <= 0) {
    throw InvalidArgumentError("loss_check_stride must be positive");
  }
  if (dt > t_budget) throw InvalidArgumentError("dt must not exceed t_budget");
}

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::kLossIncreased: return "loss_increased";
    case StopReason::kOrthoDrift: return "ortho_drift";
    case StopReason::kBudgetExhausted: return "budget_exhausted";
  }
  return "unknown";
}

OrthogonalMap l2_opa(const AlignedPairMatrices& p) {
  const Matrix cross = p.a().transpose() * p.b();
  if (!cross.allFinite()) throw NumericalError("A^T B is not finite");
  Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return OrthogonalMap(svd.matrixU() * svd.matrixV().transpose());
}

double l2_loss(const AlignedPairMatrices& p, const Matrix& m) {
  check_shapes(p, m);
  return (p.a() * m - p.b()).norm();
}

double l1_loss(const AlignedPairMatrices& p, const Matrix& m) {
  check_shapes(p, m);
  return (p.a() * m - p.b()).cwiseAbs().sum();
}

double smoothed_l1_objective(const AlignedPairMatrices& p, const Matrix& m,
                             double alpha) {
  check_shapes(p, m);
  const Matrix r = p.a() * m - p.b();
  return r.unaryExpr([alpha](double x) { return x * stable_tanh(alpha * x); })
      .sum();
}

Matrix l1_gradient(const AlignedPairMatrices& p, const Matrix& m,
                   double alpha) {
  check_shapes(p, m);
  return evaluate(p, m, alpha).gradient;
}

Matrix tangent_project(const Matrix& m, const Matrix& g) {
  if (m.rows() != m.cols() || g.rows() != m.rows() || g.cols() != m.cols()) {
    throw DimensionMismatchError("tangent_project needs square, equal shapes");
  }
  const Matrix mtg = m.transpose() * g;
  const Matrix id = Matrix::Identity(m.rows(), m.cols());
  return 0.5 * m * (mtg - mtg.transpose()) + (id - m * m.transpose()) * g;
}

namespace {

struct StepResult {
  Matrix next;
  double h = 0.0;
};

// Adaptive RK4 step from m (velocity k1, loss `loss`). Proposes h, shrinks
// until the step-doubling estimate passes, and updates h for the next call.
StepResult adaptive_step(const AlignedPairMatrices& p, const Matrix& m,
                         const Matrix& k1, double loss, double& h,
                         double h_max, double h_min, const SolverConfig& cfg,
                         std::size_t step_no) {
  const ResidualSigns signs = residual_signs(p, m);
  for (;;) {
    const double step = std::min(h, h_max);
    bool crossed = false;
    const Matrix full = rk4_step(p, m, k1, step, cfg.alpha, &signs, &crossed);
    const Matrix half =
        rk4_step(p, m, k1, 0.5 * step, cfg.alpha, &signs, &crossed);
    const Matrix two_half =
        rk4_step(p, half, flow_velocity(p, half, cfg.alpha, &signs, &crossed),
                 0.5 * step, cfg.alpha, &signs, &crossed);
    flow_velocity(p, two_half, cfg.alpha, &signs, &crossed);
    const double err = (two_half - full).cwiseAbs().maxCoeff() / 15.0;
    const double tol = cfg.abs_tol + cfg.rel_tol * two_half.cwiseAbs().maxCoeff();
    if (!std::isfinite(err)) {
      throw NumericalError("non-finite state at step " + std::to_string(step_no));
    }
    // Near a kink of the L1 loss the RK4 stages can cancel, leaving a
    // spurious rest point about one step away from the kink that the
    // doubling estimate cannot see. A step that crosses a residual sign
    // change without lowering the loss is treated as failed.
    const bool stalled = crossed && l1_loss(p, two_half) >= loss;
    double factor =
        err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(tol / err, 0.2), 0.2, 5.0);
    if (stalled) factor = std::min(factor, 0.25);
    if ((err <= tol && !stalled) || step <= h_min) {
      // A step clipped by h_max says nothing about h unless it failed.
      if (step == h || factor < 1.0) h = std::clamp(step * factor, h_min, cfg.dt);
      return {two_half, step};
    }
    h = std::max(h_min, step * std::min(factor, 1.0));
  }
}

}  // namespace

FlowResult integrate_l1_flow(const AlignedPairMatrices& p,
                             const OrthogonalMap& m0, const SolverConfig& cfg,
                             const IterateObserver& observe) {
  cfg.validate();
  check_shapes(p, m0.matrix());
  if (!m0.is_orthogonal(cfg.epsilon)) {
    throw PreconditionError("initial map is not orthogonal: max|M^T M - I| = " +
                            std::to_string(m0.ortho_error()) + " > epsilon " +
                            std::to_string(cfg.epsilon));
  }
  const auto started = std::chrono::steady_clock::now();

  RefinementReport report;
  Matrix m = m0.matrix();
  Evaluation ev = evaluate(p, m, cfg.alpha);
  report.loss_trace.emplace_back(0.0, ev.l1);
  if (observe) observe(0.0, m, ev.l1);

  Matrix best = m;
  double best_ortho = m0.ortho_error();
  double best_loss = ev.l1;
  double reference_loss = ev.l1;

  // Fixed mode lands exactly on the budget after this many steps of dt.
  const auto fixed_steps = static_cast<std::size_t>(
      std::max(1.0, std::ceil(cfg.t_budget / cfg.dt - 1e-9)));
  const double h_min = cfg.dt * 1e-6;
  double h = cfg.dt;
  double t = 0.0;
  std::size_t steps = 0;

  for (;;) {
    const Matrix k1 = flow_velocity(m, ev.gradient);
    Matrix next;
    bool out_of_time = false;
    if (cfg.integrator == Integrator::kRk4Fixed) {
      ++steps;
      const double t_next =
          std::min(cfg.t_budget, static_cast<double>(steps) * cfg.dt);
      next = rk4_step(p, m, k1, t_next - t, cfg.alpha);
      t = t_next;
      out_of_time = steps >= fixed_steps;
    } else {
      ++steps;
      const double remaining = cfg.t_budget - t;
      StepResult r = adaptive_step(p, m, k1, ev.l1, h, remaining, h_min, cfg, steps);
      next = std::move(r.next);
      t = r.h == remaining ? cfg.t_budget : t + r.h;
      out_of_time = t >= cfg.t_budget;
    }
    if (!next.allFinite()) {
      throw NumericalError("non-finite state at step " + std::to_string(steps));
    }
    m = std::move(next);
    ev = evaluate(p, m, cfg.alpha);
    if (!std::isfinite(ev.l1) || !ev.gradient.allFinite()) {
      throw NumericalError("non-finite gradient at step " +
                           std::to_string(steps));
    }

    const bool check =
        steps % static_cast<std::size_t>(cfg.loss_check_stride) == 0 ||
        out_of_time;
    if (check) {
      report.loss_trace.emplace_back(t, ev.l1);
      if (ev.l1 > reference_loss) {
        report.stop_reason = StopReason::kLossIncreased;
        break;
      }
      const double drift = orthogonality_error(m);
      if (drift > cfg.epsilon) {
        report.stop_reason = StopReason::kOrthoDrift;
        break;
      }
      if (observe) observe(t, m, ev.l1);
      if (ev.l1 <= best_loss) {
        best = m;
        best_loss = ev.l1;
        best_ortho = drift;
      }
      reference_loss =
          cfg.comparison == LossComparison::kPrevious ? ev.l1 : best_loss;
    }
    if (out_of_time) {
      report.stop_reason = StopReason::kBudgetExhausted;
      break;
    }
  }

  report.steps_taken = steps;
  report.final_ortho_error = best_ortho;
  report.wall_time_s = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - started)
                           .count();
  return {OrthogonalMap(std::move(best)), std::move(report)};
}

}  // namespace l1refine
