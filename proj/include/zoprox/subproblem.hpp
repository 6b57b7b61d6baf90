#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>

#include "zoprox/error.hpp"
#include "zoprox/prox.hpp"
#include "zoprox/vector_ops.hpp"

namespace zoprox {

/// Diagonally preconditioned local model around `center`:
///
///   l(y) = f_center + <grad, y - x> + 1/2 sum_i tau_i (y_i - x_i)^2 + r(y)
///
/// with tau = hess_diag + sigma. Every tau_i must be positive, which makes
/// l strongly convex with modulus min_i tau_i.
struct LocalModel {
  Vector center;
  Vector grad;
  Vector precond_diag;
  double sigma = 0.0;
  double f_center = 0.0;
  Regularizer regularizer;

  std::size_t dimension() const noexcept { return center.size(); }

  void validate() const {
    const std::size_t n = center.size();
    if (grad.size() != n || precond_diag.size() != n)
      throw InvalidModel("local model vectors have inconsistent sizes");
    for (std::size_t i = 0; i < n; ++i)
      if (!(precond_diag[i] > 0.0) || !std::isfinite(precond_diag[i]))
        throw InvalidModel("preconditioner entry " + std::to_string(i) + " is not positive");
  }
};

inline LocalModel make_local_model(Vector center, Vector grad, std::span<const double> hess_diag,
                                   double sigma, double f_center, Regularizer regularizer) {
  LocalModel m;
  m.precond_diag.resize(hess_diag.size());
  for (std::size_t i = 0; i < hess_diag.size(); ++i) m.precond_diag[i] = hess_diag[i] + sigma;
  m.center = std::move(center);
  m.grad = std::move(grad);
  m.sigma = sigma;
  m.f_center = f_center;
  m.regularizer = std::move(regularizer);
  m.validate();
  return m;
}

inline double model_value(const LocalModel& model, std::span<const double> y) {
  double lin = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - model.center[i];
    lin += model.grad[i] * d;
    quad += model.precond_diag[i] * d * d;
  }
  return model.f_center + lin + 0.5 * quad + model.regularizer.value(y);
}

struct SubproblemSolution {
  Vector point;
  /// Certified upper bound on l(point) - inf l.
  double gap_bound = 0.0;
  std::size_t inner_iters = 0;
};

/// Exact minimizer for separable r:
///   y_i = prox_{r_i / tau_i}(x_i - grad_i / tau_i).
inline SubproblemSolution solve_separable(const LocalModel& model) {
  model.validate();
  if (!model.regularizer.is_separable())
    throw InvalidModel("solve_separable requires a separable regularizer");
  const std::size_t n = model.dimension();
  SubproblemSolution sol;
  sol.point.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double tau = model.precond_diag[i];
    sol.point[i] = model.regularizer.piece(i).prox_unchecked(
        model.center[i] - model.grad[i] / tau, 1.0 / tau);
  }
  return sol;
}

/// Proximal-gradient iterations on l with stepsize 1/M, M = max tau_i,
/// warm-started at the center. After each step y -> y+ the residual
/// g = M (y - y+) bounds dist(0, dl(y+)), so l(y+) - inf l <= |g|^2 / (2 m)
/// with m = min tau_i. Returns the first y+ whose bound is <= epsilon.
inline SubproblemSolution solve_inexact(const LocalModel& model, double epsilon,
                                        std::size_t max_inner = 10000) {
  model.validate();
  if (!(epsilon > 0.0)) throw InvalidParameter("solve_inexact requires epsilon > 0");
  const std::size_t n = model.dimension();
  const auto [lo, hi] = std::minmax_element(model.precond_diag.begin(), model.precond_diag.end());
  const double m = *lo, big_m = *hi;
  const double step = 1.0 / big_m;

  Vector y = model.center;
  Vector trial(n);
  Vector best_point = y;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= max_inner; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      const double smooth_grad = model.grad[i] + model.precond_diag[i] * (y[i] - model.center[i]);
      trial[i] = y[i] - step * smooth_grad;
    }
    Vector next = prox(model.regularizer, trial, step);
    double res2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = big_m * (y[i] - next[i]);
      res2 += g * g;
    }
    const double gap = res2 / (2.0 * m);
    if (gap < best_gap) {
      best_gap = gap;
      best_point = next;
    }
    if (gap <= epsilon) return SubproblemSolution{std::move(next), gap, it};
    y = std::move(next);
  }
  throw InexactnessFailure("inner solver did not certify the model gap", best_gap,
                           std::move(best_point), max_inner);
}

}  // namespace zoprox
