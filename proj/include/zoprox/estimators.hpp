#pragma once

#include <cmath>
#include <cstddef>
#include <optional>

#include "zoprox/error.hpp"
#include "zoprox/oracle.hpp"

namespace zoprox {

/// Central-difference gradient: (f(x + d e_i) - f(x - d e_i)) / (2 d).
inline Vector estimate_gradient(const TrialBatch& batch) {
  const std::size_t n = batch.dimension();
  Vector g(n);
  const double inv = 1.0 / (2.0 * batch.delta);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = (batch.values_plus[i] - batch.values_minus[i]) * inv;
    if (!std::isfinite(g[i]))
      throw NumericalFailure("gradient estimate is non-finite at coordinate " + std::to_string(i));
  }
  return g;
}

/// Second difference along each axis: (f(x + d e_i) + f(x - d e_i) - 2 f(x)) / d^2.
inline Vector estimate_hess_diag(const TrialBatch& batch) {
  const std::size_t n = batch.dimension();
  Vector h(n);
  const double inv = 1.0 / (batch.delta * batch.delta);
  for (std::size_t i = 0; i < n; ++i) {
    h[i] = (batch.values_plus[i] + batch.values_minus[i] - 2.0 * batch.value_center) * inv;
    if (!std::isfinite(h[i]))
      throw NumericalFailure("Hessian diagonal estimate is non-finite at coordinate " +
                             std::to_string(i));
  }
  return h;
}

struct DerivativeEstimates {
  Vector grad;
  Vector hess_diag;
  double delta = 0.0;
  /// Number of diagonal entries clamped into [-hess_cap, hess_cap].
  std::size_t clamped = 0;
};

/// Gradient and Hessian-diagonal estimates of f = blackbox + known_smooth
/// from one batch. The black-box diagonal is clamped to [-hess_cap, hess_cap];
/// the known part is added exactly afterwards.
inline DerivativeEstimates estimate_derivatives(const TrialBatch& batch,
                                                const std::optional<KnownSmooth>& known,
                                                double hess_cap = 1e8) {
  DerivativeEstimates est;
  est.delta = batch.delta;
  est.grad = estimate_gradient(batch);
  est.hess_diag = estimate_hess_diag(batch);
  for (double& h : est.hess_diag) {
    if (h > hess_cap) {
      h = hess_cap;
      ++est.clamped;
    } else if (h < -hess_cap) {
      h = -hess_cap;
      ++est.clamped;
    }
  }
  if (known) {
    const Vector kg = known->gradient(batch.center);
    const Vector kh = known->hess_diag(batch.center);
    for (std::size_t i = 0; i < est.grad.size(); ++i) {
      est.grad[i] += kg[i];
      est.hess_diag[i] += kh[i];
    }
  }
  return est;
}

}  // namespace zoprox
