#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "zoprox/error.hpp"
#include "zoprox/estimators.hpp"
#include "zoprox/oracle.hpp"
#include "zoprox/prox.hpp"
#include "zoprox/subproblem.hpp"
#include "zoprox/vector_ops.hpp"

namespace zoprox {

/// k -> delta_k, k -> epsilon_k, k -> eta_k.
using IndexSchedule = std::function<double(std::size_t)>;
/// (k, x_k, x_{k-1}) -> sigma_k; x_{k-1} is empty at k = 0.
using SigmaSchedule =
    std::function<double(std::size_t, std::span<const double>, std::span<const double>)>;

namespace schedules {

/// scale / sqrt(k + 1)
inline IndexSchedule inv_sqrt(double scale = 1.0) {
  return [scale](std::size_t k) { return scale / std::sqrt(static_cast<double>(k) + 1.0); };
}

/// scale / (k + 1)^2, summable.
inline IndexSchedule inv_square(double scale = 1.0) {
  return [scale](std::size_t k) {
    const double kk = static_cast<double>(k) + 1.0;
    return scale / (kk * kk);
  };
}

inline IndexSchedule constant(double value) {
  return [value](std::size_t) { return value; };
}

/// scale * |x_k - x_{k-1}|, with sigma_0 = initial.
inline SigmaSchedule heuristic_sigma(double scale = 5000.0, double initial = 1.0) {
  return [scale, initial](std::size_t k, std::span<const double> x,
                          std::span<const double> x_prev) {
    if (k == 0 || x_prev.empty()) return initial;
    return scale * distance(x, x_prev);
  };
}

inline SigmaSchedule constant_sigma(double value) {
  return [value](std::size_t, std::span<const double>, std::span<const double>) {
    return value;
  };
}

/// Constant sigma = factor * 2 (L_f + L_H); factor >= 1 keeps the descent
/// guarantee.
inline SigmaSchedule theoretical_sigma(double lipschitz_grad, double hess_bound,
                                       double factor = 1.0) {
  return constant_sigma(factor * 2.0 * (lipschitz_grad + hess_bound));
}

}  // namespace schedules

/// Problem constants used by the optional descent assertion.
struct ProblemConstants {
  double lipschitz_grad = 0.0;  // L_f
  double lipschitz_hess = 0.0;  // M_f
  double hess_bound = 0.0;      // L_H
};

struct SolverConfig {
  IndexSchedule delta = schedules::inv_sqrt();
  SigmaSchedule sigma = schedules::heuristic_sigma();
  IndexSchedule epsilon = schedules::inv_square();
  /// Fixed gamma for stationarity reporting. When unset IPZOPM uses
  /// 1 / (max sigma so far + max |H| so far) and ZOPG uses eta_k.
  std::optional<double> gamma;
  IndexSchedule zopg_stepsize = schedules::constant(1e-3);
  double termination_tol = 1e-3;
  std::size_t max_iter = 1000;
  std::uint64_t seed = 0;

  double delta_floor = 1e-6;
  double sigma_floor = 1e-8;
  double hess_cap = 1e8;
  std::size_t max_inner = 10000;

  /// Keep every iterate x_k in the report.
  bool record_iterates = false;
  bool record_timing = true;
  /// Fail the run when h(x_{k+1}) - h(x_k) exceeds
  /// 2 M_f^2 delta_k^4 / sigma_k + eps_k + descent_slack.
  std::optional<ProblemConstants> assert_descent;
  double descent_slack = 1e-8;

  OracleOptions oracle;

  void validate() const {
    if (!delta || !sigma || !epsilon || !zopg_stepsize)
      throw InvalidParameter("solver config has an empty schedule");
    if (gamma && !(*gamma > 0.0)) throw InvalidParameter("gamma must be > 0");
    if (max_iter < 1) throw InvalidParameter("max_iter must be >= 1");
    if (!(termination_tol >= 0.0)) throw InvalidParameter("termination_tol must be >= 0");
    if (!(delta_floor > 0.0) || !(sigma_floor > 0.0) || !(hess_cap > 0.0))
      throw InvalidParameter("floors and caps must be > 0");
  }
};

struct IterationRecord {
  std::size_t k = 0;
  double h_value = 0.0;
  std::uint64_t blackbox_evals = 0;
  double delta = 0.0;
  double sigma = 0.0;
  double epsilon = 0.0;
  std::size_t inner_iters = 0;
  double gap_bound = 0.0;
  /// |P_gamma(x_k)| with the estimated gradient; NaN on the final record.
  double stationarity = std::numeric_limits<double>::quiet_NaN();
  double gamma = std::numeric_limits<double>::quiet_NaN();
  double step_norm = 0.0;
  double wall_ms = 0.0;
  std::size_t hess_clamped = 0;
  /// The inner solver hit max_inner and its best point was accepted.
  bool inexact_flagged = false;
};

enum class TerminationReason { tolerance, max_iter, error };

inline const char* to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::tolerance:
      return "tolerance";
    case TerminationReason::max_iter:
      return "max_iter";
    case TerminationReason::error:
      return "error";
  }
  return "error";
}

struct SolverReport {
  Vector point;
  double h_value = std::numeric_limits<double>::quiet_NaN();
  std::vector<IterationRecord> records;
  TerminationReason reason = TerminationReason::error;
  std::string message;
  std::uint64_t total_evals = 0;
  std::vector<Vector> iterates;

  /// Completed outer iterations (steps taken). On normal termination the
  /// last record only carries h at the final point.
  std::size_t iterations() const noexcept {
    if (records.empty()) return 0;
    return reason == TerminationReason::error ? records.size() : records.size() - 1;
  }
};

/// (1/gamma) (x - prox_{gamma r}(x - gamma grad)).
inline Vector prox_grad_mapping(const Regularizer& reg, std::span<const double> x, double gamma,
                                std::span<const double> grad) {
  if (!(gamma > 0.0)) throw InvalidParameter("prox_grad_mapping requires gamma > 0");
  Vector shifted(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) shifted[i] = x[i] - gamma * grad[i];
  Vector p = prox(reg, shifted, gamma);
  for (std::size_t i = 0; i < x.size(); ++i) p[i] = (x[i] - p[i]) / gamma;
  return p;
}

inline Vector prox_grad_mapping(const ObjectiveModel& model, std::span<const double> x,
                                double gamma, std::span<const double> grad) {
  return prox_grad_mapping(model.regularizer, x, gamma, grad);
}

namespace detail {

class RunClock {
 public:
  explicit RunClock(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  double elapsed_ms() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

inline void check_start(const ObjectiveModel& model, const SolverConfig& config,
                        std::span<const double> x0) {
  model.validate();
  config.validate();
  if (x0.size() != model.dimension) throw InvalidInput("x0 has the wrong dimension");
  if (!all_finite(x0)) throw InvalidInput("x0 has non-finite coordinates");
  if (!std::isfinite(model.regularizer.value(x0)))
    throw InvalidInput("x0 is outside the domain of the regularizer");
}

inline void finish(SolverReport& report, const Oracle& oracle, Vector x, double h,
                   TerminationReason reason, std::string message = {}) {
  report.point = std::move(x);
  report.h_value = h;
  report.reason = reason;
  report.message = std::move(message);
  report.total_evals = oracle.evals();
}

}  // namespace detail

/// Inexact preconditioned zeroth-order proximal method.
///
/// Each iteration samples f at x_k and x_k +- delta_k e_i (2n + 1 black-box
/// calls), builds the gradient and Hessian-diagonal estimates from that one
/// batch, and minimizes the local model with preconditioner H + sigma_k I,
/// exactly when r is separable and to accuracy epsilon_k otherwise. Stops
/// when |h(x_k) - h(x_{k-1})| < termination_tol or after max_iter steps.
/// Oracle and numerical failures end the run with reason `error`; the report
/// then holds the trace up to the last completed iteration and its point.
inline SolverReport ipzopm(const ObjectiveModel& model, const SolverConfig& config,
                           std::span<const double> x0) {
  detail::check_start(model, config, x0);
  Oracle oracle(model, config.oracle);
  const Regularizer& reg = model.regularizer;
  detail::RunClock clock(config.record_timing);

  SolverReport report;
  Vector x(x0.begin(), x0.end());
  Vector x_prev;
  double h_prev = std::numeric_limits<double>::quiet_NaN();
  double descent_bound = std::numeric_limits<double>::infinity();
  double sigma_max = 0.0, hess_max = 0.0;

  for (std::size_t k = 0;; ++k) {
    if (config.record_iterates) report.iterates.push_back(x);
    IterationRecord rec;
    rec.k = k;
    rec.delta = std::max(config.delta(k), config.delta_floor);
    rec.epsilon = config.epsilon(k);
    try {
      const TrialBatch batch = oracle.sample_batch(x, rec.delta);
      double f = batch.value_center;
      if (model.known_smooth) f += model.known_smooth->value(x);
      rec.h_value = f + reg.value(x);
      rec.blackbox_evals = oracle.evals();

      if (k > 0 && rec.h_value - h_prev > descent_bound) {
        rec.wall_ms = clock.elapsed_ms();
        report.records.push_back(rec);
        detail::finish(report, oracle, x, rec.h_value, TerminationReason::error,
                       "descent inequality violated at iteration " + std::to_string(k));
        return report;
      }
      if (k > 0 && std::abs(rec.h_value - h_prev) < config.termination_tol) {
        rec.wall_ms = clock.elapsed_ms();
        report.records.push_back(rec);
        detail::finish(report, oracle, x, rec.h_value, TerminationReason::tolerance);
        return report;
      }
      if (k == config.max_iter) {
        rec.wall_ms = clock.elapsed_ms();
        report.records.push_back(rec);
        detail::finish(report, oracle, x, rec.h_value, TerminationReason::max_iter);
        return report;
      }

      DerivativeEstimates est = estimate_derivatives(batch, model.known_smooth, config.hess_cap);
      rec.hess_clamped = est.clamped;

      double sigma = std::max(config.sigma(k, x, x_prev), config.sigma_floor);
      if (!std::isfinite(sigma)) throw NumericalFailure("sigma schedule returned a non-finite value");
      const double hess_min = *std::min_element(est.hess_diag.begin(), est.hess_diag.end());
      if (hess_min + sigma < config.sigma_floor) sigma = config.sigma_floor - hess_min;
      rec.sigma = sigma;

      sigma_max = std::max(sigma_max, sigma);
      hess_max = std::max(hess_max, norm_inf(est.hess_diag));
      rec.gamma = config.gamma ? *config.gamma : 1.0 / (sigma_max + hess_max);
      rec.stationarity = norm2(prox_grad_mapping(reg, x, rec.gamma, est.grad));

      LocalModel local =
          make_local_model(x, std::move(est.grad), est.hess_diag, sigma, f, reg);
      SubproblemSolution sol;
      if (reg.is_separable()) {
        sol = solve_separable(local);
      } else {
        try {
          sol = solve_inexact(local, rec.epsilon, config.max_inner);
        } catch (const InexactnessFailure& e) {
          sol = SubproblemSolution{e.best_point(), e.best_gap(), e.inner_iters()};
          rec.inexact_flagged = true;
        }
      }
      rec.inner_iters = sol.inner_iters;
      rec.gap_bound = sol.gap_bound;
      rec.step_norm = distance(sol.point, x);
      rec.wall_ms = clock.elapsed_ms();
      report.records.push_back(rec);

      if (config.assert_descent) {
        const double mf = config.assert_descent->lipschitz_hess;
        const double d4 = rec.delta * rec.delta * rec.delta * rec.delta;
        descent_bound = 2.0 * mf * mf * d4 / sigma + rec.epsilon + config.descent_slack;
      }
      h_prev = rec.h_value;
      x_prev = std::move(x);
      x = std::move(sol.point);
    } catch (const std::exception& e) {
      detail::finish(report, oracle, x_prev.empty() ? x : x_prev, h_prev,
                     TerminationReason::error, e.what());
      return report;
    }
  }
}

/// Zeroth-order proximal gradient baseline:
///   x_{k+1} = prox_{eta_k r}(x_k - eta_k G_delta(x_k)).
/// Uses the 2n axis evaluations for the gradient plus one evaluation of
/// f(x_k) for the stopping rule.
inline SolverReport zopg(const ObjectiveModel& model, const SolverConfig& config,
                         std::span<const double> x0) {
  detail::check_start(model, config, x0);
  Oracle oracle(model, config.oracle);
  const Regularizer& reg = model.regularizer;
  detail::RunClock clock(config.record_timing);

  SolverReport report;
  Vector x(x0.begin(), x0.end());
  Vector x_prev;
  double h_prev = std::numeric_limits<double>::quiet_NaN();

  for (std::size_t k = 0;; ++k) {
    if (config.record_iterates) report.iterates.push_back(x);
    IterationRecord rec;
    rec.k = k;
    try {
      rec.h_value = oracle.objective(x);
      rec.blackbox_evals = oracle.evals();
      if (k > 0 && std::abs(rec.h_value - h_prev) < config.termination_tol) {
        rec.wall_ms = clock.elapsed_ms();
        report.records.push_back(rec);
        detail::finish(report, oracle, x, rec.h_value, TerminationReason::tolerance);
        return report;
      }
      if (k == config.max_iter) {
        rec.wall_ms = clock.elapsed_ms();
        report.records.push_back(rec);
        detail::finish(report, oracle, x, rec.h_value, TerminationReason::max_iter);
        return report;
      }

      rec.delta = std::max(config.delta(k), config.delta_floor);
      const TrialBatch batch = oracle.sample_batch(x, rec.delta, false);
      Vector grad = estimate_gradient(batch);
      if (model.known_smooth) {
        const Vector kg = model.known_smooth->gradient(x);
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += kg[i];
      }
      const double eta = config.zopg_stepsize(k);
      if (!(eta > 0.0)) throw InvalidParameter("ZOPG stepsize must be > 0");
      rec.sigma = 1.0 / eta;
      rec.blackbox_evals = oracle.evals();

      Vector shifted(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) shifted[i] = x[i] - eta * grad[i];
      Vector next = prox(reg, shifted, eta);

      rec.gamma = config.gamma ? *config.gamma : eta;
      rec.stationarity = norm2(prox_grad_mapping(reg, x, rec.gamma, grad));
      rec.step_norm = distance(next, x);
      rec.wall_ms = clock.elapsed_ms();
      report.records.push_back(rec);

      h_prev = rec.h_value;
      x_prev = std::move(x);
      x = std::move(next);
    } catch (const std::exception& e) {
      detail::finish(report, oracle, x_prev.empty() ? x : x_prev, h_prev,
                     TerminationReason::error, e.what());
      return report;
    }
  }
}

}  // namespace zoprox
