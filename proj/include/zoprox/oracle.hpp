#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "zoprox/error.hpp"
#include "zoprox/prox.hpp"
#include "zoprox/rng.hpp"
#include "zoprox/vector_ops.hpp"

namespace zoprox {

using Blackbox = std::function<double(std::span<const double>)>;

/// Structured batch evaluation of the black box along the coordinate axes.
/// Must fill plus[i] = f(x + delta e_i) and minus[i] = f(x - delta e_i) and
/// return f(x). Counts as 2n + 1 black-box evaluations. Problems whose
/// evaluation can reuse work across axis perturbations (LASSO, sparse
/// classification) provide one; the values agree with `blackbox` up to
/// rounding.
using AxisSampler = std::function<double(std::span<const double> x, double delta,
                                         std::span<double> plus,
                                         std::span<double> minus)>;

/// Analytic smooth term with exact value, gradient and Hessian diagonal.
struct KnownSmooth {
  std::function<double(std::span<const double>)> value;
  std::function<Vector(std::span<const double>)> gradient;
  std::function<Vector(std::span<const double>)> hess_diag;

  /// lambda * |x|^2
  static KnownSmooth squared_l2(double lambda) {
    if (!(lambda >= 0.0)) throw InvalidParameter("squared_l2 weight must be >= 0");
    KnownSmooth k;
    k.value = [lambda](std::span<const double> x) { return lambda * dot(x, x); };
    k.gradient = [lambda](std::span<const double> x) {
      Vector g(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) g[i] = 2.0 * lambda * x[i];
      return g;
    };
    k.hess_diag = [lambda](std::span<const double> x) {
      return Vector(x.size(), 2.0 * lambda);
    };
    return k;
  }
};

/// Composite objective h = f + r, where f = blackbox (+ known_smooth).
struct ObjectiveModel {
  std::size_t dimension = 0;
  Blackbox blackbox;
  std::optional<KnownSmooth> known_smooth;
  Regularizer regularizer;
  AxisSampler axis_sampler;
  /// The black box may be called from several threads at once.
  bool concurrency_safe = false;

  void validate() const {
    if (dimension < 1) throw InvalidInput("objective dimension must be >= 1");
    if (!blackbox) throw InvalidInput("objective has no black box");
  }
};

/// Thread-safe count of black-box invocations.
class EvalCounter {
 public:
  EvalCounter() = default;
  EvalCounter(const EvalCounter&) = delete;
  EvalCounter& operator=(const EvalCounter&) = delete;

  void add(std::uint64_t n) noexcept { total_.fetch_add(n, std::memory_order_relaxed); }
  std::uint64_t total() const noexcept { return total_.load(std::memory_order_relaxed); }

 private:
  std::atomic<std::uint64_t> total_{0};
};

/// The 2n + 1 black-box values around a center point.
struct TrialBatch {
  Vector center;
  double delta = 0.0;
  Vector values_plus;
  Vector values_minus;
  double value_center = 0.0;

  std::size_t dimension() const noexcept { return center.size(); }
};

struct OracleOptions {
  /// Worker threads for sample_batch; only used when the model is
  /// concurrency_safe and has no axis sampler.
  std::size_t threads = 1;
  /// Re-evaluate one random trial point per batch and fail on mismatch.
  bool purity_check = false;
  std::uint64_t purity_seed = 0;
};

/// Counting front end to an ObjectiveModel. All black-box access in the
/// library goes through here.
class Oracle {
 public:
  explicit Oracle(ObjectiveModel model, OracleOptions options = {})
      : model_(std::move(model)), options_(options), purity_rng_(options.purity_seed) {
    model_.validate();
  }

  const ObjectiveModel& model() const noexcept { return model_; }
  std::size_t dimension() const noexcept { return model_.dimension; }
  std::uint64_t evals() const noexcept { return counter_.total(); }
  const EvalCounter& counter() const noexcept { return counter_; }

  /// blackbox(x), one counted evaluation.
  double blackbox_value(std::span<const double> x) {
    check_point(x);
    return call_blackbox(x);
  }

  /// f(x) = blackbox(x) + known_smooth(x).
  double evaluate(std::span<const double> x) {
    double v = blackbox_value(x);
    if (model_.known_smooth) v += model_.known_smooth->value(x);
    return v;
  }

  /// h(x) = f(x) + r(x).
  double objective(std::span<const double> x) {
    return evaluate(x) + model_.regularizer.value(x);
  }

  /// Samples the black box at x and x +- delta e_i. When include_center is
  /// false only the 2n axis points are evaluated and value_center is NaN.
  TrialBatch sample_batch(std::span<const double> x, double delta, bool include_center = true) {
    if (!(delta > 0.0) || !std::isfinite(delta))
      throw InvalidParameter("sample_batch requires finite delta > 0");
    check_point(x);
    const std::size_t n = x.size();
    TrialBatch batch;
    batch.center.assign(x.begin(), x.end());
    batch.delta = delta;
    batch.values_plus.resize(n);
    batch.values_minus.resize(n);
    batch.value_center = std::numeric_limits<double>::quiet_NaN();

    if (model_.axis_sampler) {
      const double fc = model_.axis_sampler(x, delta, batch.values_plus, batch.values_minus);
      counter_.add(2 * n + (include_center ? 1 : 0));
      if (include_center) {
        if (!std::isfinite(fc)) throw OracleFailure("black box returned " + fmt(fc), batch.center);
        batch.value_center = fc;
      }
      check_batch_values(batch);
    } else {
      if (include_center) batch.value_center = call_blackbox(x);
      const std::size_t workers =
          model_.concurrency_safe ? std::min(options_.threads, n) : std::size_t{1};
      if (workers <= 1) {
        sample_axes(batch, 0, n);
      } else {
        std::vector<std::exception_ptr> errors(workers);
        {
          std::vector<std::jthread> pool;
          pool.reserve(workers);
          const std::size_t chunk = (n + workers - 1) / workers;
          for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
            pool.emplace_back([this, &batch, &errors, w, lo, hi] {
              try {
                sample_axes(batch, lo, hi);
              } catch (...) {
                errors[w] = std::current_exception();
              }
            });
          }
        }
        for (auto& e : errors)
          if (e) std::rethrow_exception(e);
      }
    }
    if (options_.purity_check) verify_purity(batch, include_center);
    return batch;
  }

 private:
  static std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  }

  void check_point(std::span<const double> x) const {
    if (x.size() != model_.dimension)
      throw InvalidInput("point has " + std::to_string(x.size()) + " coordinates, expected " +
                         std::to_string(model_.dimension));
    if (!all_finite(x)) throw InvalidInput("point has non-finite coordinates");
  }

  double call_blackbox(std::span<const double> x) {
    const double v = model_.blackbox(x);
    counter_.add(1);
    if (!std::isfinite(v)) throw OracleFailure("black box returned " + fmt(v), Vector(x.begin(), x.end()));
    return v;
  }

  Vector trial_point(const TrialBatch& batch, std::size_t i, double sign) const {
    Vector p = batch.center;
    p[i] += sign * batch.delta;
    return p;
  }

  void sample_axes(TrialBatch& batch, std::size_t lo, std::size_t hi) {
    Vector p = batch.center;
    for (std::size_t i = lo; i < hi; ++i) {
      const double xi = p[i];
      p[i] = xi + batch.delta;
      batch.values_plus[i] = call_blackbox(p);
      p[i] = xi - batch.delta;
      batch.values_minus[i] = call_blackbox(p);
      p[i] = xi;
    }
  }

  void check_batch_values(const TrialBatch& batch) const {
    for (std::size_t i = 0; i < batch.dimension(); ++i) {
      if (!std::isfinite(batch.values_plus[i]))
        throw OracleFailure("black box returned " + fmt(batch.values_plus[i]),
                            trial_point(batch, i, 1.0));
      if (!std::isfinite(batch.values_minus[i]))
        throw OracleFailure("black box returned " + fmt(batch.values_minus[i]),
                            trial_point(batch, i, -1.0));
    }
  }

  void verify_purity(const TrialBatch& batch, bool include_center) {
    const std::size_t n = batch.dimension();
    const std::size_t slots = 2 * n + (include_center ? 1 : 0);
    const std::size_t pick = static_cast<std::size_t>(purity_rng_.next_u64() % slots);
    Vector p = batch.center;
    double recorded;
    if (pick == 2 * n) {
      recorded = batch.value_center;
    } else if (pick < n) {
      p[pick] += batch.delta;
      recorded = batch.values_plus[pick];
    } else {
      p[pick - n] -= batch.delta;
      recorded = batch.values_minus[pick - n];
    }
    const double again = call_blackbox(p);
    // The structured sampler may differ from the plain black box by rounding.
    const double tol = model_.axis_sampler ? 1e-9 * (1.0 + std::abs(again)) : 0.0;
    if (std::abs(again - recorded) > tol)
      throw OracleFailure("black box is not pure: " + fmt(recorded) + " then " + fmt(again), p);
  }

  ObjectiveModel model_;
  OracleOptions options_;
  EvalCounter counter_;
  Rng purity_rng_;
};

}  // namespace zoprox
