#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "zoprox/error.hpp"
#include "zoprox/libsvm.hpp"
#include "zoprox/oracle.hpp"
#include "zoprox/prox.hpp"
#include "zoprox/rng.hpp"
#include "zoprox/vector_ops.hpp"

namespace zoprox {

/// min 1/2 |Ax - b|^2 + mu |x|_1 with A stored row-major (m x n).
struct LassoInstance {
  std::size_t m = 0;
  std::size_t n = 0;
  Vector a;
  Vector b;
  double mu = 0.0;
  Vector ground_u;

  double at(std::size_t row, std::size_t col) const { return a[row * n + col]; }
};

/// A, u and l i.i.d. standard normal from Rng(seed), drawn in that order
/// (A row by row); b = A u + noise_scale * l.
inline LassoInstance gen_lasso(std::size_t n, std::size_t m, double mu, std::uint64_t seed,
                               double noise_scale = std::sqrt(0.001)) {
  if (n < 1 || m < 1) throw InvalidParameter("gen_lasso requires n, m >= 1");
  if (!(mu >= 0.0)) throw InvalidParameter("gen_lasso requires mu >= 0");
  Rng rng(seed);
  LassoInstance inst;
  inst.m = m;
  inst.n = n;
  inst.mu = mu;
  inst.a = rng.normal_vector(m * n);
  inst.ground_u = rng.normal_vector(n);
  const Vector noise = rng.normal_vector(m);
  inst.b.resize(m);
  for (std::size_t r = 0; r < m; ++r) {
    const std::span<const double> row(inst.a.data() + r * n, n);
    inst.b[r] = dot(row, inst.ground_u) + noise_scale * noise[r];
  }
  return inst;
}

namespace detail {

inline Vector lasso_residual(const LassoInstance& inst, std::span<const double> x) {
  Vector res(inst.m);
  for (std::size_t r = 0; r < inst.m; ++r) {
    const std::span<const double> row(inst.a.data() + r * inst.n, inst.n);
    res[r] = dot(row, x) - inst.b[r];
  }
  return res;
}

/// A^T v
inline Vector lasso_transpose_times(const LassoInstance& inst, std::span<const double> v) {
  Vector out(inst.n, 0.0);
  for (std::size_t r = 0; r < inst.m; ++r) {
    const double* row = inst.a.data() + r * inst.n;
    for (std::size_t c = 0; c < inst.n; ++c) out[c] += row[c] * v[r];
  }
  return out;
}

}  // namespace detail

/// 1/2 |Ax - b|^2
inline double lasso_smooth_value(const LassoInstance& inst, std::span<const double> x) {
  const Vector res = detail::lasso_residual(inst, x);
  return 0.5 * dot(res, res);
}

/// Exact gradient A^T (Ax - b); diagnostics and tests only.
inline Vector lasso_gradient(const LassoInstance& inst, std::span<const double> x) {
  return detail::lasso_transpose_times(inst, detail::lasso_residual(inst, x));
}

/// Exact Hessian diagonal |A_i|^2.
inline Vector lasso_hess_diag(const LassoInstance& inst) {
  Vector d(inst.n, 0.0);
  for (std::size_t r = 0; r < inst.m; ++r)
    for (std::size_t c = 0; c < inst.n; ++c) d[c] += inst.at(r, c) * inst.at(r, c);
  return d;
}

/// Largest eigenvalue of A^T A (gradient Lipschitz constant) by power
/// iteration on the smaller Gram matrix.
inline double lasso_lipschitz(const LassoInstance& inst, std::size_t max_iter = 100000,
                              double rtol = 1e-13) {
  Vector v(inst.n, 1.0 / std::sqrt(static_cast<double>(inst.n)));
  double lambda = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    Vector av(inst.m, 0.0);
    for (std::size_t r = 0; r < inst.m; ++r)
      av[r] = dot(std::span<const double>(inst.a.data() + r * inst.n, inst.n), v);
    Vector w = detail::lasso_transpose_times(inst, av);
    const double next = norm2(w);
    if (next == 0.0) return 0.0;
    for (auto& e : w) e /= next;
    v = std::move(w);
    if (std::abs(next - lambda) <= rtol * next) return next;
    lambda = next;
  }
  return lambda;
}

/// Black box f(x) = 1/2 |Ax - b|^2 with r = mu |x|_1. The axis sampler
/// reuses the residual: f(x +- d e_i) = f(x) +- d <r, A_i> + d^2 |A_i|^2 / 2.
inline ObjectiveModel lasso_blackbox(const LassoInstance& inst) {
  auto data = std::make_shared<const LassoInstance>(inst);
  auto col_norms = std::make_shared<const Vector>(lasso_hess_diag(inst));
  ObjectiveModel model;
  model.dimension = inst.n;
  model.blackbox = [data](std::span<const double> x) { return lasso_smooth_value(*data, x); };
  model.axis_sampler = [data, col_norms](std::span<const double> x, double delta,
                                         std::span<double> plus, std::span<double> minus) {
    const Vector res = detail::lasso_residual(*data, x);
    const double f0 = 0.5 * dot(res, res);
    const Vector g = detail::lasso_transpose_times(*data, res);
    for (std::size_t i = 0; i < data->n; ++i) {
      const double curv = 0.5 * delta * delta * (*col_norms)[i];
      plus[i] = f0 + delta * g[i] + curv;
      minus[i] = f0 - delta * g[i] + curv;
    }
    return f0;
  };
  model.regularizer = Regularizer::l1(inst.mu);
  model.concurrency_safe = true;
  return model;
}

struct ClassificationInstance {
  SparseDataset dataset;
  double lambda = 1e-3;
  double mu = 1e-3;

  void validate() const {
    if (!(lambda >= 0.0) || !(mu >= 0.0))
      throw InvalidParameter("classification weights must be >= 0");
    if (dataset.n_samples() == 0) throw InvalidInput("classification dataset has no samples");
    if (dataset.n_features == 0) throw InvalidInput("classification dataset has no features");
  }
};

/// 1 / (1 + exp(z)) without overflow.
inline double sigmoid_loss(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

namespace detail {

struct SigmoidData {
  std::size_t m = 0;
  std::size_t n = 0;
  std::vector<SparseRow> rows;
  // Column view: for feature i, the samples j with a_ji != 0 and l_j * a_ji.
  std::vector<std::vector<std::pair<std::uint32_t, double>>> columns;

  Vector margins(std::span<const double> x) const {
    Vector z(m);
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (const auto& e : rows[j].features) s += e.value * x[e.index - 1];
      z[j] = rows[j].label * s;
    }
    return z;
  }
};

}  // namespace detail

/// Mean sigmoid loss (1/m) sum_j 1 / (1 + exp(l_j <a_j, x>)) as the black box,
/// r = mu |x|_1. With fold_l2 the black box also returns lambda |x|^2;
/// otherwise that term is a KnownSmooth handled analytically.
inline ObjectiveModel sigmoid_objective(const ClassificationInstance& inst, bool fold_l2) {
  inst.validate();
  auto data = std::make_shared<detail::SigmoidData>();
  data->m = inst.dataset.n_samples();
  data->n = inst.dataset.n_features;
  data->rows = inst.dataset.rows;
  data->columns.resize(data->n);
  for (std::size_t j = 0; j < data->m; ++j)
    for (const auto& e : data->rows[j].features) {
      if (e.index > data->n) throw InvalidInput("feature index exceeds n_features");
      data->columns[e.index - 1].emplace_back(static_cast<std::uint32_t>(j),
                                              data->rows[j].label * e.value);
    }
  std::shared_ptr<const detail::SigmoidData> shared = data;
  const double lambda = inst.lambda;
  const double inv_m = 1.0 / static_cast<double>(data->m);

  ObjectiveModel model;
  model.dimension = data->n;
  model.blackbox = [shared, lambda, fold_l2, inv_m](std::span<const double> x) {
    const Vector z = shared->margins(x);
    double s = 0.0;
    for (double zj : z) s += sigmoid_loss(zj);
    double v = s * inv_m;
    if (fold_l2) v += lambda * dot(x, x);
    return v;
  };
  model.axis_sampler = [shared, lambda, fold_l2, inv_m](std::span<const double> x, double delta,
                                                        std::span<double> plus,
                                                        std::span<double> minus) {
    const Vector z = shared->margins(x);
    Vector loss(z.size());
    double base = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      loss[j] = sigmoid_loss(z[j]);
      base += loss[j];
    }
    const double xx = fold_l2 ? dot(x, x) : 0.0;
    for (std::size_t i = 0; i < shared->n; ++i) {
      double dp = 0.0, dm = 0.0;
      for (const auto& [j, la] : shared->columns[i]) {
        dp += sigmoid_loss(z[j] + delta * la) - loss[j];
        dm += sigmoid_loss(z[j] - delta * la) - loss[j];
      }
      plus[i] = (base + dp) * inv_m;
      minus[i] = (base + dm) * inv_m;
      if (fold_l2) {
        plus[i] += lambda * (xx + 2.0 * delta * x[i] + delta * delta);
        minus[i] += lambda * (xx - 2.0 * delta * x[i] + delta * delta);
      }
    }
    return base * inv_m + lambda * xx;
  };
  if (!fold_l2) model.known_smooth = KnownSmooth::squared_l2(lambda);
  model.regularizer = Regularizer::l1(inst.mu);
  model.concurrency_safe = true;
  return model;
}

}  // namespace zoprox
