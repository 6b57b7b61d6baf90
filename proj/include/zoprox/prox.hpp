#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "zoprox/error.hpp"
#include "zoprox/rng.hpp"
#include "zoprox/vector_ops.hpp"

namespace zoprox {

/// sign(x) * max(|x| - threshold, 0), with sign(0) = 0.
inline double soft_threshold(double x, double threshold) {
  if (x > threshold) return x - threshold;
  if (x < -threshold) return x + threshold;
  return 0.0;
}

/// One coordinate r_i of a separable regularizer.
class ScalarPiece {
 public:
  enum class Kind { zero, abs, box };

  static ScalarPiece zero() { return ScalarPiece(Kind::zero, 0.0, 0.0, 0.0); }

  /// weight * |t|
  static ScalarPiece abs(double weight) {
    if (!(weight >= 0.0) || !std::isfinite(weight))
      throw InvalidParameter("abs piece weight must be finite and >= 0");
    return ScalarPiece(Kind::abs, weight, 0.0, 0.0);
  }

  /// Indicator of [lo, hi].
  static ScalarPiece box(double lo, double hi) {
    if (!(lo <= hi)) throw InvalidParameter("box piece requires lo <= hi");
    return ScalarPiece(Kind::box, 0.0, lo, hi);
  }

  Kind kind() const noexcept { return kind_; }
  double weight() const noexcept { return weight_; }
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }

  double value(double t) const {
    switch (kind_) {
      case Kind::zero:
        return 0.0;
      case Kind::abs:
        return weight_ * std::abs(t);
      case Kind::box:
        return (t >= lo_ && t <= hi_) ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return 0.0;
  }

  /// Unchecked scalar prox; lambda > 0 is the caller's responsibility.
  double prox_unchecked(double t, double lambda) const {
    switch (kind_) {
      case Kind::zero:
        return t;
      case Kind::abs:
        return soft_threshold(t, lambda * weight_);
      case Kind::box:
        return std::min(std::max(t, lo_), hi_);
    }
    return t;
  }

  friend bool operator==(const ScalarPiece&, const ScalarPiece&) = default;

 private:
  ScalarPiece(Kind kind, double weight, double lo, double hi)
      : kind_(kind), weight_(weight), lo_(lo), hi_(hi) {}

  Kind kind_;
  double weight_;
  double lo_;
  double hi_;
};

inline double prox_scalar(const ScalarPiece& piece, double x, double lambda) {
  if (!(lambda > 0.0)) throw InvalidParameter("prox requires lambda > 0");
  return piece.prox_unchecked(x, lambda);
}

/// Convex, proper, lower-semicontinuous regularizer r with a cheap prox.
///
/// Built-ins are zero, l1(mu) and a per-coordinate list of ScalarPiece.
/// A custom regularizer supplies its own value and prox; it is treated as
/// non-separable.
class Regularizer {
 public:
  enum class Kind { zero, l1, separable, custom };

  using ValueFn = std::function<double(std::span<const double>)>;
  /// prox(x, lambda) -> argmin_y r(y) + |y - x|^2 / (2 lambda)
  using ProxFn = std::function<Vector(std::span<const double>, double)>;

  Regularizer() = default;

  static Regularizer zero() { return Regularizer(); }

  static Regularizer l1(double mu) {
    Regularizer r;
    r.kind_ = Kind::l1;
    r.mu_ = mu;
    if (!(mu >= 0.0) || !std::isfinite(mu))
      throw InvalidParameter("l1 weight mu must be finite and >= 0");
    return r;
  }

  static Regularizer separable(std::vector<ScalarPiece> pieces) {
    Regularizer r;
    r.kind_ = Kind::separable;
    r.pieces_ = std::make_shared<const std::vector<ScalarPiece>>(std::move(pieces));
    return r;
  }

  static Regularizer custom(ValueFn value, ProxFn prox, std::string name = "custom") {
    if (!value || !prox) throw InvalidParameter("custom regularizer needs value and prox");
    Regularizer r;
    r.kind_ = Kind::custom;
    r.value_ = std::move(value);
    r.prox_ = std::move(prox);
    r.name_ = std::move(name);
    return r;
  }

  Kind kind() const noexcept { return kind_; }
  bool is_separable() const noexcept { return kind_ != Kind::custom; }
  double mu() const noexcept { return mu_; }
  const std::string& name() const noexcept { return name_; }

  /// Coordinate i's piece. Only defined for separable kinds.
  ScalarPiece piece(std::size_t i) const {
    switch (kind_) {
      case Kind::zero:
        return ScalarPiece::zero();
      case Kind::l1:
        return ScalarPiece::abs(mu_);
      case Kind::separable:
        if (i >= pieces_->size())
          throw InvalidInput("coordinate " + std::to_string(i) +
                             " has no regularizer piece");
        return (*pieces_)[i];
      case Kind::custom:
        break;
    }
    throw InvalidModel("custom regularizer has no scalar pieces");
  }

  double value(std::span<const double> x) const {
    switch (kind_) {
      case Kind::zero:
        return 0.0;
      case Kind::l1: {
        double s = 0.0;
        for (double v : x) s += std::abs(v);
        return mu_ * s;
      }
      case Kind::separable: {
        check_pieces(x.size());
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += (*pieces_)[i].value(x[i]);
        return s;
      }
      case Kind::custom:
        return value_(x);
    }
    return 0.0;
  }

  friend Vector prox(const Regularizer& reg, std::span<const double> x, double lambda);

 private:
  void check_pieces(std::size_t n) const {
    if (pieces_->size() != n)
      throw InvalidInput("separable regularizer has " + std::to_string(pieces_->size()) +
                         " pieces but the point has " + std::to_string(n) + " coordinates");
  }

  Kind kind_ = Kind::zero;
  double mu_ = 0.0;
  std::shared_ptr<const std::vector<ScalarPiece>> pieces_;
  ValueFn value_;
  ProxFn prox_;
  std::string name_ = "builtin";
};

/// prox_{lambda r}(x). For separable kinds this is exactly the
/// coordinate-wise prox_scalar.
inline Vector prox(const Regularizer& reg, std::span<const double> x, double lambda) {
  if (!(lambda > 0.0)) throw InvalidParameter("prox requires lambda > 0");
  switch (reg.kind_) {
    case Regularizer::Kind::zero:
      return Vector(x.begin(), x.end());
    case Regularizer::Kind::l1: {
      Vector y(x.size());
      const double t = lambda * reg.mu_;
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = soft_threshold(x[i], t);
      return y;
    }
    case Regularizer::Kind::separable: {
      reg.check_pieces(x.size());
      Vector y(x.size());
      for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = (*reg.pieces_)[i].prox_unchecked(x[i], lambda);
      return y;
    }
    case Regularizer::Kind::custom: {
      Vector y = reg.prox_(x, lambda);
      if (y.size() != x.size())
        throw InvalidModel("custom prox returned a point of the wrong dimension");
      return y;
    }
  }
  return Vector(x.begin(), x.end());
}

/// Probabilistic firm-nonexpansiveness check for a (typically custom) prox:
/// |p(u) - p(v)|^2 <= <p(u) - p(v), u - v> on random pairs. Throws
/// InvalidModel on the first violation.
inline void validate_prox(const Regularizer& reg, std::size_t n, std::uint64_t seed,
                          std::size_t trials = 32, double tol = 1e-10) {
  Rng rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    const Vector u = rng.normal_vector(n);
    const Vector v = rng.normal_vector(n);
    const double lambda = std::exp(rng.uniform(-3.0, 3.0));
    const Vector pu = prox(reg, u, lambda);
    const Vector pv = prox(reg, v, lambda);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dp = pu[i] - pv[i];
      lhs += dp * dp;
      rhs += dp * (u[i] - v[i]);
    }
    if (lhs > rhs + tol * (1.0 + std::abs(rhs)))
      throw InvalidModel("prox of regularizer '" + reg.name() +
                         "' is not firmly nonexpansive");
  }
}

}  // namespace zoprox
