#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace zoprox {

using Vector = std::vector<double>;

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point or value handed to the library is malformed (wrong length, non-finite).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A scalar parameter is outside its admissible range (delta <= 0, lambda <= 0, ...).
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// The black box returned a non-finite value.
class OracleFailure : public Error {
 public:
  OracleFailure(const std::string& what, Vector point)
      : Error(what), point_(std::move(point)) {}
  const Vector& point() const noexcept { return point_; }

 private:
  Vector point_;
};

/// Finite-difference arithmetic produced a non-finite estimate.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

/// A local model violates its invariants (nonpositive curvature, size mismatch).
class InvalidModel : public Error {
 public:
  using Error::Error;
};

/// The inner solver could not certify the requested model gap.
class InexactnessFailure : public Error {
 public:
  InexactnessFailure(const std::string& what, double best_gap, Vector best_point,
                     std::size_t inner_iters)
      : Error(what),
        best_gap_(best_gap),
        best_point_(std::move(best_point)),
        inner_iters_(inner_iters) {}
  double best_gap() const noexcept { return best_gap_; }
  const Vector& best_point() const noexcept { return best_point_; }
  std::size_t inner_iters() const noexcept { return inner_iters_; }

 private:
  double best_gap_;
  Vector best_point_;
  std::size_t inner_iters_;
};

/// Malformed LIBSVM text.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace zoprox
