#pragma once

#include <stdexcept>
#include <string>

namespace knlab {

/// Malformed input text (constants file, config, grid file) with a 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string origin, int line, const std::string& what)
      : std::runtime_error(origin + ":" + std::to_string(line) + ": " + what),
        origin_(std::move(origin)),
        line_(line) {}

  const std::string& origin() const { return origin_; }
  int line() const { return line_; }

 private:
  std::string origin_;
  int line_;
};

/// Quadrature that did not reach its tolerance within the refinement budget.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double best_estimate, double achieved_error)
      : std::runtime_error(what), best_estimate_(best_estimate), achieved_error_(achieved_error) {}

  double best_estimate() const { return best_estimate_; }
  double achieved_error() const { return achieved_error_; }

 private:
  double best_estimate_;
  double achieved_error_;
};

/// The metric determinant vanished (or the weak-field guard tripped) on a stencil.
class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace knlab
