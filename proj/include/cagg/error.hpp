#pragma once

#include <stdexcept>
#include <string>

namespace cagg {

/// Input outside the mathematical domain of an operation (negative x, zero mass, ...).
class domain_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Two fields that must share a grid do not.
class grid_mismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical solver failed to converge or hit a guard (CFL, positivity, box margin).
/// `residual` carries the last measured violation when one is available.
class solver_error : public std::runtime_error {
 public:
  explicit solver_error(const std::string& what, double residual = 0.0)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Malformed run configuration; `line` is 1-based, 0 when unknown.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace cagg
