#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mhdl {

// Base of every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flow map too degenerate to invert (J below floor, or a-priori band left with
// enforcement on).
class SingularMap : public Error {
 public:
  SingularMap(const std::string& what, double j_min_found)
      : Error(what), j_min_found_(j_min_found) {}
  double j_min_found() const noexcept { return j_min_found_; }

 private:
  double j_min_found_;
};

class NoConvergence : public Error {
 public:
  NoConvergence(std::size_t max_iter, double residual)
      : Error("iterative solver did not converge in " + std::to_string(max_iter) +
              " iterations (relative residual " + std::to_string(residual) + ")"),
        max_iter_(max_iter),
        residual_(residual) {}
  std::size_t max_iter() const noexcept { return max_iter_; }
  double residual() const noexcept { return residual_; }

 private:
  std::size_t max_iter_;
  double residual_;
};

class TaylorViolation : public Error {
 public:
  TaylorViolation(double t, double taylor_min, double floor)
      : Error("Taylor sign condition violated at t=" + std::to_string(t) +
              ": min(-grad q . N)=" + std::to_string(taylor_min) +
              " < " + std::to_string(floor)),
        t_(t),
        taylor_min_(taylor_min),
        floor_(floor) {}
  double t() const noexcept { return t_; }
  double taylor_min() const noexcept { return taylor_min_; }
  double floor() const noexcept { return floor_; }

 private:
  double t_, taylor_min_, floor_;
};

class StabilityViolation : public Error {
 public:
  using Error::Error;
};

class NoContraction : public Error {
 public:
  NoContraction(const std::string& what, std::size_t iteration)
      : Error(what), iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line, int column)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_, column_;
};

}  // namespace mhdl
