#pragma once

#include <stdexcept>
#include <string>

namespace bagged_rl {

// Invalid or inconsistent configuration (bad JSON, missing coefficients, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Vector or tensor of the wrong length/shape.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite inputs to a numerical routine.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Zero-variance denominator, fewer than two replications, etc.
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation called out of protocol order (e.g. planning during warm-up).
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IncompleteHistoryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// The induced kernel of a compiled state depends on history the state drops.
class NonMarkovError : public std::runtime_error {
 public:
  NonMarkovError(const std::string& what, int step, int state, int action)
      : std::runtime_error(what), step_(step), state_(state), action_(action) {}
  int step() const { return step_; }
  int state() const { return state_; }
  int action() const { return action_; }

 private:
  int step_, state_, action_;
};

}  // namespace bagged_rl
