#pragma once

#include <stdexcept>
#include <string>

namespace radau_ep {

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Quadratic interpolation requested without an E_{n-1} sample.
class ModeUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Local Newton on the stage system did not converge.
class StepFailure : public std::runtime_error {
 public:
  StepFailure(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Singular linear system while forming the consistent tangent.
class TangentFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ElementInversion : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Global equilibrium iteration hit the iteration cap.
class NonConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace radau_ep
