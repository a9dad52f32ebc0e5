#pragma once

#include <stdexcept>
#include <string>

namespace gnclosed {

// Invalid or inconsistent input. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what, std::string pointer = {})
      : std::runtime_error(pointer.empty() ? what : pointer + ": " + what),
        pointer_(std::move(pointer)) {}
  const std::string& pointer() const noexcept { return pointer_; }

private:
  std::string pointer_;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// Closed-form kernel cannot be evaluated reliably; callers fall back to quadrature.
class DegenerateKernel : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Unrecoverable numerical failure. The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace gnclosed
