#pragma once

#include <stdexcept>
#include <string>

namespace bhl {

// Invalid law/config parameters: detected before any computation starts.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Access outside a declared domain or box.
struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// A walk reached the edge of its environment box.
struct TruncationError : std::runtime_error {
  explicit TruncationError(const std::string& what) : std::runtime_error(what) {}
};

// Iterative solve exhausted its budget; carries the last residual.
struct NonconvergenceError : std::runtime_error {
  double residual;
  long iterations;
  NonconvergenceError(const std::string& what, double res, long iters)
      : std::runtime_error(what), residual(res), iterations(iters) {}
};

}  // namespace bhl
