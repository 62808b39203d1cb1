#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hsgp {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An input lies on or outside the Dirichlet boundary [-L, L].
class BoundaryError : public std::out_of_range {
 public:
  BoundaryError(std::size_t index, double value, double L)
      : std::out_of_range("input " + std::to_string(index) + " = " + std::to_string(value) +
                          " lies outside (-" + std::to_string(L) + ", " + std::to_string(L) + ")"),
        index_(index) {}

  [[nodiscard]] std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Malformed or non-finite input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Factorization or other numerical failure.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hsgp
