#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace terraga {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A simulated or predicted state left the finite reals.
class NonFiniteError : public Error {
 public:
  explicit NonFiniteError(const std::string& what, std::size_t row = kNoRow)
      : Error(what), row_(row) {}

  static constexpr std::size_t kNoRow = static_cast<std::size_t>(-1);
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

class NonMonotoneTimeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class EmptyWindowError : public Error {
 public:
  using Error::Error;
};

}  // namespace terraga
