#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace asvp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor rank or extent mismatch.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, non-convergent iterations.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed tensor/image files.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  TrainingError(std::size_t epoch, const std::string& what)
      : Error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace asvp
