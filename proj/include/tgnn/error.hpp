#pragma once

#include <stdexcept>
#include <string>

namespace tgnn {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes for a primitive.
struct ShapeError : Error {
  using Error::Error;
};

// A call violated an API precondition.
struct ContractError : Error {
  using Error::Error;
};

// Malformed input data (trajectory files, coordinates).
struct DataError : Error {
  using Error::Error;
};

// Trajectory file could not be parsed; carries the line number.
struct ParseError : DataError {
  ParseError(const std::string& path, int line, const std::string& what)
      : DataError(path + ":" + std::to_string(line) + ": " + what) {}
};

// A domain or split turned out to be empty.
struct EmptyDomainError : DataError {
  using DataError::DataError;
};

// Invalid configuration value or unknown key.
struct ConfigError : Error {
  using Error::Error;
};

// A scene exceeded the attention padding capacity.
struct CapacityError : Error {
  using Error::Error;
};

// Training diverged or hit non-finite numbers.
struct TrainingError : Error {
  using Error::Error;
};

// The evaluation protocol's data requirements are not met.
struct ProtocolError : Error {
  using Error::Error;
};

// Filesystem failure.
struct IoError : Error {
  using Error::Error;
};

}  // namespace tgnn
