#pragma once

#include <stdexcept>
#include <string>

namespace lcnr {

// Error taxonomy shared by the library and the CLI. The CLI maps these to
// process exit codes (io=2, config=3, training=4, everything else=5).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// Malformed content in a data file; carries the 1-based line when known.
struct ParseError : Error {
  ParseError(const std::string& what, long line = -1)
      : Error(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what), line_number(line) {}
  long line_number;
};

struct ValidationError : Error {
  using Error::Error;
};

struct DomainError : Error {
  using Error::Error;
};

struct ShapeError : Error {
  using Error::Error;
};

struct GroundingError : Error {
  using Error::Error;
};

// API misuse (non-scalar loss, empty aggregate, ...), not a data problem.
struct ContractError : Error {
  using Error::Error;
};

struct TrainingError : Error {
  TrainingError(const std::string& what, int epoch) : Error(what + " (epoch " + std::to_string(epoch) + ")"), epoch(epoch) {}
  int epoch;
};

}  // namespace lcnr
