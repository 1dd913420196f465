#ifndef CONVRANK_ERRORS_HPP
#define CONVRANK_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace convrank {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input data (bad transcript line, degenerate corpus, ...).
struct DataError : Error {
  using Error::Error;
};

/// Parse failure in a line-oriented file; carries the 1-based line number.
struct ParseError : DataError {
  ParseError(const std::string& msg, std::size_t line_no)
      : DataError(msg + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
  std::size_t line;
};

/// Invalid configuration or argument combination.
struct ConfigError : Error {
  using Error::Error;
};

/// Checkpoint file problems; subclasses distinguish the failure modes.
struct CheckpointError : Error {
  using Error::Error;
};
struct BadMagicError : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct BadVersionError : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct TruncatedError : CheckpointError {
  using CheckpointError::CheckpointError;
};

}  // namespace convrank

#endif  // CONVRANK_ERRORS_HPP
