#pragma once

#include <stdexcept>
#include <string>

namespace termref {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input: unknown model name, bad JSON document, invalid
/// certificate, unparseable rational, ...
struct InputError : Error {
  using Error::Error;
};

/// A configured resource cap (state count, rand bound, ...) was exceeded.
struct ResourceError : Error {
  using Error::Error;
};

/// An internal re-check failed.  Raised by operations that re-validate a
/// claim which is guaranteed by construction; seeing this exception means
/// the checker itself has a bug.
struct InconsistencyError : Error {
  using Error::Error;
};

struct ParseError : Error {
  int line;
  int col;
  ParseError(const std::string& msg, int line_, int col_)
      : Error(msg + " (line " + std::to_string(line_) + ", column " +
              std::to_string(col_) + ")"),
        line(line_),
        col(col_) {}
};

}  // namespace termref
