#pragma once

#include <stdexcept>
#include <string>

namespace dialnoise {

// Input that breaks a contract: bad flags, schema violations, unmet
// preconditions. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

// Filesystem or network failure. The CLI maps these to exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dialnoise
