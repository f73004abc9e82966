#pragma once

#include <stdexcept>
#include <string>

namespace tdd {

/// Bad input data: malformed files, unknown ids, out-of-range labels.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments or configuration supplied by the caller.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace tdd
