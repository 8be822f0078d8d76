#pragma once

#include <stdexcept>
#include <string>

namespace hashtag {

/// Raised for bad input data: missing files, schema mismatches, unparseable
/// records. Argument/contract violations use std::invalid_argument instead.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a numeric routine produces NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hashtag
