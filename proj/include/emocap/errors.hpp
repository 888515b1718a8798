#pragma once

#include <stdexcept>
#include <string>

namespace emocap {

// File could not be read or did not match its declared format.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input violated a domain invariant (bad dataset row, OOV token, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace emocap
