#pragma once

#include <stdexcept>
#include <string>

namespace mottx {

// Malformed or inconsistent input data (files, detections, configs).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values or divergence in numeric code.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Array or matrix shapes that do not match the configured model.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace mottx
