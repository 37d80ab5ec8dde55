#pragma once

#include <stdexcept>
#include <string>

namespace mfpca {

// Raised when an estimation step cannot produce a trustworthy result
// (ill-separated eigenvalues, singular local fits, no positive signal, ...).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised on malformed or inconsistent input data (CSV parse failures,
// out-of-range observation times, empty sources, ...).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mfpca
