#pragma once

#include <stdexcept>
#include <string>

namespace dsubcox {

/// Malformed input: CSV rows, summary payloads, config files, schema mismatches.
class data_error : public std::runtime_error {
 public:
  explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure: exp overflow, singular information, non-convergence.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dsubcox
