#pragma once

#include <stdexcept>
#include <string>

namespace botuq {

// Bad inputs: malformed files, shape mismatches, out-of-range options.
// The command line tool maps this category to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Numeric breakdown: non-finite losses or gradients, failed sanity bounds.
// The command line tool maps this category to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace botuq
