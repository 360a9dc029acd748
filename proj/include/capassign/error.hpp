#pragma once

#include <stdexcept>
#include <string>

namespace capassign {

/// Malformed or inconsistent input (bad schema, infeasible marginals, invalid
/// parameters). The CLI maps it to exit code 2.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not deliver a trustworthy answer (non-PD
/// information, failed factorization). The CLI maps it to exit code 1.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace capassign
