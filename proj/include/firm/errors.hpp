#ifndef FIRM_ERRORS_HPP_
#define FIRM_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace firm {

/// Invalid user-supplied configuration (bad dimensions, out-of-range
/// hyperparameters, malformed config files). Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical procedure could not produce a trustworthy answer
/// (non-mixing chain, singular TD system, NaN input).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace firm

#endif  // FIRM_ERRORS_HPP_
