#ifndef MSCHEME_ERRORS_HPP
#define MSCHEME_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mscheme {

// Bad user input: config files, CLI arguments, scheme wiring.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A computation failed (integration did not reach tolerance,
// eigensolver did not converge, NaN residuals, ...).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mscheme

#endif
