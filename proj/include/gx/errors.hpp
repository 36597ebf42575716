#pragma once

#include <stdexcept>
#include <string>

namespace gx {

// Invalid configuration, malformed input, or API misuse. CLI exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical guard tripped: CFL violation, volatility outside the band,
// domain too narrow. CLI exit code 3.
struct GuardError : std::runtime_error {
  explicit GuardError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gx
