#pragma once

#include <stdexcept>
#include <string>

namespace wavesel {

// Bad user input: malformed config, out-of-range parameter, unknown key.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A value violates a documented precondition (wrong alphabet size, bad grid, ...).
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SizeError : std::length_error {
  using std::length_error::length_error;
};

struct SingularityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnsupportedOperation : std::logic_error {
  using std::logic_error::logic_error;
};

// Interface misuse, e.g. observe() without a matching select().
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace wavesel
