#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace wavesel {

// Exploration probability as a function of the decision index k (1-based).
//   power:       min(1, scale * k^-exponent)
//   constant:    min(1, scale)
//   exponential: min(1, scale * exp(-rate * k))
class ExplorationSchedule {
 public:
  enum class Kind { kPower, kConstant, kExponential };

  ExplorationSchedule() = default;
  static ExplorationSchedule power(double scale, double exponent = 1.0 / 3.0);
  static ExplorationSchedule constant(double value);
  static ExplorationSchedule exponential(double scale, double rate);

  // "power:1:0.3333", "constant:0.1", "exponential:1:0.001"
  static ExplorationSchedule parse(std::string_view text);
  std::string to_string() const;

  double operator()(std::uint64_t k) const;
  Kind kind() const { return kind_; }

 private:
  Kind kind_ = Kind::kPower;
  double scale_ = 1.0;
  double shape_ = 1.0 / 3.0;  // exponent or rate
};

}  // namespace wavesel
