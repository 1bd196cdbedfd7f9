#include "wavesel/exploration.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "wavesel/errors.hpp"

namespace wavesel {

ExplorationSchedule ExplorationSchedule::power(double scale, double exponent) {
  if (!(scale >= 0) || !(exponent >= 0)) throw ConfigError("power schedule needs scale, exponent >= 0");
  ExplorationSchedule s;
  s.kind_ = Kind::kPower;
  s.scale_ = scale;
  s.shape_ = exponent;
  return s;
}

ExplorationSchedule ExplorationSchedule::constant(double value) {
  if (!(value >= 0)) throw ConfigError("constant exploration rate must be >= 0");
  ExplorationSchedule s;
  s.kind_ = Kind::kConstant;
  s.scale_ = value;
  s.shape_ = 0;
  return s;
}

ExplorationSchedule ExplorationSchedule::exponential(double scale, double rate) {
  if (!(scale >= 0) || !(rate >= 0)) throw ConfigError("exponential schedule needs scale, rate >= 0");
  ExplorationSchedule s;
  s.kind_ = Kind::kExponential;
  s.scale_ = scale;
  s.shape_ = rate;
  return s;
}

ExplorationSchedule ExplorationSchedule::parse(std::string_view text) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  parts.push_back(cur);
  auto num = [&](std::size_t i, double fallback) {
    if (i >= parts.size() || parts[i].empty()) return fallback;
    try {
      std::size_t used = 0;
      double v = std::stod(parts[i], &used);
      if (used != parts[i].size()) throw ConfigError("");
      return v;
    } catch (...) {
      throw ConfigError("bad number in exploration schedule: " + std::string(text));
    }
  };
  const auto& kind = parts[0];
  if (kind == "power") return power(num(1, 1.0), num(2, 1.0 / 3.0));
  if (kind == "constant") return constant(num(1, 0.1));
  if (kind == "exponential" || kind == "exp") return exponential(num(1, 1.0), num(2, 1e-3));
  throw ConfigError("unknown exploration schedule: " + std::string(text));
}

std::string ExplorationSchedule::to_string() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::kPower: os << "power:" << scale_ << ':' << shape_; break;
    case Kind::kConstant: os << "constant:" << scale_; break;
    case Kind::kExponential: os << "exponential:" << scale_ << ':' << shape_; break;
  }
  return os.str();
}

double ExplorationSchedule::operator()(std::uint64_t k) const {
  const double kk = static_cast<double>(std::max<std::uint64_t>(k, 1));
  double a = 0;
  switch (kind_) {
    case Kind::kPower: a = scale_ * std::pow(kk, -shape_); break;
    case Kind::kConstant: a = scale_; break;
    case Kind::kExponential: a = scale_ * std::exp(-shape_ * kk); break;
  }
  return std::min(1.0, a);
}

}  // namespace wavesel
