#pragma once

#include <stdexcept>
#include <string>

namespace copestop {

/// A numeric routine failed to reach its configured tolerance.
class NumericFailure : public std::runtime_error {
 public:
  NumericFailure(const std::string& what, double achieved)
      : std::runtime_error(what + " (achieved tolerance " + std::to_string(achieved) + ")"),
        achieved_tolerance_(achieved) {}

  double achieved_tolerance() const { return achieved_tolerance_; }

 private:
  double achieved_tolerance_;
};

/// The closed-form threshold is only defined for the linear gain family.
class UnsupportedGain : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Topology construction or lookup failure (disconnected graph, unknown neighbor, ...).
class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration parsing/validation failure; carries the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& reason)
      : std::runtime_error(key + ": " + reason), key_(std::move(key)) {}

  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

}  // namespace copestop
