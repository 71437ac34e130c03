#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace dtdml {

// Raised for invalid or inconsistent configuration. Carries the offending
// key so the CLI can name it and exit with the dedicated status code.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error("config error (" + key + "): " + message),
        key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// Raised when an iterative solver produces a non-finite iterate or objective.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int iteration, const std::string& message)
      : std::runtime_error(message), iteration_(iteration) {}

  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

}  // namespace dtdml
