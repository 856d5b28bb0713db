#pragma once

#include <stdexcept>
#include <string>

namespace amber {

/// Invalid configuration or shape contract, detected before compute starts.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed on-disk file (volume header/payload, checkpoint, manifest).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem failure: missing path, unwritable directory.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Semantically invalid input data (negative probabilities, out-of-range labels).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, long step)
      : std::runtime_error(what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace amber
