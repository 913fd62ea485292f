#pragma once

#include <stdexcept>
#include <string>

namespace msrd {

// Error taxonomy. The C API maps each class onto a status code, the CLI
// onto an exit code.

/// Bad shapes, unknown keys, invalid option values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite losses, gradients or parameters during training.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Files that exist but cannot be decoded (bad magic, version, truncation).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Open/read/write failures.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace msrd
