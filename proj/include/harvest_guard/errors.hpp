#pragma once

#include <stdexcept>
#include <string>

namespace harvest_guard {

/// Bad input: out-of-range values, shape mismatches, malformed files.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Filesystem failures; the message always carries the offending path.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// A (stage, event) pair outside the transition table.
class ProtocolError : public std::logic_error {
 public:
  explicit ProtocolError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace harvest_guard
