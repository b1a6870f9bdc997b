#pragma once

#include <stdexcept>
#include <string>

namespace eai {

// Bad inputs or violated invariants; the CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem and serialization failures; the CLI maps these to exit code 2.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace eai
