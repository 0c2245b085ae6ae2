#pragma once

#include <stdexcept>
#include <string>

namespace offtrack {

// Every failure raised by the core carries a stable machine-readable code
// ("empty_track", "degenerate_innovation", ...) next to the human message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

// Malformed input files. The message names the file and line or byte offset.
class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& message) : Error("schema_error", message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io_error", message) {}
};

}  // namespace offtrack
