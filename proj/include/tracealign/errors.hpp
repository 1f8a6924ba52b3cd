#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tracealign {

// Bad or inconsistent input data (traces, sessions, node ids, partitions).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A trace line that could not be admitted. `line` is 1-based.
class IngestError : public DataError {
 public:
  IngestError(std::size_t line, const std::string& msg)
      : DataError("line " + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Optimistic-concurrency rejection; carries the revision the caller should rebase on.
class ConflictError : public std::runtime_error {
 public:
  ConflictError(long current, const std::string& msg)
      : std::runtime_error(msg), current_(current) {}
  long current_revision() const noexcept { return current_; }

 private:
  long current_;
};

}  // namespace tracealign
