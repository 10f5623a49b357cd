#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sybilwall {

// Input violates an operation's preconditions.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Training diverged (non-finite loss or parameters).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed binary input; carries the byte offset where parsing stopped.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// A score is not defined for the given inputs (e.g. empty attack segment).
class UndefinedScore : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Graph construction could not satisfy its constraints.
class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A received message failed verification or ordering checks.
class MessageRejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration problem tied to a field path such as "attack.phi".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace sybilwall
