#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace splitbox {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (length mismatch, index range).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A match projection is lighter than the configured minimum weight.
class WeakMatchError : public Error {
 public:
  WeakMatchError(std::size_t match_index, std::size_t weight, std::size_t minimum)
      : Error("match " + std::to_string(match_index) + " has projection weight " +
              std::to_string(weight) + " < minimum " + std::to_string(minimum)),
        match_index_(match_index),
        weight_(weight) {}

  std::size_t match_index() const noexcept { return match_index_; }
  std::size_t weight() const noexcept { return weight_; }

 private:
  std::size_t match_index_;
  std::size_t weight_;
};

class InvalidTreeError : public Error {
 public:
  using Error::Error;
};

// Missing shares or inconsistent counter indices at merge time.
class ReassemblyError : public Error {
 public:
  using Error::Error;
};

// Text input (tree format, rule DSL, stats) could not be parsed.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

enum class DecodeErrorCode {
  truncated,
  bad_magic,
  bad_version,
  bad_kind,
  length_mismatch,
  trailing_bytes,
  bad_field,
};

inline const char* to_string(DecodeErrorCode code) {
  switch (code) {
    case DecodeErrorCode::truncated: return "truncated";
    case DecodeErrorCode::bad_magic: return "bad magic";
    case DecodeErrorCode::bad_version: return "bad version";
    case DecodeErrorCode::bad_kind: return "bad kind";
    case DecodeErrorCode::length_mismatch: return "length mismatch";
    case DecodeErrorCode::trailing_bytes: return "trailing bytes";
    case DecodeErrorCode::bad_field: return "bad field";
  }
  return "unknown";
}

class DecodeError : public Error {
 public:
  DecodeError(DecodeErrorCode code, const std::string& detail)
      : Error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  DecodeErrorCode code() const noexcept { return code_; }

 private:
  DecodeErrorCode code_;
};

class EncodeError : public Error {
 public:
  using Error::Error;
};

}  // namespace splitbox
