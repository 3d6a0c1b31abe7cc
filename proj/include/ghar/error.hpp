#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ghar {

// Mirrors ghar_status in ghar.h; keep the numeric values in sync.
enum class ErrorCode : int {
  kOk = 0,
  kInvalidArgument = 1,
  kParse = 2,
  kConsistency = 3,
  kUnknownMetaPath = 4,
  kConfig = 5,
  kRetrieval = 6,
  kProvider = 7,
  kNumeric = 8,
  kShape = 9,
  kIo = 10,
  kNotFound = 11,
  kNotLabelable = 12,
  kInternal = 13,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, bool retryable = false)
      : std::runtime_error(message), code_(code), retryable_(retryable) {}

  ErrorCode code() const noexcept { return code_; }
  bool retryable() const noexcept { return retryable_; }

 private:
  ErrorCode code_;
  bool retryable_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line = 0)
      : Error(ErrorCode::kParse, message), line_(line) {}
  // 1-based source line, 0 when not line-oriented.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Minimal warning sink. Defaults to stderr; tests swap in a collector.
using WarningSink = void (*)(std::string_view message);
void set_warning_sink(WarningSink sink) noexcept;
void warn(std::string_view message);

}  // namespace ghar
