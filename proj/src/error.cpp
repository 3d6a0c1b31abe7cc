#include "ghar/error.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace ghar {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kOk: return "ok";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kConsistency: return "consistency_error";
    case ErrorCode::kUnknownMetaPath: return "unknown_meta_path";
    case ErrorCode::kConfig: return "config_error";
    case ErrorCode::kRetrieval: return "retrieval_error";
    case ErrorCode::kProvider: return "provider_error";
    case ErrorCode::kNumeric: return "numeric_error";
    case ErrorCode::kShape: return "shape_error";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kNotLabelable: return "not_labelable";
    case ErrorCode::kInternal: return "internal_error";
  }
  return "internal_error";
}

namespace {

std::mutex g_stderr_mutex;

void stderr_sink(std::string_view message) {
  std::lock_guard lock(g_stderr_mutex);
  std::cerr << "[ghar] warning: " << message << '\n';
}

std::atomic<WarningSink> g_sink{&stderr_sink};

}  // namespace

void set_warning_sink(WarningSink sink) noexcept {
  g_sink.store(sink ? sink : &stderr_sink);
}

void warn(std::string_view message) { g_sink.load()(message); }

}  // namespace ghar
