#include "routegate/errors.hpp"

#include <fmt/format.h>

namespace routegate {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyQuestion: return "EmptyQuestion";
    case ErrorCode::NonPositiveLatency: return "NonPositiveLatency";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnknownRecord: return "UnknownRecord";
    case ErrorCode::EmptyMemory: return "EmptyMemory";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::IndexFormat: return "IndexFormat";
    case ErrorCode::TemplateMissing: return "TemplateMissing";
    case ErrorCode::PlaceholderUnfilled: return "PlaceholderUnfilled";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::IndexMissing: return "IndexMissing";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::AuthFailure: return "AuthFailure";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::UpstreamError: return "UpstreamError";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::MissingSystem: return "MissingSystem";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

bool is_upstream(ErrorCode code) {
  switch (code) {
    case ErrorCode::BackendUnavailable:
    case ErrorCode::Timeout:
    case ErrorCode::AuthFailure:
    case ErrorCode::TransportError:
    case ErrorCode::UpstreamError:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(fmt::format("{}: {}", to_string(code), message)), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace routegate
