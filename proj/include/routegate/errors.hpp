#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace routegate {

enum class ErrorCode {
  // experience memory
  EmptyQuestion,
  NonPositiveLatency,
  DuplicateId,
  FileNotFound,
  MalformedLine,
  // retrieval
  DimensionMismatch,
  UnknownRecord,
  EmptyMemory,
  InvalidK,
  IndexFormat,
  // routing
  TemplateMissing,
  PlaceholderUnfilled,
  BackendUnavailable,
  IndexMissing,
  // solver transport
  Timeout,
  AuthFailure,
  TransportError,
  UpstreamError,
  // evaluation
  LengthMismatch,
  EmptyInput,
  OutOfRange,
  MissingSystem,
  // configuration / generic input
  ConfigInvalid,
  InvalidInput,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// True for failures caused by something outside this process (a solver,
/// the router model, the network) as opposed to bad local input.
bool is_upstream(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

  // Set for MalformedLine.
  std::optional<std::size_t> line_no;
  // Set for UpstreamError / AuthFailure.
  std::optional<int> http_status;

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace routegate
