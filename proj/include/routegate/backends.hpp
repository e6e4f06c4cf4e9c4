#pragma once

#include <optional>
#include <string>

namespace routegate {

/// Single-turn text completion (router model or direct-LLM solver).
/// Implementations throw routegate::Error with Timeout, AuthFailure,
/// TransportError or UpstreamError.
class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

struct AgentReply {
  std::string answer;
  std::optional<int> steps;
};

/// Opaque multi-step agent reached through the {"question"} -> {"answer"} contract.
class AgentBackend {
 public:
  virtual ~AgentBackend() = default;
  virtual AgentReply ask(const std::string& question) = 0;
};

}  // namespace routegate
