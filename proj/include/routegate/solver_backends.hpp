#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <functional>
#include <memory>
#include <semaphore>
#include <string>
#include <string_view>

#include "routegate/backends.hpp"
#include "routegate/routing_engine.hpp"
#include "routegate/types.hpp"

namespace routegate {

/// OpenAI-compatible chat endpoint. The credential is the *name* of an
/// environment variable, read on every call and never stored.
struct ChatBackendConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8000/v1
  std::string model;
  std::string api_key_env;
  std::string system_prompt = "You are a helpful assistant.";
  double temperature = 0.0;
  double timeout_s = 60.0;
  std::size_t max_retries = 2;
  double backoff_initial_s = 0.5;
  std::size_t max_inflight = 8;
};

struct AgentEndpointConfig {
  std::string url;  // full URL the question is POSTed to
  std::string api_key_env;
  double timeout_s = 900.0;
  std::size_t max_retries = 0;
  double backoff_initial_s = 1.0;
  std::size_t max_inflight = 4;
};

/// Caps concurrent calls through one backend handle.
class InflightLimiter {
 public:
  explicit InflightLimiter(std::size_t cap);

  class Slot {
   public:
    explicit Slot(InflightLimiter& limiter) : limiter_(limiter) { limiter_.sem_.acquire(); }
    ~Slot() { limiter_.sem_.release(); }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    InflightLimiter& limiter_;
  };

 private:
  std::counting_semaphore<4096> sem_;
};

/// One POST to {base_url}/chat/completions with system + user messages;
/// transient failures (transport, timeout, 429, 5xx) are retried with
/// exponential backoff up to max_retries. 401/403 map to AuthFailure.
std::string chat_complete(const ChatBackendConfig& backend, const std::string& prompt);

class ChatClient final : public CompletionBackend {
 public:
  explicit ChatClient(ChatBackendConfig config);
  std::string complete(const std::string& prompt) override;
  const ChatBackendConfig& config() const { return config_; }

 private:
  ChatBackendConfig config_;
  InflightLimiter limiter_;
};

/// POSTs {"question": ...}, expects {"answer": ..., "steps": optional int}.
AgentReply ask_agent(const AgentEndpointConfig& endpoint, const std::string& question);

class AgentClient final : public AgentBackend {
 public:
  explicit AgentClient(AgentEndpointConfig config);
  AgentReply ask(const std::string& question) override;
  const AgentEndpointConfig& config() const { return config_; }

 private:
  AgentEndpointConfig config_;
  InflightLimiter limiter_;
};

/// The whole completion is the answer. Failures land in SolverResult::error.
SolverResult solve_with_llm(std::string_view query, CompletionBackend& backend);
SolverResult solve_with_agent(std::string_view query, AgentBackend& agent);

/// Calls exactly the solver named by decision.route. A failed LLM call is
/// returned as-is; there is no escalation to the agent.
SolverResult execute_route(std::string_view query, const RoutingDecision& decision, CompletionBackend& llm,
                           AgentBackend& agent);

/// Deterministic in-process completion backend for tests and dry runs.
class ScriptedCompletion final : public CompletionBackend {
 public:
  using Script = std::function<std::string(const std::string& prompt)>;

  explicit ScriptedCompletion(Script script, std::chrono::milliseconds delay = {});
  /// Always returns the same text.
  static std::shared_ptr<ScriptedCompletion> constant(std::string text);

  std::string complete(const std::string& prompt) override;
  std::size_t calls() const { return calls_.load(); }

 private:
  Script script_;
  std::chrono::milliseconds delay_;
  std::atomic<std::size_t> calls_{0};
};

class ScriptedAgent final : public AgentBackend {
 public:
  using Script = std::function<AgentReply(const std::string& question)>;

  explicit ScriptedAgent(Script script, std::chrono::milliseconds delay = {});

  AgentReply ask(const std::string& question) override;
  std::size_t calls() const { return calls_.load(); }

 private:
  Script script_;
  std::chrono::milliseconds delay_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace routegate
