#include "routegate/solver_backends.hpp"

#include <cstdlib>
#include <regex>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

namespace routegate {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, kUrl))
    fail(ErrorCode::ConfigInvalid, fmt::format("not an http(s) URL: '{}'", url));
  std::string path = m[2].matched ? m[2].str() : "";
  return {m[1].str(), path};
}

std::string join_path(std::string base, std::string_view suffix) {
  while (!base.empty() && base.back() == '/') base.pop_back();
  return base + std::string(suffix);
}

std::chrono::microseconds to_micros(double seconds) {
  return std::chrono::microseconds(static_cast<long long>(seconds * 1e6));
}

httplib::Headers auth_headers(const std::string& api_key_env) {
  httplib::Headers headers;
  if (api_key_env.empty()) return headers;
  if (const char* key = std::getenv(api_key_env.c_str()); key != nullptr && *key != '\0')
    headers.emplace("Authorization", std::string("Bearer ") + key);
  return headers;
}

struct PostOptions {
  double timeout_s;
  std::size_t max_retries;
  double backoff_initial_s;
  std::string api_key_env;
};

json post_json(const std::string& url, const std::string& route_suffix, const json& body,
               const PostOptions& opts) {
  const Endpoint ep = split_url(url);
  const std::string path = route_suffix.empty() ? (ep.path.empty() ? "/" : ep.path)
                                                : join_path(ep.path, route_suffix);
  const std::string payload = body.dump();

  std::optional<Error> last;
  for (std::size_t attempt = 0; attempt <= opts.max_retries; ++attempt) {
    if (attempt > 0) {
      const double wait = opts.backoff_initial_s * static_cast<double>(1ULL << (attempt - 1));
      std::this_thread::sleep_for(to_micros(wait));
    }
    httplib::Client client(ep.origin);
    client.set_connection_timeout(to_micros(opts.timeout_s));
    client.set_read_timeout(to_micros(opts.timeout_s));
    client.set_write_timeout(to_micros(opts.timeout_s));

    const auto start = Clock::now();
    auto res = client.Post(path, auth_headers(opts.api_key_env), payload, "application/json");
    const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();

    if (!res) {
      const auto err = res.error();
      const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                             (err == httplib::Error::Read && elapsed >= 0.95 * opts.timeout_s);
      last = Error(timed_out ? ErrorCode::Timeout : ErrorCode::TransportError,
                   fmt::format("POST {}{}: {}", ep.origin, path, httplib::to_string(err)));
      continue;
    }
    const int status = res->status;
    if (status == 401 || status == 403) {
      Error e(ErrorCode::AuthFailure, fmt::format("POST {}{} returned {}", ep.origin, path, status));
      e.http_status = status;
      throw e;
    }
    if (status < 200 || status >= 300) {
      Error e(ErrorCode::UpstreamError, fmt::format("POST {}{} returned {}", ep.origin, path, status));
      e.http_status = status;
      if (status == 429 || status >= 500) {
        last = e;
        continue;
      }
      throw e;
    }
    try {
      return json::parse(res->body);
    } catch (const json::parse_error&) {
      Error e(ErrorCode::UpstreamError, fmt::format("POST {}{} returned a non-JSON body", ep.origin, path));
      e.http_status = status;
      throw e;
    }
  }
  throw *last;
}

double elapsed_since(Clock::time_point start) {
  // A strictly positive latency even for instantaneous in-process mocks.
  return std::max(std::chrono::duration<double>(Clock::now() - start).count(), 1e-9);
}

SolverResult run_solver(Route solver, const std::function<std::string()>& call) {
  SolverResult result;
  result.solver = solver;
  const auto start = Clock::now();
  try {
    result.answer = call();
  } catch (const Error& e) {
    result.error = SolverFailure{e.code(), e.what()};
  } catch (const std::exception& e) {
    result.error = SolverFailure{ErrorCode::UpstreamError, e.what()};
  }
  result.latency_s = elapsed_since(start);
  return result;
}

}  // namespace

InflightLimiter::InflightLimiter(std::size_t cap) : sem_(static_cast<std::ptrdiff_t>(cap)) {
  if (cap < 1 || cap > 4096) fail(ErrorCode::ConfigInvalid, fmt::format("in-flight cap must be in [1, 4096], got {}", cap));
}

std::string chat_complete(const ChatBackendConfig& backend, const std::string& prompt) {
  if (!(backend.timeout_s > 0.0)) fail(ErrorCode::ConfigInvalid, "chat backend timeout must be > 0");
  json body = {{"model", backend.model},
               {"temperature", backend.temperature},
               {"messages",
                {{{"role", "system"}, {"content", backend.system_prompt}},
                 {{"role", "user"}, {"content", prompt}}}}};
  json reply = post_json(backend.base_url, "/chat/completions", body,
                         {backend.timeout_s, backend.max_retries, backend.backoff_initial_s, backend.api_key_env});
  try {
    const auto& content = reply.at("choices").at(0).at("message").at("content");
    return content.is_null() ? std::string() : content.get<std::string>();
  } catch (const json::exception&) {
    fail(ErrorCode::UpstreamError, "chat completion response has no choices[0].message.content");
  }
}

ChatClient::ChatClient(ChatBackendConfig config) : config_(std::move(config)), limiter_(config_.max_inflight) {}

std::string ChatClient::complete(const std::string& prompt) {
  InflightLimiter::Slot slot(limiter_);
  return chat_complete(config_, prompt);
}

AgentReply ask_agent(const AgentEndpointConfig& endpoint, const std::string& question) {
  if (!(endpoint.timeout_s > 0.0)) fail(ErrorCode::ConfigInvalid, "agent timeout must be > 0");
  json reply = post_json(endpoint.url, "", json{{"question", question}},
                         {endpoint.timeout_s, endpoint.max_retries, endpoint.backoff_initial_s, endpoint.api_key_env});
  if (!reply.is_object() || !reply.contains("answer") || !reply["answer"].is_string())
    fail(ErrorCode::UpstreamError, "agent response has no string 'answer'");
  AgentReply out;
  out.answer = reply["answer"].get<std::string>();
  if (auto it = reply.find("steps"); it != reply.end() && it->is_number_integer()) out.steps = it->get<int>();
  return out;
}

AgentClient::AgentClient(AgentEndpointConfig config) : config_(std::move(config)), limiter_(config_.max_inflight) {}

AgentReply AgentClient::ask(const std::string& question) {
  InflightLimiter::Slot slot(limiter_);
  return ask_agent(config_, question);
}

SolverResult solve_with_llm(std::string_view query, CompletionBackend& backend) {
  return run_solver(Route::LLM, [&] { return backend.complete(std::string(query)); });
}

SolverResult solve_with_agent(std::string_view query, AgentBackend& agent) {
  return run_solver(Route::Agent, [&] { return agent.ask(std::string(query)).answer; });
}

SolverResult execute_route(std::string_view query, const RoutingDecision& decision, CompletionBackend& llm,
                           AgentBackend& agent) {
  return decision.route == Route::LLM ? solve_with_llm(query, llm) : solve_with_agent(query, agent);
}

ScriptedCompletion::ScriptedCompletion(Script script, std::chrono::milliseconds delay)
    : script_(std::move(script)), delay_(delay) {}

std::shared_ptr<ScriptedCompletion> ScriptedCompletion::constant(std::string text) {
  return std::make_shared<ScriptedCompletion>([text = std::move(text)](const std::string&) { return text; });
}

std::string ScriptedCompletion::complete(const std::string& prompt) {
  ++calls_;
  if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
  return script_(prompt);
}

ScriptedAgent::ScriptedAgent(Script script, std::chrono::milliseconds delay)
    : script_(std::move(script)), delay_(delay) {}

AgentReply ScriptedAgent::ask(const std::string& question) {
  ++calls_;
  if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
  return script_(question);
}

}  // namespace routegate
