#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include <json.hpp>

#include "routegate/backends.hpp"
#include "routegate/experience_memory.hpp"
#include "routegate/hybrid_retrieval.hpp"
#include "routegate/routing_engine.hpp"

namespace routegate {

struct GatewayDeps {
  std::shared_ptr<const Memory> memory;
  std::shared_ptr<const Index> index;
  std::shared_ptr<const Router> router;
  std::shared_ptr<CompletionBackend> llm;
  std::shared_ptr<AgentBackend> agent;
};

struct HttpReply {
  int status = 200;
  nlohmann::json body;
};

/// Request handlers for the HTTP gateway, independent of the transport.
/// Memory and index are read-only; only the counters mutate.
class GatewayService {
 public:
  explicit GatewayService(GatewayDeps deps);

  /// POST /v1/route: decision only, no solver runs.
  HttpReply handle_route(const nlohmann::json& request);
  /// POST /v1/answer: decide, then run exactly one solver.
  HttpReply handle_answer(const nlohmann::json& request);
  /// GET /v1/stats
  HttpReply handle_stats() const;
  /// GET /v1/health: ready once memory and index are loaded.
  HttpReply handle_health() const;

  bool ready() const { return deps_.memory != nullptr && deps_.index != nullptr; }

 private:
  struct Counters {
    std::atomic<std::size_t> requests{0};
    std::atomic<std::size_t> route_requests{0};
    std::atomic<std::size_t> answer_requests{0};
    std::atomic<std::size_t> routed_llm{0};
    std::atomic<std::size_t> routed_agent{0};
    std::atomic<std::size_t> fallbacks{0};
    std::atomic<std::size_t> client_errors{0};
    std::atomic<std::size_t> upstream_errors{0};
  };

  // Parses the question / strategy, or fills `reply` with a 400.
  std::optional<RoutingDecision> route_request(const nlohmann::json& request, HttpReply& reply);

  GatewayDeps deps_;
  Counters counters_;
};

nlohmann::json decision_to_json(const RoutingDecision& decision);

/// cpp-httplib server bound to a GatewayService.
class GatewayServer {
 public:
  explicit GatewayServer(GatewayService& service);
  ~GatewayServer();
  GatewayServer(const GatewayServer&) = delete;
  GatewayServer& operator=(const GatewayServer&) = delete;

  /// Binds (port 0 picks a free port) and serves on a background thread.
  /// Returns the bound port. Throws IoError when binding fails.
  int start(const std::string& host, int port);
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace routegate
