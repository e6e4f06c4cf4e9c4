#include "routegate/gateway_service.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include "routegate/solver_backends.hpp"

namespace routegate {

using nlohmann::json;

namespace {

HttpReply error_reply(int status, std::string_view code, const std::string& message) {
  return {status, json{{"error", {{"code", code}, {"message", message}}}}};
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

}  // namespace

json decision_to_json(const RoutingDecision& d) {
  json retrieved = json::array();
  for (const auto& c : d.retrieved) retrieved.push_back({{"id", c.record_id}, {"fused_score", c.fused_score}});
  return {{"route", to_string(d.route)},
          {"strategy", to_string(d.strategy)},
          {"rationale", d.rationale},
          {"retrieved", retrieved},
          {"router_latency_s", d.router_latency_s},
          {"fallback_used", d.fallback_used}};
}

GatewayService::GatewayService(GatewayDeps deps) : deps_(std::move(deps)) {
  if (!deps_.router) fail(ErrorCode::InvalidInput, "gateway needs a router");
}

std::optional<RoutingDecision> GatewayService::route_request(const json& request, HttpReply& reply) {
  ++counters_.requests;
  if (!request.is_object() || !request.contains("question") || !request["question"].is_string() ||
      blank(request["question"].get<std::string>())) {
    ++counters_.client_errors;
    reply = error_reply(400, to_string(ErrorCode::EmptyQuestion), "request needs a non-empty 'question' string");
    return std::nullopt;
  }
  const std::string question = request["question"].get<std::string>();
  Strategy strategy = deps_.router->config().strategy;
  if (auto it = request.find("strategy"); it != request.end() && !it->is_null()) {
    std::optional<Strategy> parsed = it->is_string() ? parse_strategy(it->get<std::string>()) : std::nullopt;
    if (!parsed) {
      ++counters_.client_errors;
      reply = error_reply(400, to_string(ErrorCode::InvalidInput),
                          "'strategy' must be one of prompt_only, rag_direct, regular_cot, rubric_cot");
      return std::nullopt;
    }
    strategy = *parsed;
  }
  try {
    RoutingDecision d = deps_.router->decide(question, strategy);
    ++(d.route == Route::LLM ? counters_.routed_llm : counters_.routed_agent);
    if (d.fallback_used) ++counters_.fallbacks;
    return d;
  } catch (const Error& e) {
    ++counters_.upstream_errors;
    reply = error_reply(503, to_string(e.code()), e.what());
    return std::nullopt;
  }
}

HttpReply GatewayService::handle_route(const json& request) {
  ++counters_.route_requests;
  HttpReply reply;
  auto decision = route_request(request, reply);
  if (!decision) return reply;
  return {200, decision_to_json(*decision)};
}

HttpReply GatewayService::handle_answer(const json& request) {
  ++counters_.answer_requests;
  HttpReply reply;
  auto decision = route_request(request, reply);
  if (!decision) return reply;
  if (!deps_.llm || !deps_.agent) {
    HttpReply r = error_reply(503, to_string(ErrorCode::BackendUnavailable), "solver backends are not configured");
    r.body["route"] = to_string(decision->route);
    r.body["decision"] = decision_to_json(*decision);
    return r;
  }
  SolverResult result = execute_route(request["question"].get<std::string>(), *decision, *deps_.llm, *deps_.agent);
  if (!result.ok()) {
    ++counters_.upstream_errors;
    HttpReply r = error_reply(502, to_string(result.error->code), result.error->message);
    r.body["route"] = to_string(decision->route);
    r.body["solver_latency_s"] = result.latency_s;
    r.body["decision"] = decision_to_json(*decision);
    return r;
  }
  json body = {{"route", to_string(decision->route)},
               {"answer", result.answer},
               {"solver_latency_s", result.latency_s},
               {"router_latency_s", decision->router_latency_s},
               {"fallback_used", decision->fallback_used},
               {"strategy", to_string(decision->strategy)}};
  return {200, body};
}

HttpReply GatewayService::handle_stats() const {
  json memory = json::object();
  if (deps_.memory) {
    const MemoryStats s = memory_stats(*deps_.memory);
    memory = {{"count", s.count},
              {"mean_llm_latency_s", s.mean_llm_latency_s ? json(*s.mean_llm_latency_s) : json()},
              {"mean_agent_latency_s", s.mean_agent_latency_s ? json(*s.mean_agent_latency_s) : json()},
              {"per_source", s.per_source}};
  }
  json index = json::object();
  if (deps_.index) {
    const auto& c = deps_.index->config();
    index = {{"size", deps_.index->size()}, {"k", c.k},           {"alpha", c.alpha},
             {"bm25_k1", c.bm25_k1},        {"bm25_b", c.bm25_b}, {"embed_dim", c.embed_dim}};
  }
  const auto& c = counters_;
  return {200,
          {{"memory", memory},
           {"index", index},
           {"strategy", to_string(deps_.router->config().strategy)},
           {"counters",
            {{"requests", c.requests.load()},
             {"route_requests", c.route_requests.load()},
             {"answer_requests", c.answer_requests.load()},
             {"client_errors", c.client_errors.load()},
             {"upstream_errors", c.upstream_errors.load()}}},
           {"routes", {{"LLM", c.routed_llm.load()}, {"Agent", c.routed_agent.load()}}},
           {"fallback_count", c.fallbacks.load()}}};
}

HttpReply GatewayService::handle_health() const {
  if (!ready()) return {503, {{"status", "loading"}}};
  return {200, {{"status", "ready"}, {"memory_records", deps_.memory->size()}}};
}

struct GatewayServer::Impl {
  GatewayService& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(GatewayService& s) : service(s) {}
};

namespace {

void send(httplib::Response& res, const HttpReply& reply) {
  res.status = reply.status;
  res.set_content(reply.body.dump(), "application/json");
}

template <typename Handler>
void with_json_body(const httplib::Request& req, httplib::Response& res, Handler&& handler) {
  json body;
  try {
    body = json::parse(req.body);
  } catch (const json::parse_error& e) {
    send(res, error_reply(400, to_string(ErrorCode::InvalidInput), fmt::format("request body is not JSON: {}", e.what())));
    return;
  }
  send(res, handler(body));
}

}  // namespace

GatewayServer::GatewayServer(GatewayService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  auto& svc = impl_->service;
  srv.Post("/v1/route", [&svc](const httplib::Request& req, httplib::Response& res) {
    with_json_body(req, res, [&](const json& body) { return svc.handle_route(body); });
  });
  srv.Post("/v1/answer", [&svc](const httplib::Request& req, httplib::Response& res) {
    with_json_body(req, res, [&](const json& body) { return svc.handle_answer(body); });
  });
  srv.Get("/v1/stats", [&svc](const httplib::Request&, httplib::Response& res) { send(res, svc.handle_stats()); });
  srv.Get("/v1/health", [&svc](const httplib::Request&, httplib::Response& res) { send(res, svc.handle_health()); });
}

GatewayServer::~GatewayServer() {
  stop();
  wait();
}

int GatewayServer::start(const std::string& host, int port) {
  auto& srv = impl_->server;
  int bound = port;
  if (port == 0) {
    bound = srv.bind_to_any_port(host);
  } else if (!srv.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) fail(ErrorCode::IoError, fmt::format("cannot bind {}:{}", host, port));
  impl_->thread = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  return bound;
}

void GatewayServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void GatewayServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace routegate
