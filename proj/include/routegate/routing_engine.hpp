#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "routegate/backends.hpp"
#include "routegate/experience_memory.hpp"
#include "routegate/hybrid_retrieval.hpp"
#include "routegate/prompt_templates.hpp"
#include "routegate/types.hpp"

namespace routegate {

inline constexpr std::string_view kNoSimilarQuestions = "No similar questions found";

struct RouterConfig {
  Strategy strategy = Strategy::RubricCoT;
  Route fallback_route = Route::Agent;
  // Extra attempts with a reminder appended when the completion has no decision.
  std::size_t parse_retries = 1;
  std::size_t example_truncate_chars = 1000;
  // Top-K for retrieval strategies.
  std::size_t k = 5;
};

/// A retrieved case together with the stored record it points at.
struct Evidence {
  RetrievedCase hit;
  ExperienceRecord record;
};

struct RoutingDecision {
  Route route = Route::Agent;
  Strategy strategy = Strategy::RubricCoT;
  // Full text of the last routing-model completion.
  std::string rationale;
  std::vector<RetrievedCase> retrieved;
  double router_latency_s = 0.0;
  bool fallback_used = false;
  std::size_t attempts = 0;

  std::vector<std::string> retrieved_ids() const;
};

/// Keeps at most max_chars code points, marking the cut with "...".
std::string truncate_text(std::string_view text, std::size_t max_chars);

/// One example block for {retrieved_examples}.
std::string format_example(std::size_t position, const ExperienceRecord& record,
                           std::size_t truncate_chars);

/// Fills {original_question} and {retrieved_examples}. Substituted values are
/// never rescanned, so braces inside questions are safe. Throws
/// PlaceholderUnfilled for any other {placeholder} or a missing question slot.
std::string render_prompt(Strategy strategy, std::string_view query, std::span<const Evidence> retrieved,
                          const PromptTemplates& templates, std::size_t truncate_chars = 1000);

/// nullopt means the completion carries no usable decision.
std::optional<Route> parse_decision(std::string_view completion, Strategy strategy);

/// Retrieve, render, ask the routing model, parse. Never fails on model
/// misbehavior: unparseable output yields config.fallback_route.
/// Throws IndexMissing, or BackendUnavailable when the backend errors.
RoutingDecision decide_route(std::string_view query, Strategy strategy, const Index* index,
                             const Memory* memory, CompletionBackend& backend,
                             const RouterConfig& config = {},
                             const PromptTemplates& templates = PromptTemplates::builtin());

/// Bundles everything decide_route needs. Shares the memory, index and
/// backend; safe to call from many threads when the backend is.
class Router {
 public:
  Router(RouterConfig config, std::shared_ptr<CompletionBackend> backend,
         std::shared_ptr<const Memory> memory = nullptr, std::shared_ptr<const Index> index = nullptr,
         PromptTemplates templates = PromptTemplates::builtin());

  RoutingDecision decide(std::string_view query) const;
  RoutingDecision decide(std::string_view query, Strategy strategy) const;

  const RouterConfig& config() const { return config_; }
  const Memory* memory() const { return memory_.get(); }
  const Index* index() const { return index_.get(); }

 private:
  RouterConfig config_;
  std::shared_ptr<CompletionBackend> backend_;
  std::shared_ptr<const Memory> memory_;
  std::shared_ptr<const Index> index_;
  PromptTemplates templates_;
};

}  // namespace routegate
