#include "routegate/routing_engine.hpp"

#include <chrono>

#include <fmt/format.h>

namespace routegate {

namespace {

bool is_placeholder_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

bool is_ascii_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : c; }

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (lower(a[i]) != lower(b[i])) return false;
  return true;
}

std::optional<Route> yes_no(std::string_view word) {
  if (iequals(word, "yes")) return Route::Agent;
  if (iequals(word, "no")) return Route::LLM;
  return std::nullopt;
}

struct Word {
  std::string_view text;
  std::size_t pos;
};

std::vector<Word> ascii_words(std::string_view s) {
  std::vector<Word> words;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_ascii_alpha(s[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && is_ascii_alpha(s[j])) ++j;
    // Letters glued to digits ("no2") are not standalone words.
    const bool glued = (i > 0 && std::isdigit(static_cast<unsigned char>(s[i - 1]))) ||
                       (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j])));
    if (!glued) words.push_back({s.substr(i, j - i), i});
    i = j;
  }
  return words;
}

// Decision following "final answer:" at pos (pos points just past the colon).
std::optional<Route> decision_after(std::string_view s, std::size_t pos) {
  static constexpr std::string_view kSkippable = " \t\r\n*_\"'`[({<";
  while (pos < s.size() && kSkippable.find(s[pos]) != std::string_view::npos) ++pos;
  std::size_t end = pos;
  while (end < s.size() && is_ascii_alpha(s[end])) ++end;
  if (end == pos) return std::nullopt;
  if (end < s.size() && std::isalnum(static_cast<unsigned char>(s[end]))) return std::nullopt;
  return yes_no(s.substr(pos, end - pos));
}

// Positions just past every "final answer:" marker (case-insensitive,
// tolerating markdown emphasis between the phrase and the colon).
std::vector<std::size_t> final_answer_markers(std::string_view s) {
  static constexpr std::string_view kPhrase = "final answer";
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i + kPhrase.size() <= s.size(); ++i) {
    if (!iequals(s.substr(i, kPhrase.size()), kPhrase)) continue;
    std::size_t j = i + kPhrase.size();
    while (j < s.size() && (s[j] == '*' || s[j] == '_' || s[j] == ' ')) ++j;
    if (j < s.size() && s[j] == ':') out.push_back(j + 1);
  }
  return out;
}

std::optional<Route> parse_final_answer(std::string_view s) {
  auto markers = final_answer_markers(s);
  for (auto it = markers.rbegin(); it != markers.rend(); ++it)
    if (auto route = decision_after(s, *it)) return route;
  return std::nullopt;
}

// Short direct answers: the first word, the last word and every upper-case
// YES/NO must all agree.
std::optional<Route> parse_bare(std::string_view s) {
  auto words = ascii_words(s);
  if (words.empty()) return std::nullopt;
  std::vector<Route> votes;
  if (auto r = yes_no(words.front().text)) votes.push_back(*r);
  if (auto r = yes_no(words.back().text)) votes.push_back(*r);
  for (const auto& w : words) {
    if (w.text == "YES") votes.push_back(Route::Agent);
    if (w.text == "NO") votes.push_back(Route::LLM);
  }
  if (votes.empty()) return std::nullopt;
  for (Route v : votes)
    if (v != votes.front()) return std::nullopt;
  return votes.front();
}

std::string reminder(Strategy strategy) {
  if (is_chain_of_thought(strategy))
    return "\n\nYour previous reply did not contain a decision. End your reply with exactly one line: "
           "FINAL ANSWER: YES or FINAL ANSWER: NO.";
  return "\n\nYour previous reply did not contain a decision. Reply with only YES or NO.";
}

}  // namespace

std::vector<std::string> RoutingDecision::retrieved_ids() const {
  std::vector<std::string> ids;
  for (const auto& c : retrieved) ids.push_back(c.record_id);
  return ids;
}

std::string truncate_text(std::string_view text, std::size_t max_chars) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if ((static_cast<unsigned char>(text[i]) & 0xC0) == 0x80) continue;
    if (count == max_chars) return std::string(text.substr(0, i)) + "...";
    ++count;
  }
  return std::string(text);
}

std::string format_example(std::size_t position, const ExperienceRecord& record,
                           std::size_t truncate_chars) {
  return fmt::format(
      "Example {}:\n"
      "Question: {}\n"
      "LLM answer: {}\n"
      "LLM response time: {:.1f} s\n"
      "Agent answer: {}\n"
      "Agent response time: {:.1f} s",
      position, record.question, truncate_text(record.llm_answer, truncate_chars), record.llm_latency_s,
      truncate_text(record.agent_answer, truncate_chars), record.agent_latency_s);
}

std::string render_prompt(Strategy strategy, std::string_view query, std::span<const Evidence> retrieved,
                          const PromptTemplates& templates, std::size_t truncate_chars) {
  if (!uses_retrieval(strategy) && !retrieved.empty())
    fail(ErrorCode::InvalidInput, "prompt_only routing takes no retrieved examples");
  const std::string& tmpl = templates.get(strategy);

  std::string examples;
  if (retrieved.empty()) {
    examples = kNoSimilarQuestions;
  } else {
    for (std::size_t i = 0; i < retrieved.size(); ++i) {
      if (i > 0) examples += "\n\n";
      examples += format_example(i + 1, retrieved[i].record, truncate_chars);
    }
  }

  std::string out;
  out.reserve(tmpl.size() + query.size() + examples.size());
  bool saw_question = false;
  bool saw_examples = false;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      std::size_t j = i + 1;
      while (j < tmpl.size() && is_placeholder_char(tmpl[j])) ++j;
      if (j < tmpl.size() && tmpl[j] == '}' && j > i + 1) {
        std::string_view name(tmpl.data() + i, j - i + 1);
        if (name == kQuestionPlaceholder) {
          out += query;
          saw_question = true;
        } else if (name == kExamplesPlaceholder && uses_retrieval(strategy)) {
          out += examples;
          saw_examples = true;
        } else {
          fail(ErrorCode::PlaceholderUnfilled,
               fmt::format("{} template has no value for {}", to_string(strategy), name));
        }
        i = j + 1;
        continue;
      }
    }
    out += tmpl[i++];
  }
  if (!saw_question)
    fail(ErrorCode::PlaceholderUnfilled,
         fmt::format("{} template lacks {}", to_string(strategy), kQuestionPlaceholder));
  if (uses_retrieval(strategy) && !saw_examples)
    fail(ErrorCode::PlaceholderUnfilled,
         fmt::format("{} template lacks {}", to_string(strategy), kExamplesPlaceholder));
  return out;
}

std::optional<Route> parse_decision(std::string_view completion, Strategy strategy) {
  if (auto route = parse_final_answer(completion)) return route;
  if (is_chain_of_thought(strategy)) return std::nullopt;
  return parse_bare(completion);
}

RoutingDecision decide_route(std::string_view query, Strategy strategy, const Index* index,
                             const Memory* memory, CompletionBackend& backend, const RouterConfig& config,
                             const PromptTemplates& templates) {
  using Clock = std::chrono::steady_clock;
  if (uses_retrieval(strategy) && (index == nullptr || memory == nullptr))
    fail(ErrorCode::IndexMissing,
         fmt::format("strategy {} needs an experience memory and index", to_string(strategy)));

  const auto start = Clock::now();
  RoutingDecision decision;
  decision.strategy = strategy;

  std::vector<Evidence> evidence;
  if (uses_retrieval(strategy)) {
    decision.retrieved = retrieve_top_k(*index, query, config.k);
    for (const auto& hit : decision.retrieved) {
      const ExperienceRecord* record = memory->find(hit.record_id);
      if (record == nullptr)
        fail(ErrorCode::IndexMissing, fmt::format("index refers to record '{}' missing from memory", hit.record_id));
      evidence.push_back({hit, *record});
    }
  }

  const std::string prompt = render_prompt(strategy, query, evidence, templates, config.example_truncate_chars);

  std::optional<Route> parsed;
  for (std::size_t attempt = 0; attempt <= config.parse_retries && !parsed; ++attempt) {
    ++decision.attempts;
    try {
      decision.rationale = backend.complete(attempt == 0 ? prompt : prompt + reminder(strategy));
    } catch (const Error& e) {
      if (!is_upstream(e.code())) throw;
      fail(ErrorCode::BackendUnavailable, fmt::format("routing model failed: {}", e.what()));
    }
    parsed = parse_decision(decision.rationale, strategy);
  }

  decision.fallback_used = !parsed.has_value();
  decision.route = parsed.value_or(config.fallback_route);
  decision.router_latency_s = std::chrono::duration<double>(Clock::now() - start).count();
  return decision;
}

Router::Router(RouterConfig config, std::shared_ptr<CompletionBackend> backend,
               std::shared_ptr<const Memory> memory, std::shared_ptr<const Index> index,
               PromptTemplates templates)
    : config_(config),
      backend_(std::move(backend)),
      memory_(std::move(memory)),
      index_(std::move(index)),
      templates_(std::move(templates)) {
  if (!backend_) fail(ErrorCode::InvalidInput, "router needs a completion backend");
}

RoutingDecision Router::decide(std::string_view query) const { return decide(query, config_.strategy); }

RoutingDecision Router::decide(std::string_view query, Strategy strategy) const {
  return decide_route(query, strategy, index_.get(), memory_.get(), *backend_, config_, templates_);
}

}  // namespace routegate
