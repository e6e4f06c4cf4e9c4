#include <gtest/gtest.h>

#include <json.hpp>

#include "routegate/routing_engine.hpp"
#include "routegate/solver_backends.hpp"
#include "support/test_util.hpp"

using namespace routegate;
using routegate::testing::fixture;
using routegate::testing::memory_of;
using routegate::testing::read_file;
using routegate::testing::TempDir;
using routegate::testing::write_file;

namespace {

constexpr const char* kQuestion = "Who painted the ceiling of the Sistine Chapel?";

std::vector<Evidence> golden_evidence() {
  ExperienceRecord a;
  a.id = "e1";
  a.question = "Who painted the Mona Lisa?";
  a.llm_answer = "Leonardo da Vinci";
  a.llm_latency_s = 1.23;
  a.agent_answer = "Leonardo da Vinci";
  a.agent_latency_s = 84.56;
  ExperienceRecord b;
  b.id = "e2";
  b.question = "How many moons does Mars have, and what are their names?";
  b.llm_answer = "Two";
  b.llm_latency_s = 2.0;
  b.agent_answer = "Two: Phobos and Deimos.";
  b.agent_latency_s = 130.04;
  return {{RetrievedCase{"e1", 1.0, 0.9, 0.95, 1}, a}, {RetrievedCase{"e2", 0.5, 0.4, 0.6, 2}, b}};
}

const std::vector<std::string> kQuestions = {
    "What is the capital of France?",
    "Find the 2023 revenue of the company that acquired Twitter and compare it with 2019.",
    "What is the time complexity of binary search?",
    "Which paper introduced the transformer architecture and who were its authors?",
    "What is 17 times 3?",
};

}  // namespace

TEST(Strategy, NamesRoundTrip) {
  for (auto s : {Strategy::PromptOnly, Strategy::RagDirect, Strategy::RegularCoT, Strategy::RubricCoT}) {
    EXPECT_EQ(parse_strategy(to_string(s)), s);
  }
  EXPECT_EQ(parse_strategy("RUBRIC_COT"), Strategy::RubricCoT);
  EXPECT_FALSE(parse_strategy("boundary").has_value());
  EXPECT_EQ(template_file_name(Strategy::RegularCoT), "regular_cot.txt");
}

struct GoldenCase {
  Strategy strategy;
  bool with_examples;
  const char* file;
};

void PrintTo(const GoldenCase& c, std::ostream* os) { *os << c.file; }

class GoldenPrompt : public ::testing::TestWithParam<GoldenCase> {};

TEST_P(GoldenPrompt, ByteMatches) {
  const auto& c = GetParam();
  std::vector<Evidence> ev = c.with_examples ? golden_evidence() : std::vector<Evidence>{};
  const auto prompt = render_prompt(c.strategy, kQuestion, ev, PromptTemplates::builtin());
  EXPECT_EQ(prompt, read_file(fixture(std::string("golden/") + c.file)));
}

INSTANTIATE_TEST_SUITE_P(AllStrategies, GoldenPrompt,
                         ::testing::Values(GoldenCase{Strategy::PromptOnly, false, "prompt_only.txt"},
                                           GoldenCase{Strategy::RagDirect, false, "rag_direct_empty.txt"},
                                           GoldenCase{Strategy::RagDirect, true, "rag_direct.txt"},
                                           GoldenCase{Strategy::RegularCoT, true, "regular_cot.txt"},
                                           GoldenCase{Strategy::RubricCoT, true, "rubric_cot.txt"},
                                           GoldenCase{Strategy::RubricCoT, false, "rubric_cot_empty.txt"}),
                         [](const ::testing::TestParamInfo<GoldenCase>& info) {
                           std::string name = info.param.file;
                           return name.substr(0, name.find('.'));
                         });

TEST(RenderPrompt, KeyPhrases) {
  auto ev = golden_evidence();
  auto rubric = render_prompt(Strategy::RubricCoT, "q?", ev, PromptTemplates::builtin());
  EXPECT_NE(rubric.find("Follow this reasoning process STRICTLY"), std::string::npos);
  EXPECT_NE(rubric.find("Example 1:"), std::string::npos);
  EXPECT_NE(rubric.find("Example 2:"), std::string::npos);
  EXPECT_LT(rubric.find("Mona Lisa"), rubric.find("Mars"));

  auto po = render_prompt(Strategy::PromptOnly, "q?", {}, PromptTemplates::builtin());
  EXPECT_NE(po.find("Model A:"), std::string::npos);
  EXPECT_NE(po.find("Model B:"), std::string::npos);
  EXPECT_EQ(po.find("Example"), std::string::npos);

  auto rag = render_prompt(Strategy::RagDirect, "q?", {}, PromptTemplates::builtin());
  EXPECT_NE(rag.find("No similar questions found"), std::string::npos);
}

TEST(RenderPrompt, SubstitutedTextIsNotRescanned) {
  const std::string tricky = "Explain {retrieved_examples} and {original_question} literally";
  auto p = render_prompt(Strategy::RagDirect, tricky, {}, PromptTemplates::builtin());
  EXPECT_NE(p.find("Original question: " + tricky), std::string::npos);
  EXPECT_EQ(p.find("Original question: Explain No similar"), std::string::npos);
}

TEST(RenderPrompt, TruncatesLongAnswers) {
  auto ev = golden_evidence();
  ev[0].record.agent_answer = std::string(1500, 'x');
  auto p = render_prompt(Strategy::RagDirect, "q", ev, PromptTemplates::builtin(), 1000);
  EXPECT_NE(p.find("Agent answer: " + std::string(1000, 'x') + "...\n"), std::string::npos);
  EXPECT_EQ(p.find(std::string(1001, 'x')), std::string::npos);
  EXPECT_EQ(truncate_text("héllo wörld", 5), "héllo...");
  EXPECT_EQ(truncate_text("short", 5), "short");
}

TEST(RenderPrompt, TemplateErrors) {
  PromptTemplates t = PromptTemplates::builtin();
  t.set(Strategy::RagDirect, "Q: {original_question}\n{unknown_slot}\n{retrieved_examples}");
  try {
    render_prompt(Strategy::RagDirect, "q", {}, t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PlaceholderUnfilled);
  }
  t.set(Strategy::RagDirect, "Q: {original_question} only");
  try {
    render_prompt(Strategy::RagDirect, "q", {}, t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PlaceholderUnfilled);
  }
  try {
    render_prompt(Strategy::PromptOnly, "q", golden_evidence(), PromptTemplates::builtin());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidInput);
  }
  try {
    PromptTemplates{}.get(Strategy::RubricCoT);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TemplateMissing);
  }
}

TEST(PromptTemplatesOverride, DirectoryOverridesBuiltins) {
  TempDir dir;
  write_file(dir / "rag_direct.txt", "CUSTOM {original_question} / {retrieved_examples}\n");
  auto t = PromptTemplates::with_overrides(dir.path());
  EXPECT_EQ(render_prompt(Strategy::RagDirect, "q", {}, t), "CUSTOM q / No similar questions found\n");
  EXPECT_EQ(t.get(Strategy::RubricCoT), PromptTemplates::builtin().get(Strategy::RubricCoT));
  try {
    PromptTemplates::with_overrides(dir / "absent");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TemplateMissing);
  }
}

TEST(PromptTemplatesOverride, ShippedFilesMatchBuiltins) {
  auto shipped = PromptTemplates::with_overrides(ROUTEGATE_PROMPT_DIR);
  for (auto s : {Strategy::PromptOnly, Strategy::RagDirect, Strategy::RegularCoT, Strategy::RubricCoT})
    EXPECT_EQ(shipped.get(s), PromptTemplates::builtin().get(s));
}

TEST(ParseDecision, SpecExamples) {
  EXPECT_EQ(parse_decision("...reasoning...\nFINAL ANSWER: YES", Strategy::RubricCoT), Route::Agent);
  EXPECT_EQ(parse_decision("FINAL ANSWER: NO", Strategy::RubricCoT), Route::LLM);
  EXPECT_EQ(parse_decision("I am not certain.", Strategy::RubricCoT), std::nullopt);
  EXPECT_EQ(parse_decision("FINAL ANSWER: yes\nFINAL ANSWER: NO", Strategy::RegularCoT), Route::LLM);
  EXPECT_EQ(parse_decision("YES (use Model B)", Strategy::PromptOnly), Route::Agent);
}

TEST(ParseDecision, FixtureSuite) {
  auto cases = nlohmann::json::parse(read_file(fixture("parser_cases.json")));
  ASSERT_GE(cases.size(), 20u);
  for (const auto& c : cases) {
    auto strategy = parse_strategy(c["strategy"].get<std::string>());
    ASSERT_TRUE(strategy.has_value());
    auto got = parse_decision(c["completion"].get<std::string>(), *strategy);
    std::optional<Route> want;
    if (!c["expected"].is_null()) want = parse_route(c["expected"].get<std::string>());
    EXPECT_EQ(got, want) << c["name"].get<std::string>();
  }
}

TEST(DecideRoute, AlwaysNoRoutesToLlm) {
  auto memory = memory_of(kQuestions);
  auto index = build_index(memory);
  auto backend = ScriptedCompletion::constant("Analysis...\nFINAL ANSWER: NO");
  auto d = decide_route("What is 2+2?", Strategy::RubricCoT, &index, &memory, *backend);
  EXPECT_EQ(d.route, Route::LLM);
  EXPECT_FALSE(d.fallback_used);
  EXPECT_EQ(d.attempts, 1u);
  EXPECT_EQ(d.retrieved.size(), 5u);
  EXPECT_EQ(d.rationale, "Analysis...\nFINAL ANSWER: NO");
  EXPECT_GT(d.router_latency_s, 0.0);
}

TEST(DecideRoute, GarbageFallsBackToAgentAfterReprompt) {
  auto memory = memory_of(kQuestions);
  auto index = build_index(memory);
  std::vector<std::string> prompts;
  ScriptedCompletion backend([&](const std::string& p) {
    prompts.push_back(p);
    return std::string("I cannot decide.");
  });
  auto d = decide_route("What is 2+2?", Strategy::RubricCoT, &index, &memory, backend);
  EXPECT_EQ(d.route, Route::Agent);
  EXPECT_TRUE(d.fallback_used);
  EXPECT_EQ(backend.calls(), 2u);
  ASSERT_EQ(prompts.size(), 2u);
  EXPECT_EQ(prompts[1].rfind(prompts[0], 0), 0u);
  EXPECT_GT(prompts[1].size(), prompts[0].size());

  RouterConfig cfg;
  cfg.fallback_route = Route::LLM;
  cfg.parse_retries = 0;
  ScriptedCompletion once([](const std::string&) { return std::string("??"); });
  auto d2 = decide_route("q", Strategy::RubricCoT, &index, &memory, once, cfg);
  EXPECT_EQ(d2.route, Route::LLM);
  EXPECT_TRUE(d2.fallback_used);
  EXPECT_EQ(once.calls(), 1u);
}

TEST(DecideRoute, RepromptCanRecover) {
  auto memory = memory_of(kQuestions);
  auto index = build_index(memory);
  int n = 0;
  ScriptedCompletion backend([&](const std::string&) { return std::string(n++ == 0 ? "hmm" : "FINAL ANSWER: YES"); });
  auto d = decide_route("q", Strategy::RegularCoT, &index, &memory, backend);
  EXPECT_EQ(d.route, Route::Agent);
  EXPECT_FALSE(d.fallback_used);
  EXPECT_EQ(d.attempts, 2u);
}

TEST(DecideRoute, ExactQuestionIsTopEvidence) {
  auto memory = memory_of(kQuestions);
  auto index = build_index(memory);
  RouterConfig cfg;
  cfg.k = 3;
  auto backend = ScriptedCompletion::constant("FINAL ANSWER: YES");
  auto d = decide_route(kQuestions[3], Strategy::RubricCoT, &index, &memory, *backend, cfg);
  auto ids = d.retrieved_ids();
  ASSERT_EQ(ids.size(), 3u);
  EXPECT_EQ(ids[0], "exp-000004");
  EXPECT_EQ(d.retrieved[0].rank, 1u);
}

TEST(DecideRoute, PromptOnlyIgnoresMemory) {
  auto memory = memory_of(kQuestions);
  auto index = build_index(memory);
  auto other = memory_of({"completely different", "records here"});
  auto other_index = build_index(other);
  std::vector<std::string> seen;
  ScriptedCompletion backend([&](const std::string& p) {
    seen.push_back(p);
    return std::string("NO");
  });
  auto a = decide_route("q?", Strategy::PromptOnly, &index, &memory, backend);
  auto b = decide_route("q?", Strategy::PromptOnly, &other_index, &other, backend);
  auto c = decide_route("q?", Strategy::PromptOnly, nullptr, nullptr, backend);
  EXPECT_TRUE(a.retrieved.empty());
  EXPECT_TRUE(c.retrieved.empty());
  EXPECT_EQ(a.route, Route::LLM);
  EXPECT_EQ(seen[0], seen[1]);
  EXPECT_EQ(seen[1], seen[2]);
  EXPECT_EQ(b.route, c.route);
}

TEST(DecideRoute, RetrievalStrategiesNeedIndex) {
  auto backend = ScriptedCompletion::constant("FINAL ANSWER: YES");
  for (auto s : {Strategy::RagDirect, Strategy::RegularCoT, Strategy::RubricCoT}) {
    try {
      decide_route("q", s, nullptr, nullptr, *backend);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::IndexMissing);
    }
  }
}

TEST(DecideRoute, UpstreamErrorsBecomeBackendUnavailable) {
  auto memory = memory_of(kQuestions);
  auto index = build_index(memory);
  ScriptedCompletion backend([](const std::string&) -> std::string { fail(ErrorCode::Timeout, "slow"); });
  try {
    decide_route("q", Strategy::RubricCoT, &index, &memory, backend);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BackendUnavailable);
  }
}

TEST(DecideRoute, DeterministicGivenDeterministicBackend) {
  auto memory = std::make_shared<Memory>(memory_of(kQuestions));
  auto index = std::make_shared<Index>(build_index(*memory));
  auto backend = std::make_shared<ScriptedCompletion>([](const std::string& p) {
    return std::string(p.find("binary") != std::string::npos ? "FINAL ANSWER: NO" : "FINAL ANSWER: YES");
  });
  Router router(RouterConfig{}, backend, memory, index);
  for (const auto& q : kQuestions) {
    auto a = router.decide(q);
    auto b = router.decide(q);
    EXPECT_EQ(a.route, b.route);
    EXPECT_EQ(a.rationale, b.rationale);
    EXPECT_EQ(a.retrieved_ids(), b.retrieved_ids());
    EXPECT_EQ(a.fallback_used, b.fallback_used);
  }
  EXPECT_EQ(router.decide("q", Strategy::PromptOnly).strategy, Strategy::PromptOnly);
}

TEST(DecideRoute, TotalOverArbitraryCompletions) {
  auto memory = memory_of(kQuestions);
  auto index = build_index(memory);
  std::mt19937_64 rng(9);
  for (int i = 0; i < 200; ++i) {
    const std::string text = routegate::testing::random_unicode(rng, 80);
    ScriptedCompletion backend([&](const std::string&) { return text; });
    for (auto s : {Strategy::PromptOnly, Strategy::RagDirect, Strategy::RubricCoT}) {
      auto d = decide_route(text, s, &index, &memory, backend);
      EXPECT_EQ(d.fallback_used, !parse_decision(text, s).has_value());
      EXPECT_EQ(d.retrieved.empty(), s == Strategy::PromptOnly);
    }
  }
}
