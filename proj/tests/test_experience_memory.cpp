#include <gtest/gtest.h>

#include <json.hpp>

#include "routegate/experience_memory.hpp"
#include "support/test_util.hpp"

using namespace routegate;
using routegate::testing::TempDir;
using routegate::testing::make_record;
using routegate::testing::read_file;
using routegate::testing::write_file;

namespace {

SolverResult ok_result(std::string answer, double latency, Route solver) {
  SolverResult r;
  r.answer = std::move(answer);
  r.latency_s = latency;
  r.solver = solver;
  return r;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected routegate::Error";
  return ErrorCode::InvalidInput;
}

const char* kValidLine =
    R"({"id":"q1","question":"What is 2+2?","llm_answer":"4","llm_latency_s":1.2,"agent_answer":"4","agent_latency_s":80.0})";

}  // namespace

TEST(RecordExperience, PassesFieldsThrough) {
  auto r = record_experience("q1", "What is 2+2?", ok_result("4", 1.2, Route::LLM), ok_result("4", 80.0, Route::Agent),
                             "MMLU");
  EXPECT_EQ(r.id, "q1");
  EXPECT_EQ(r.question, "What is 2+2?");
  EXPECT_DOUBLE_EQ(r.llm_latency_s, 1.2);
  EXPECT_DOUBLE_EQ(r.agent_latency_s, 80.0);
  EXPECT_EQ(r.llm_answer, "4");
  EXPECT_EQ(r.source, "MMLU");
  ASSERT_TRUE(r.created_at.has_value());
  EXPECT_EQ(r.created_at->size(), 20u);
}

TEST(RecordExperience, RejectsEmptyQuestion) {
  EXPECT_EQ(code_of([] {
              record_experience("q", "", ok_result("4", 1, Route::LLM), ok_result("4", 2, Route::Agent));
            }),
            ErrorCode::EmptyQuestion);
  EXPECT_EQ(code_of([] {
              record_experience("q", "  \n\t", ok_result("4", 1, Route::LLM), ok_result("4", 2, Route::Agent));
            }),
            ErrorCode::EmptyQuestion);
}

TEST(RecordExperience, RejectsNonPositiveLatency) {
  EXPECT_EQ(code_of([] {
              record_experience("q", "x?", ok_result("x", 0.0, Route::LLM), ok_result("x", 2, Route::Agent));
            }),
            ErrorCode::NonPositiveLatency);
  EXPECT_EQ(code_of([] {
              record_experience("q", "x?", ok_result("x", 1.0, Route::LLM), ok_result("x", -3, Route::Agent));
            }),
            ErrorCode::NonPositiveLatency);
}

TEST(RecordExperience, RejectsFailedSolver) {
  SolverResult failed = ok_result("", 0.5, Route::Agent);
  failed.error = SolverFailure{ErrorCode::Timeout, "agent timed out"};
  EXPECT_EQ(code_of([&] { record_experience("q", "x?", ok_result("x", 1, Route::LLM), failed); }),
            ErrorCode::InvalidInput);
}

TEST(AppendRecord, GrowsAndPreservesOrder) {
  Memory empty;
  auto one = append_record(empty, make_record("r1", "first"));
  EXPECT_EQ(empty.size(), 0u);
  ASSERT_EQ(one.size(), 1u);
  auto two = append_record(one, make_record("r2", "second"));
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].id, "r1");
  EXPECT_EQ(two[1].id, "r2");
  EXPECT_EQ(code_of([&] { append_record(one, make_record("r1", "again")); }), ErrorCode::DuplicateId);
}

TEST(AppendRecord, SizeEqualsNumberOfAppends) {
  Memory m;
  for (std::size_t k = 1; k <= 50; ++k) {
    m = append_record(std::move(m), make_record(auto_record_id(k), "q" + std::to_string(k)));
    EXPECT_EQ(m.size(), k);
  }
  EXPECT_EQ(auto_record_id(7), "exp-000007");
}

TEST(LoadMemory, ThreeValidLines) {
  TempDir dir;
  std::string text;
  for (int i = 0; i < 3; ++i) {
    auto obj = nlohmann::json::parse(kValidLine);
    obj["id"] = "q" + std::to_string(i);
    text += obj.dump() + "\n";
  }
  write_file(dir / "m.jsonl", text + "\n");
  EXPECT_EQ(load_memory(dir / "m.jsonl").size(), 3u);
}

TEST(LoadMemory, MissingKeyReportsLineNumber) {
  TempDir dir;
  auto obj = nlohmann::json::parse(kValidLine);
  obj["id"] = "q2";
  obj.erase("agent_latency_s");
  write_file(dir / "m.jsonl", std::string(kValidLine) + "\n" + obj.dump() + "\n");
  try {
    load_memory(dir / "m.jsonl");
    FAIL() << "expected MalformedLine";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedLine);
    ASSERT_TRUE(e.line_no.has_value());
    EXPECT_EQ(*e.line_no, 2u);
  }
}

TEST(LoadMemory, DuplicateIds) {
  TempDir dir;
  auto obj = nlohmann::json::parse(kValidLine);
  obj["id"] = "q7";
  write_file(dir / "m.jsonl", obj.dump() + "\n" + obj.dump() + "\n");
  EXPECT_EQ(code_of([&] { load_memory(dir / "m.jsonl"); }), ErrorCode::DuplicateId);
}

TEST(LoadMemory, MissingFileAndBadJson) {
  TempDir dir;
  EXPECT_EQ(code_of([&] { load_memory(dir / "absent.jsonl"); }), ErrorCode::FileNotFound);
  write_file(dir / "bad.jsonl", "{not json}\n");
  EXPECT_EQ(code_of([&] { load_memory(dir / "bad.jsonl"); }), ErrorCode::MalformedLine);
  write_file(dir / "type.jsonl",
             R"({"id":"a","question":"q","llm_answer":"x","llm_latency_s":"fast","agent_answer":"y","agent_latency_s":1})"
             "\n");
  EXPECT_EQ(code_of([&] { load_memory(dir / "type.jsonl"); }), ErrorCode::MalformedLine);
}

TEST(LoadMemory, UnknownKeysStrictVersusLenient) {
  TempDir dir;
  auto obj = nlohmann::json::parse(kValidLine);
  obj["extra"] = 1;
  write_file(dir / "m.jsonl", obj.dump() + "\n");

  std::vector<std::string> warnings;
  MemoryLoadOptions lenient;
  lenient.warn = [&](const std::string& w) { warnings.push_back(w); };
  EXPECT_EQ(load_memory(dir / "m.jsonl", lenient).size(), 1u);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("extra"), std::string::npos);

  MemoryLoadOptions strict;
  strict.strict = true;
  EXPECT_EQ(code_of([&] { load_memory(dir / "m.jsonl", strict); }), ErrorCode::MalformedLine);
}

TEST(LoadMemory, RejectsInvalidRecordContents) {
  TempDir dir;
  auto obj = nlohmann::json::parse(kValidLine);
  obj["llm_latency_s"] = 0;
  write_file(dir / "m.jsonl", obj.dump() + "\n");
  EXPECT_EQ(code_of([&] { load_memory(dir / "m.jsonl"); }), ErrorCode::NonPositiveLatency);
}

TEST(MemoryStats, MeansAndSources) {
  Memory m;
  auto a = make_record("a", "qa", 1.0, 10.0);
  a.source = "GAIA";
  auto b = make_record("b", "qb", 3.0, 30.0);
  b.source = "GAIA";
  auto c = make_record("c", "qc", 2.0, 20.0);
  c.source = "MMLU";
  m.append(a);
  m.append(b);
  auto two = memory_stats(m);
  EXPECT_DOUBLE_EQ(*two.mean_llm_latency_s, 2.0);
  EXPECT_DOUBLE_EQ(*two.mean_agent_latency_s, 20.0);
  m.append(c);
  auto three = memory_stats(m);
  EXPECT_EQ(three.count, 3u);
  EXPECT_EQ(three.per_source, (std::map<std::string, std::size_t>{{"GAIA", 2}, {"MMLU", 1}}));
  EXPECT_EQ(m.sources(), (std::vector<std::string>{"GAIA", "MMLU"}));
}

TEST(MemoryStats, EmptyMemory) {
  auto s = memory_stats(Memory{});
  EXPECT_EQ(s.count, 0u);
  EXPECT_FALSE(s.mean_llm_latency_s.has_value());
  EXPECT_FALSE(s.mean_agent_latency_s.has_value());
  EXPECT_TRUE(s.per_source.empty());
}

TEST(MemoryRoundTrip, EmptyAndLarge) {
  TempDir dir;
  save_memory(Memory{}, dir / "empty.jsonl");
  EXPECT_EQ(load_memory(dir / "empty.jsonl"), Memory{});

  std::mt19937_64 rng(17);
  for (std::size_t n : {1u, 2u, 10u, 250u, 1000u}) {
    Memory m = routegate::testing::random_memory(rng, n, true);
    save_memory(m, dir / "m.jsonl");
    Memory back = load_memory(dir / "m.jsonl");
    ASSERT_EQ(back.size(), n);
    EXPECT_EQ(back, m);
  }
}

TEST(MemoryRoundTrip, ExoticLatenciesSurvive) {
  TempDir dir;
  Memory m;
  m.append(make_record("tiny", "q1", 1e-9, 5e-324));
  m.append(make_record("odd", "q2", 0.1 + 0.2, 123456.789012345678));
  save_memory(m, dir / "m.jsonl");
  EXPECT_EQ(load_memory(dir / "m.jsonl"), m);
}

TEST(MemorySerialization, NoGoldLabelKeys) {
  std::mt19937_64 rng(5);
  Memory m = routegate::testing::random_memory(rng, 100, false);
  for (const auto& r : m.records()) {
    auto obj = nlohmann::json::parse(serialize_record(r));
    for (const char* banned : {"gold", "label", "correct", "reward"}) EXPECT_FALSE(obj.contains(banned));
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      const std::set<std::string> allowed = {"id",           "question",        "llm_answer", "llm_latency_s",
                                             "agent_answer", "agent_latency_s", "source",     "created_at"};
      EXPECT_TRUE(allowed.count(it.key())) << it.key();
    }
  }
}

TEST(MemorySerialization, OneObjectPerLine) {
  TempDir dir;
  Memory m;
  auto r = make_record("nl", "line one\nline two");
  r.agent_answer = "multi\nline\r\nanswer";
  m.append(r);
  save_memory(m, dir / "m.jsonl");
  const std::string text = read_file(dir / "m.jsonl");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
}
