#include "routegate/experience_memory.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>

namespace routegate {

using nlohmann::json;

namespace {

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

bool valid_latency(double v) { return std::isfinite(v) && v > 0.0; }

constexpr std::string_view kRequiredKeys[] = {"id",           "question",      "llm_answer",
                                              "llm_latency_s", "agent_answer", "agent_latency_s"};
constexpr std::string_view kOptionalKeys[] = {"source", "created_at"};

[[noreturn]] void malformed(std::size_t line_no, const std::string& why) {
  Error err(ErrorCode::MalformedLine, fmt::format("line {}: {}", line_no, why));
  err.line_no = line_no;
  throw err;
}

}  // namespace

void validate_record(const ExperienceRecord& record) {
  if (record.id.empty()) fail(ErrorCode::InvalidInput, "record id is empty");
  if (is_blank(record.question))
    fail(ErrorCode::EmptyQuestion, fmt::format("record '{}' has an empty question", record.id));
  if (!valid_latency(record.llm_latency_s) || !valid_latency(record.agent_latency_s))
    fail(ErrorCode::NonPositiveLatency,
         fmt::format("record '{}' latencies must be finite and > 0 (llm={}, agent={})", record.id,
                     record.llm_latency_s, record.agent_latency_s));
}

std::string auto_record_id(std::size_t index) { return fmt::format("exp-{:06d}", index); }

bool Memory::contains(std::string_view id) const { return find(id) != nullptr; }

const ExperienceRecord* Memory::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &records_[it->second];
}

std::vector<std::string> Memory::sources() const {
  std::set<std::string> tags;
  for (const auto& r : records_)
    if (r.source) tags.insert(*r.source);
  return {tags.begin(), tags.end()};
}

void Memory::append(ExperienceRecord record) {
  validate_record(record);
  if (by_id_.count(record.id))
    fail(ErrorCode::DuplicateId, fmt::format("id '{}' already present in memory", record.id));
  by_id_.emplace(record.id, records_.size());
  records_.push_back(std::move(record));
}

ExperienceRecord record_experience(std::string id, std::string question,
                                   const SolverResult& llm_result,
                                   const SolverResult& agent_result,
                                   std::optional<std::string> source) {
  if (is_blank(question)) fail(ErrorCode::EmptyQuestion, "question is empty");
  for (const SolverResult* r : {&llm_result, &agent_result}) {
    if (!valid_latency(r->latency_s))
      fail(ErrorCode::NonPositiveLatency,
           fmt::format("{} latency must be finite and > 0, got {}", to_string(r->solver),
                       r->latency_s));
    if (!r->ok())
      fail(ErrorCode::InvalidInput,
           fmt::format("{} solver failed: {}", to_string(r->solver), r->error->message));
  }
  ExperienceRecord record;
  record.id = std::move(id);
  record.question = std::move(question);
  record.llm_answer = llm_result.answer;
  record.llm_latency_s = llm_result.latency_s;
  record.agent_answer = agent_result.answer;
  record.agent_latency_s = agent_result.latency_s;
  record.source = std::move(source);
  record.created_at = utc_timestamp_now();
  validate_record(record);
  return record;
}

Memory append_record(Memory memory, ExperienceRecord record) {
  memory.append(std::move(record));
  return memory;
}

ExperienceRecord parse_record_line(std::string_view line, std::size_t line_no,
                                   const MemoryLoadOptions& options) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    malformed(line_no, fmt::format("invalid JSON ({})", e.what()));
  }
  if (!obj.is_object()) malformed(line_no, "expected a JSON object");

  for (const auto& [key, _] : obj.items()) {
    const bool known =
        std::find(std::begin(kRequiredKeys), std::end(kRequiredKeys), key) != std::end(kRequiredKeys) ||
        std::find(std::begin(kOptionalKeys), std::end(kOptionalKeys), key) != std::end(kOptionalKeys);
    if (known) continue;
    if (options.strict) malformed(line_no, fmt::format("unknown key '{}'", key));
    if (options.warn) options.warn(fmt::format("line {}: ignoring unknown key '{}'", line_no, key));
  }

  auto text = [&](std::string_view key) -> std::string {
    auto it = obj.find(std::string(key));
    if (it == obj.end()) malformed(line_no, fmt::format("missing key '{}'", key));
    if (!it->is_string()) malformed(line_no, fmt::format("key '{}' must be a string", key));
    return it->get<std::string>();
  };
  auto number = [&](std::string_view key) -> double {
    auto it = obj.find(std::string(key));
    if (it == obj.end()) malformed(line_no, fmt::format("missing key '{}'", key));
    if (!it->is_number()) malformed(line_no, fmt::format("key '{}' must be a number", key));
    return it->get<double>();
  };
  auto optional_text = [&](std::string_view key) -> std::optional<std::string> {
    auto it = obj.find(std::string(key));
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) malformed(line_no, fmt::format("key '{}' must be a string", key));
    return it->get<std::string>();
  };

  ExperienceRecord r;
  r.id = text("id");
  r.question = text("question");
  r.llm_answer = text("llm_answer");
  r.llm_latency_s = number("llm_latency_s");
  r.agent_answer = text("agent_answer");
  r.agent_latency_s = number("agent_latency_s");
  r.source = optional_text("source");
  r.created_at = optional_text("created_at");
  if (r.id.empty()) malformed(line_no, "id is empty");
  return r;
}

std::string serialize_record(const ExperienceRecord& r) {
  json obj = {{"id", r.id},
              {"question", r.question},
              {"llm_answer", r.llm_answer},
              {"llm_latency_s", r.llm_latency_s},
              {"agent_answer", r.agent_answer},
              {"agent_latency_s", r.agent_latency_s}};
  if (r.source) obj["source"] = *r.source;
  if (r.created_at) obj["created_at"] = *r.created_at;
  return obj.dump();
}

Memory load_memory(const std::filesystem::path& path, const MemoryLoadOptions& options) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::FileNotFound, fmt::format("cannot open memory file '{}'", path.string()));

  Memory memory;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    ExperienceRecord record = parse_record_line(line, line_no, options);
    try {
      memory.append(std::move(record));
    } catch (Error& e) {
      Error located(e.code(), fmt::format("line {}: {}", line_no, e.what()));
      located.line_no = line_no;
      throw located;
    }
  }
  memory.set_built_at(utc_timestamp_now());
  return memory;
}

void save_memory(const Memory& memory, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, fmt::format("cannot write memory file '{}'", path.string()));
  for (const auto& r : memory.records()) out << serialize_record(r) << '\n';
  if (!out) fail(ErrorCode::IoError, fmt::format("write to '{}' failed", path.string()));
}

MemoryStats memory_stats(const Memory& memory) {
  MemoryStats stats;
  stats.count = memory.size();
  if (memory.empty()) return stats;
  double llm = 0.0, agent = 0.0;
  for (const auto& r : memory.records()) {
    llm += r.llm_latency_s;
    agent += r.agent_latency_s;
    if (r.source) ++stats.per_source[*r.source];
  }
  stats.mean_llm_latency_s = llm / static_cast<double>(memory.size());
  stats.mean_agent_latency_s = agent / static_cast<double>(memory.size());
  return stats;
}

std::string utc_timestamp_now() {
  auto now = std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(now)));
}

}  // namespace routegate
