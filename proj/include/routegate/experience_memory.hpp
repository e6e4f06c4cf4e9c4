#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "routegate/types.hpp"

namespace routegate {

/// What both solvers did on one seed question. Deliberately carries no gold
/// answer, correctness flag or reward: only what is observable at deployment.
struct ExperienceRecord {
  std::string id;
  std::string question;
  std::string llm_answer;
  double llm_latency_s = 0.0;
  std::string agent_answer;
  double agent_latency_s = 0.0;
  std::optional<std::string> source;
  std::optional<std::string> created_at;

  bool operator==(const ExperienceRecord&) const = default;
};

/// Throws EmptyQuestion / NonPositiveLatency / InvalidInput (empty id).
void validate_record(const ExperienceRecord& record);

/// "exp-000042" style ids for records whose caller supplied none.
std::string auto_record_id(std::size_t index);

/// Append-only collection of experience records with unique ids.
class Memory {
 public:
  Memory() = default;

  std::span<const ExperienceRecord> records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const ExperienceRecord& operator[](std::size_t i) const { return records_[i]; }

  bool contains(std::string_view id) const;
  const ExperienceRecord* find(std::string_view id) const;

  /// Distinct source tags, sorted.
  std::vector<std::string> sources() const;

  const std::string& built_at() const { return built_at_; }
  void set_built_at(std::string timestamp) { built_at_ = std::move(timestamp); }

  /// Validates the record and appends it. Throws DuplicateId.
  void append(ExperienceRecord record);

  friend bool operator==(const Memory& a, const Memory& b) { return a.records_ == b.records_; }

 private:
  std::vector<ExperienceRecord> records_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::string built_at_;
};

ExperienceRecord record_experience(std::string id, std::string question,
                                   const SolverResult& llm_result,
                                   const SolverResult& agent_result,
                                   std::optional<std::string> source = std::nullopt);

Memory append_record(Memory memory, ExperienceRecord record);

struct MemoryLoadOptions {
  // Unknown keys are errors when strict, otherwise reported through warn.
  bool strict = false;
  std::function<void(const std::string&)> warn;
};

Memory load_memory(const std::filesystem::path& path, const MemoryLoadOptions& options = {});
void save_memory(const Memory& memory, const std::filesystem::path& path);

/// Parses a single memory line. line_no is only used for error reporting.
ExperienceRecord parse_record_line(std::string_view line, std::size_t line_no,
                                   const MemoryLoadOptions& options = {});
std::string serialize_record(const ExperienceRecord& record);

struct MemoryStats {
  std::size_t count = 0;
  std::optional<double> mean_llm_latency_s;
  std::optional<double> mean_agent_latency_s;
  std::map<std::string, std::size_t> per_source;
};

MemoryStats memory_stats(const Memory& memory);

/// UTC "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_timestamp_now();

}  // namespace routegate
