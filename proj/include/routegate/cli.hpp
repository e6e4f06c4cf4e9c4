#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "routegate/backends.hpp"
#include "routegate/config.hpp"
#include "routegate/routebench_eval.hpp"

namespace routegate::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kInputError = 2,
  kUpstreamError = 3,
};

int exit_code_for(const Error& error);

struct SeedSummary {
  std::size_t processed = 0;
  std::size_t failed = 0;
};

/// Runs both solvers on every question ({"id"?, "question", "source"?} per
/// line), writes the resulting memory and returns the tally. Questions where
/// either solver fails are skipped and reported on `log`.
SeedSummary run_seed(const std::filesystem::path& questions, const std::filesystem::path& output,
                     CompletionBackend& llm, AgentBackend& agent, std::size_t max_inflight, std::ostream& log);

struct LoadedCorpus {
  std::shared_ptr<const Memory> memory;
  std::shared_ptr<const Index> index;
};

/// Loads memory.path and either the cached index (when it still matches) or
/// a fresh one. With `required`, a missing memory raises IndexMissing.
LoadedCorpus load_corpus(const AppConfig& config, bool required, std::ostream& log);

struct EvalRun {
  std::vector<SetReport> sets;
  TradeoffSummary tradeoffs;
  double overall = 0.0;
  nlohmann::json report;
};

EvalRun run_eval(const std::vector<BenchInstance>& bench, const Router& router, const AppConfig& config);

void print_eval_table(const EvalRun& run, std::ostream& out);

/// One line of a score-only file: either four F1 values or a precomputed set score.
struct ScoreRow {
  std::string model;
  EvalSet set = EvalSet::Base;
  // llm_gaia, agent_gaia, llm_mmlu, agent_mmlu
  std::optional<std::array<double, 4>> f1;
  std::optional<double> score;
};

struct ModelScore {
  std::string model;
  std::map<EvalSet, double> set_scores;
  double overall = 0.0;
};

std::vector<ScoreRow> load_score_rows(const std::filesystem::path& path);
/// Ranked by full-precision overall score, descending.
std::vector<ModelScore> compute_scores(const std::vector<ScoreRow>& rows);
void print_score_table(const std::vector<ModelScore>& scores, std::ostream& out);

/// Full command-line entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace routegate::cli
