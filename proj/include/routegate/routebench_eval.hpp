#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "routegate/routing_engine.hpp"
#include "routegate/types.hpp"

namespace routegate {

enum class EvalSet { Base, Rephrase, Advanced };
enum class TaskSource { GAIA, MMLU };

std::string_view to_string(EvalSet set);
std::string_view to_string(TaskSource source);
std::optional<EvalSet> parse_eval_set(std::string_view text);
std::optional<TaskSource> parse_task_source(std::string_view text);

/// Question, both solver answers and latencies, gold answer, and the
/// (optional, human-assigned) routing label.
struct BenchInstance {
  std::string id;
  EvalSet set = EvalSet::Base;
  TaskSource source = TaskSource::MMLU;
  std::string question;
  std::string gold_answer;
  std::string llm_answer;
  double llm_latency_s = 0.0;
  std::string agent_answer;
  double agent_latency_s = 0.0;
  std::optional<Route> label;
};

BenchInstance parse_bench_line(std::string_view line, std::size_t line_no);
std::string serialize_bench_instance(const BenchInstance& instance);
/// Throws FileNotFound, MalformedLine, DuplicateId, NonPositiveLatency.
std::vector<BenchInstance> load_bench(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Correctness and labels

using Judge = std::function<bool(std::string_view prediction, std::string_view gold)>;

/// Trim, ASCII casefold, collapse whitespace, drop trailing punctuation and a
/// leading article.
std::string normalize_answer(std::string_view text);

/// Normalized exact match; a bare option letter also matches "(X)"-prefixed gold.
bool judge_correct(std::string_view prediction, std::string_view gold);

/// Correctness first; if both are right the faster one (ties go to the LLM);
/// if both are wrong the agent. Throws NonPositiveLatency.
Route label_instance(bool llm_correct, bool agent_correct, double t_llm, double t_agent);

Route derive_label(const BenchInstance& instance, const Judge& judge = judge_correct);

// ---------------------------------------------------------------------------
// Metrics. Class A is Route::LLM, class B is Route::Agent.

double routing_accuracy(std::span<const Route> predictions, std::span<const Route> labels);

/// Cells are counted independently; fp_a == fn_b and fp_b == fn_a are
/// identities of the counting, not assumptions of it.
struct ConfusionCounts {
  std::size_t tot_a = 0, tot_b = 0;
  std::size_t tp_a = 0, tp_b = 0;
  std::size_t fp_a = 0, fn_a = 0;
  std::size_t fp_b = 0, fn_b = 0;

  std::size_t total() const { return tot_a + tot_b; }
  bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion_counts(std::span<const Route> predictions, std::span<const Route> labels);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Zero denominators yield 0 rather than NaN.
Prf prf_for_class(const ConfusionCounts& counts, Route cls);

/// Mean of the four solver-by-source F1 values. Throws OutOfRange.
double routebench_score(double f1_llm_gaia, double f1_agent_gaia, double f1_llm_mmlu, double f1_agent_mmlu);

/// Mean of per-set scores (the overall model score). Throws EmptyInput/OutOfRange.
double overall_score(std::span<const double> set_scores);

/// Decimal half-up rounding for display, immune to binary noise such as
/// 0.8325 being stored as 0.83249999999999991.
std::string format_fixed(double value, int digits);

// ---------------------------------------------------------------------------
// Accuracy / latency trade-offs

struct SystemPoint {
  double accuracy = 0.0;
  double mean_latency_s = 0.0;
};

struct SetTradeoffInput {
  std::string set_name;
  std::optional<SystemPoint> llm_only;
  std::optional<SystemPoint> agent_only;
  std::optional<SystemPoint> routed;
};

/// All values are fractions (0.286 means 28.6 %), except the speed ratio.
struct TradeoffMetrics {
  double routed_accuracy_gain_vs_llm = 0.0;   // routed / llm - 1
  double routed_accuracy_drop_vs_agent = 0.0; // 1 - routed / agent
  double routed_time_reduction_vs_agent = 0.0; // 1 - t_routed / t_agent
  double agent_accuracy_gain_vs_llm = 0.0;    // agent / llm - 1
  double agent_llm_time_ratio = 0.0;          // t_agent / t_llm
};

struct TradeoffSummary {
  std::vector<std::pair<std::string, TradeoffMetrics>> per_set;
  // Average of the per-set metrics.
  TradeoffMetrics mean_of_set_ratios;
  // Metrics of the per-system means across sets.
  TradeoffMetrics ratio_of_pooled_means;
};

TradeoffMetrics tradeoff_metrics(const SystemPoint& llm, const SystemPoint& agent, const SystemPoint& routed);

/// Throws EmptyInput, MissingSystem.
TradeoffSummary aggregate_tradeoffs(std::span<const SetTradeoffInput> sets);

// ---------------------------------------------------------------------------
// Set-level evaluation

struct InstanceOutcome {
  std::string id;
  TaskSource source = TaskSource::MMLU;
  Route label = Route::Agent;
  Route predicted = Route::Agent;
  bool fallback_used = false;
  bool executed_correct = false;
  double executed_latency_s = 0.0;
};

struct SourceReport {
  std::size_t count = 0;
  ConfusionCounts counts;
  Prf llm;
  Prf agent;
  double routing_accuracy = 0.0;
  SystemPoint routed;
  SystemPoint llm_only;
  SystemPoint agent_only;
};

struct SetReport {
  EvalSet set = EvalSet::Base;
  std::size_t count = 0;
  double routing_accuracy = 0.0;
  ConfusionCounts counts;
  Prf llm;
  Prf agent;
  std::map<TaskSource, SourceReport> per_source;
  double score = 0.0;
  SystemPoint routed;
  SystemPoint llm_only;
  SystemPoint agent_only;
  std::size_t fallback_count = 0;
  // Pre-labeled instances whose label differs from the recomputed one.
  std::vector<std::string> label_disagreements;
  std::vector<InstanceOutcome> outcomes;
};

struct EvalOptions {
  Judge judge = judge_correct;
  std::size_t max_inflight = 1;
  bool verify_labels = true;
};

/// Builds a report from already-made routing predictions (one per instance).
SetReport score_predictions(std::span<const BenchInstance> instances, std::span<const Route> predictions,
                            const std::vector<bool>& fallback_used, const EvalOptions& options = {});

/// Routes every instance and scores the decisions. Throws EmptyInput, and
/// propagates routing errors such as BackendUnavailable.
SetReport evaluate_set(std::span<const BenchInstance> instances, const Router& router,
                       const EvalOptions& options = {});

/// Splits a bench by evaluation set (base, rephrase, advanced order) and
/// evaluates each non-empty set.
std::vector<SetReport> evaluate_bench(std::span<const BenchInstance> instances, const Router& router,
                                      const EvalOptions& options = {});

SetTradeoffInput tradeoff_input(const SetReport& report);

nlohmann::json to_json(const ConfusionCounts& counts);
nlohmann::json to_json(const Prf& prf);
nlohmann::json to_json(const SetReport& report);
nlohmann::json to_json(const TradeoffMetrics& metrics);
nlohmann::json to_json(const TradeoffSummary& summary);

}  // namespace routegate
