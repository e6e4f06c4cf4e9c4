#include "routegate/routebench_eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>

#include <fmt/format.h>

#include "parallel.hpp"

namespace routegate {

using nlohmann::json;

namespace {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
  return out;
}

bool valid_latency(double v) { return std::isfinite(v) && v > 0.0; }

[[noreturn]] void malformed(std::size_t line_no, const std::string& why) {
  Error err(ErrorCode::MalformedLine, fmt::format("line {}: {}", line_no, why));
  err.line_no = line_no;
  throw err;
}

std::string collapse(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : c;
  }
  return out;
}

std::optional<char> option_letter(const std::string& collapsed) {
  static const std::regex kParenthesized(R"(^\(([a-z])\)(\s.*)?$)");
  static const std::regex kBare(R"(^([a-z])[.)]?$)");
  static const std::regex kClosing(R"(^([a-z])\)\s.*$)");
  std::smatch m;
  if (std::regex_match(collapsed, m, kParenthesized) || std::regex_match(collapsed, m, kBare) ||
      std::regex_match(collapsed, m, kClosing))
    return m[1].str()[0];
  return std::nullopt;
}

double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

SystemPoint mean_point(std::span<const SystemPoint> points) {
  SystemPoint out;
  for (const auto& p : points) {
    out.accuracy += p.accuracy;
    out.mean_latency_s += p.mean_latency_s;
  }
  out.accuracy /= static_cast<double>(points.size());
  out.mean_latency_s /= static_cast<double>(points.size());
  return out;
}

}  // namespace

std::string_view to_string(EvalSet set) {
  switch (set) {
    case EvalSet::Base: return "base";
    case EvalSet::Rephrase: return "rephrase";
    case EvalSet::Advanced: return "advanced";
  }
  return "unknown";
}

std::string_view to_string(TaskSource source) { return source == TaskSource::GAIA ? "GAIA" : "MMLU"; }

std::optional<EvalSet> parse_eval_set(std::string_view text) {
  const std::string s = ascii_lower(text);
  if (s == "base") return EvalSet::Base;
  if (s == "rephrase") return EvalSet::Rephrase;
  if (s == "advanced") return EvalSet::Advanced;
  return std::nullopt;
}

std::optional<TaskSource> parse_task_source(std::string_view text) {
  const std::string s = ascii_lower(text);
  if (s == "gaia") return TaskSource::GAIA;
  if (s == "mmlu") return TaskSource::MMLU;
  return std::nullopt;
}

BenchInstance parse_bench_line(std::string_view line, std::size_t line_no) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    malformed(line_no, fmt::format("invalid JSON ({})", e.what()));
  }
  if (!obj.is_object()) malformed(line_no, "expected a JSON object");

  auto text = [&](const char* key) -> std::string {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) malformed(line_no, fmt::format("'{}' must be a string", key));
    return it->get<std::string>();
  };
  auto number = [&](const char* key) -> double {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_number()) malformed(line_no, fmt::format("'{}' must be a number", key));
    return it->get<double>();
  };

  BenchInstance b;
  b.id = text("id");
  if (b.id.empty()) malformed(line_no, "id is empty");
  auto set = parse_eval_set(text("set"));
  if (!set) malformed(line_no, "'set' must be one of base, rephrase, advanced");
  b.set = *set;
  auto source = parse_task_source(text("source"));
  if (!source) malformed(line_no, "'source' must be GAIA or MMLU");
  b.source = *source;
  b.question = text("question");
  b.gold_answer = text("gold_answer");
  b.llm_answer = text("llm_answer");
  b.llm_latency_s = number("llm_latency_s");
  b.agent_answer = text("agent_answer");
  b.agent_latency_s = number("agent_latency_s");
  if (auto it = obj.find("label"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) malformed(line_no, "'label' must be \"LLM\" or \"Agent\"");
    auto route = parse_route(it->get<std::string>());
    if (!route) malformed(line_no, "'label' must be \"LLM\" or \"Agent\"");
    b.label = route;
  }
  if (!valid_latency(b.llm_latency_s) || !valid_latency(b.agent_latency_s)) {
    Error err(ErrorCode::NonPositiveLatency, fmt::format("line {}: latencies must be finite and > 0", line_no));
    err.line_no = line_no;
    throw err;
  }
  return b;
}

std::string serialize_bench_instance(const BenchInstance& b) {
  json obj = {{"id", b.id},
              {"set", to_string(b.set)},
              {"source", to_string(b.source)},
              {"question", b.question},
              {"gold_answer", b.gold_answer},
              {"llm_answer", b.llm_answer},
              {"llm_latency_s", b.llm_latency_s},
              {"agent_answer", b.agent_answer},
              {"agent_latency_s", b.agent_latency_s}};
  if (b.label) obj["label"] = to_string(*b.label);
  return obj.dump();
}

std::vector<BenchInstance> load_bench(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::FileNotFound, fmt::format("cannot open bench file '{}'", path.string()));
  std::vector<BenchInstance> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    BenchInstance b = parse_bench_line(line, line_no);
    if (!ids.insert(b.id).second) {
      Error err(ErrorCode::DuplicateId, fmt::format("line {}: duplicate instance id '{}'", line_no, b.id));
      err.line_no = line_no;
      throw err;
    }
    out.push_back(std::move(b));
  }
  return out;
}

std::string normalize_answer(std::string_view text) {
  std::string s = collapse(text);
  while (!s.empty() && std::string_view(".,!?;:").find(s.back()) != std::string_view::npos) {
    s.pop_back();
    while (!s.empty() && s.back() == ' ') s.pop_back();
  }
  for (std::string_view article : {"the ", "an ", "a "}) {
    if (s.size() > article.size() && s.compare(0, article.size(), article) == 0) {
      s.erase(0, article.size());
      break;
    }
  }
  return s;
}

bool judge_correct(std::string_view prediction, std::string_view gold) {
  if (normalize_answer(prediction) == normalize_answer(gold)) return true;
  auto pred_letter = option_letter(collapse(prediction));
  auto gold_letter = option_letter(collapse(gold));
  return pred_letter && gold_letter && *pred_letter == *gold_letter;
}

Route label_instance(bool llm_correct, bool agent_correct, double t_llm, double t_agent) {
  if (!valid_latency(t_llm) || !valid_latency(t_agent))
    fail(ErrorCode::NonPositiveLatency, fmt::format("latencies must be finite and > 0 (llm={}, agent={})", t_llm, t_agent));
  if (llm_correct && !agent_correct) return Route::LLM;
  if (agent_correct && !llm_correct) return Route::Agent;
  if (llm_correct && agent_correct) return t_llm <= t_agent ? Route::LLM : Route::Agent;
  return Route::Agent;
}

Route derive_label(const BenchInstance& b, const Judge& judge) {
  return label_instance(judge(b.llm_answer, b.gold_answer), judge(b.agent_answer, b.gold_answer), b.llm_latency_s,
                        b.agent_latency_s);
}

double routing_accuracy(std::span<const Route> predictions, std::span<const Route> labels) {
  if (predictions.size() != labels.size())
    fail(ErrorCode::LengthMismatch, fmt::format("{} predictions vs {} labels", predictions.size(), labels.size()));
  if (predictions.empty()) fail(ErrorCode::EmptyInput, "no predictions to score");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

ConfusionCounts confusion_counts(std::span<const Route> predictions, std::span<const Route> labels) {
  if (predictions.size() != labels.size())
    fail(ErrorCode::LengthMismatch, fmt::format("{} predictions vs {} labels", predictions.size(), labels.size()));
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool label_a = labels[i] == Route::LLM;
    const bool pred_a = predictions[i] == Route::LLM;
    if (label_a) ++c.tot_a; else ++c.tot_b;
    if (label_a && pred_a) ++c.tp_a;
    if (!label_a && !pred_a) ++c.tp_b;
    if (!label_a && pred_a) ++c.fp_a;
    if (label_a && !pred_a) ++c.fn_a;
    if (label_a && !pred_a) ++c.fp_b;
    if (!label_a && pred_a) ++c.fn_b;
  }
  return c;
}

Prf prf_for_class(const ConfusionCounts& c, Route cls) {
  const double tp = static_cast<double>(cls == Route::LLM ? c.tp_a : c.tp_b);
  const double fp = static_cast<double>(cls == Route::LLM ? c.fp_a : c.fp_b);
  const double fn = static_cast<double>(cls == Route::LLM ? c.fn_a : c.fn_b);
  Prf out;
  out.precision = safe_ratio(tp, tp + fp);
  out.recall = safe_ratio(tp, tp + fn);
  out.f1 = safe_ratio(2.0 * out.precision * out.recall, out.precision + out.recall);
  return out;
}

double routebench_score(double f1_llm_gaia, double f1_agent_gaia, double f1_llm_mmlu, double f1_agent_mmlu) {
  const double values[] = {f1_llm_gaia, f1_agent_gaia, f1_llm_mmlu, f1_agent_mmlu};
  for (double v : values)
    if (!(v >= 0.0 && v <= 1.0)) fail(ErrorCode::OutOfRange, fmt::format("F1 value {} is outside [0, 1]", v));
  return (f1_llm_gaia + f1_agent_gaia + f1_llm_mmlu + f1_agent_mmlu) / 4.0;
}

double overall_score(std::span<const double> set_scores) {
  if (set_scores.empty()) fail(ErrorCode::EmptyInput, "no set scores to average");
  double sum = 0.0;
  for (double v : set_scores) {
    if (!(v >= 0.0 && v <= 1.0)) fail(ErrorCode::OutOfRange, fmt::format("set score {} is outside [0, 1]", v));
    sum += v;
  }
  return sum / static_cast<double>(set_scores.size());
}

std::string format_fixed(double value, int digits) {
  if (!std::isfinite(value)) return fmt::format("{}", value);
  digits = std::clamp(digits, 0, 9);
  // Snap to 9 decimals first, then round half away from zero in integers.
  const long long nano = std::llround(std::fabs(value) * 1e9);
  long long divisor = 1;
  for (int i = 0; i < 9 - digits; ++i) divisor *= 10;
  const long long scaled = (nano + divisor / 2) / divisor;
  long long unit = 1;
  for (int i = 0; i < digits; ++i) unit *= 10;
  const char* sign = (value < 0 && scaled != 0) ? "-" : "";
  if (digits == 0) return fmt::format("{}{}", sign, scaled);
  return fmt::format("{}{}.{:0{}d}", sign, scaled / unit, scaled % unit, digits);
}

TradeoffMetrics tradeoff_metrics(const SystemPoint& llm, const SystemPoint& agent, const SystemPoint& routed) {
  TradeoffMetrics m;
  m.routed_accuracy_gain_vs_llm = safe_ratio(routed.accuracy, llm.accuracy) - 1.0;
  m.routed_accuracy_drop_vs_agent = 1.0 - safe_ratio(routed.accuracy, agent.accuracy);
  m.routed_time_reduction_vs_agent = 1.0 - safe_ratio(routed.mean_latency_s, agent.mean_latency_s);
  m.agent_accuracy_gain_vs_llm = safe_ratio(agent.accuracy, llm.accuracy) - 1.0;
  m.agent_llm_time_ratio = safe_ratio(agent.mean_latency_s, llm.mean_latency_s);
  return m;
}

TradeoffSummary aggregate_tradeoffs(std::span<const SetTradeoffInput> sets) {
  if (sets.empty()) fail(ErrorCode::EmptyInput, "no sets to aggregate");
  TradeoffSummary summary;
  std::vector<SystemPoint> llm, agent, routed;
  for (const auto& s : sets) {
    if (!s.llm_only || !s.agent_only || !s.routed)
      fail(ErrorCode::MissingSystem,
           fmt::format("set '{}' lacks {}", s.set_name, !s.llm_only ? "LLM-only" : !s.agent_only ? "Agent-only" : "routed"));
    summary.per_set.emplace_back(s.set_name, tradeoff_metrics(*s.llm_only, *s.agent_only, *s.routed));
    llm.push_back(*s.llm_only);
    agent.push_back(*s.agent_only);
    routed.push_back(*s.routed);
  }
  auto& mean = summary.mean_of_set_ratios;
  for (const auto& [_, m] : summary.per_set) {
    mean.routed_accuracy_gain_vs_llm += m.routed_accuracy_gain_vs_llm;
    mean.routed_accuracy_drop_vs_agent += m.routed_accuracy_drop_vs_agent;
    mean.routed_time_reduction_vs_agent += m.routed_time_reduction_vs_agent;
    mean.agent_accuracy_gain_vs_llm += m.agent_accuracy_gain_vs_llm;
    mean.agent_llm_time_ratio += m.agent_llm_time_ratio;
  }
  const double n = static_cast<double>(sets.size());
  mean.routed_accuracy_gain_vs_llm /= n;
  mean.routed_accuracy_drop_vs_agent /= n;
  mean.routed_time_reduction_vs_agent /= n;
  mean.agent_accuracy_gain_vs_llm /= n;
  mean.agent_llm_time_ratio /= n;
  summary.ratio_of_pooled_means = tradeoff_metrics(mean_point(llm), mean_point(agent), mean_point(routed));
  return summary;
}

namespace {

struct Accumulator {
  std::size_t n = 0;
  double routed_correct = 0, routed_time = 0;
  double llm_correct = 0, llm_time = 0;
  double agent_correct = 0, agent_time = 0;

  void add(bool llm_ok, bool agent_ok, bool routed_ok, const BenchInstance& b, double routed_latency) {
    ++n;
    llm_correct += llm_ok;
    agent_correct += agent_ok;
    routed_correct += routed_ok;
    llm_time += b.llm_latency_s;
    agent_time += b.agent_latency_s;
    routed_time += routed_latency;
  }
  SystemPoint point(double correct, double time) const {
    if (n == 0) return {};
    return {correct / static_cast<double>(n), time / static_cast<double>(n)};
  }
};

}  // namespace

SetReport score_predictions(std::span<const BenchInstance> instances, std::span<const Route> predictions,
                            const std::vector<bool>& fallback_used, const EvalOptions& options) {
  if (instances.empty()) fail(ErrorCode::EmptyInput, "no instances to evaluate");
  if (predictions.size() != instances.size() || fallback_used.size() != instances.size())
    fail(ErrorCode::LengthMismatch, "one prediction and fallback flag per instance required");

  SetReport report;
  report.set = instances.front().set;
  report.count = instances.size();

  std::vector<Route> labels;
  std::map<TaskSource, std::vector<Route>> src_preds, src_labels;
  Accumulator all;
  std::map<TaskSource, Accumulator> by_source{{TaskSource::GAIA, {}}, {TaskSource::MMLU, {}}};

  for (std::size_t i = 0; i < instances.size(); ++i) {
    const BenchInstance& b = instances[i];
    const bool llm_ok = options.judge(b.llm_answer, b.gold_answer);
    const bool agent_ok = options.judge(b.agent_answer, b.gold_answer);
    const Route recomputed = label_instance(llm_ok, agent_ok, b.llm_latency_s, b.agent_latency_s);
    const Route label = b.label.value_or(recomputed);
    if (options.verify_labels && b.label && *b.label != recomputed) report.label_disagreements.push_back(b.id);

    InstanceOutcome o;
    o.id = b.id;
    o.source = b.source;
    o.label = label;
    o.predicted = predictions[i];
    o.fallback_used = fallback_used[i];
    o.executed_correct = predictions[i] == Route::LLM ? llm_ok : agent_ok;
    o.executed_latency_s = predictions[i] == Route::LLM ? b.llm_latency_s : b.agent_latency_s;
    report.fallback_count += o.fallback_used;

    labels.push_back(label);
    src_preds[b.source].push_back(o.predicted);
    src_labels[b.source].push_back(label);
    all.add(llm_ok, agent_ok, o.executed_correct, b, o.executed_latency_s);
    by_source[b.source].add(llm_ok, agent_ok, o.executed_correct, b, o.executed_latency_s);
    report.outcomes.push_back(std::move(o));
  }

  report.routing_accuracy = routing_accuracy(predictions, labels);
  report.counts = confusion_counts(predictions, labels);
  report.llm = prf_for_class(report.counts, Route::LLM);
  report.agent = prf_for_class(report.counts, Route::Agent);
  report.routed = all.point(all.routed_correct, all.routed_time);
  report.llm_only = all.point(all.llm_correct, all.llm_time);
  report.agent_only = all.point(all.agent_correct, all.agent_time);

  for (TaskSource source : {TaskSource::GAIA, TaskSource::MMLU}) {
    SourceReport sr;
    const auto& acc = by_source[source];
    sr.count = acc.n;
    if (sr.count > 0) {
      sr.counts = confusion_counts(src_preds[source], src_labels[source]);
      sr.routing_accuracy = routing_accuracy(src_preds[source], src_labels[source]);
    }
    sr.llm = prf_for_class(sr.counts, Route::LLM);
    sr.agent = prf_for_class(sr.counts, Route::Agent);
    sr.routed = acc.point(acc.routed_correct, acc.routed_time);
    sr.llm_only = acc.point(acc.llm_correct, acc.llm_time);
    sr.agent_only = acc.point(acc.agent_correct, acc.agent_time);
    report.per_source[source] = sr;
  }
  const auto& gaia = report.per_source[TaskSource::GAIA];
  const auto& mmlu = report.per_source[TaskSource::MMLU];
  report.score = routebench_score(gaia.llm.f1, gaia.agent.f1, mmlu.llm.f1, mmlu.agent.f1);
  return report;
}

SetReport evaluate_set(std::span<const BenchInstance> instances, const Router& router, const EvalOptions& options) {
  if (instances.empty()) fail(ErrorCode::EmptyInput, "no instances to evaluate");
  std::vector<Route> predictions(instances.size());
  std::vector<char> fallbacks(instances.size(), 0);
  detail::parallel_for(instances.size(), options.max_inflight, [&](std::size_t i) {
    RoutingDecision d = router.decide(instances[i].question);
    predictions[i] = d.route;
    fallbacks[i] = d.fallback_used;
  });
  return score_predictions(instances, predictions, std::vector<bool>(fallbacks.begin(), fallbacks.end()), options);
}

std::vector<SetReport> evaluate_bench(std::span<const BenchInstance> instances, const Router& router,
                                      const EvalOptions& options) {
  if (instances.empty()) fail(ErrorCode::EmptyInput, "bench is empty");
  std::vector<SetReport> reports;
  for (EvalSet set : {EvalSet::Base, EvalSet::Rephrase, EvalSet::Advanced}) {
    std::vector<BenchInstance> subset;
    std::copy_if(instances.begin(), instances.end(), std::back_inserter(subset),
                 [&](const BenchInstance& b) { return b.set == set; });
    if (!subset.empty()) reports.push_back(evaluate_set(subset, router, options));
  }
  return reports;
}

SetTradeoffInput tradeoff_input(const SetReport& report) {
  return {std::string(to_string(report.set)), report.llm_only, report.agent_only, report.routed};
}

json to_json(const ConfusionCounts& c) {
  return {{"tot_a", c.tot_a}, {"tot_b", c.tot_b}, {"tp_a", c.tp_a}, {"tp_b", c.tp_b},
          {"fp_a", c.fp_a},   {"fn_a", c.fn_a},   {"fp_b", c.fp_b}, {"fn_b", c.fn_b}};
}

json to_json(const Prf& p) { return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}}; }

namespace {
json point_json(const SystemPoint& p) { return {{"accuracy", p.accuracy}, {"mean_latency_s", p.mean_latency_s}}; }
}  // namespace

json to_json(const SetReport& r) {
  json sources = json::object();
  for (const auto& [source, sr] : r.per_source) {
    sources[std::string(to_string(source))] = {{"count", sr.count},
                                               {"counts", to_json(sr.counts)},
                                               {"llm", to_json(sr.llm)},
                                               {"agent", to_json(sr.agent)},
                                               {"routing_accuracy", sr.routing_accuracy},
                                               {"routed", point_json(sr.routed)},
                                               {"llm_only", point_json(sr.llm_only)},
                                               {"agent_only", point_json(sr.agent_only)}};
  }
  json outcomes = json::array();
  for (const auto& o : r.outcomes) {
    outcomes.push_back({{"id", o.id},
                        {"source", to_string(o.source)},
                        {"label", to_string(o.label)},
                        {"predicted", to_string(o.predicted)},
                        {"fallback_used", o.fallback_used},
                        {"executed_correct", o.executed_correct},
                        {"executed_latency_s", o.executed_latency_s}});
  }
  return {{"set", to_string(r.set)},
          {"count", r.count},
          {"routing_accuracy", r.routing_accuracy},
          {"counts", to_json(r.counts)},
          {"llm", to_json(r.llm)},
          {"agent", to_json(r.agent)},
          {"per_source", sources},
          {"routebench_score", r.score},
          {"routed", point_json(r.routed)},
          {"llm_only", point_json(r.llm_only)},
          {"agent_only", point_json(r.agent_only)},
          {"fallback_count", r.fallback_count},
          {"label_disagreements", r.label_disagreements},
          {"outcomes", outcomes}};
}

json to_json(const TradeoffMetrics& m) {
  return {{"routed_accuracy_gain_vs_llm", m.routed_accuracy_gain_vs_llm},
          {"routed_accuracy_drop_vs_agent", m.routed_accuracy_drop_vs_agent},
          {"routed_time_reduction_vs_agent", m.routed_time_reduction_vs_agent},
          {"agent_accuracy_gain_vs_llm", m.agent_accuracy_gain_vs_llm},
          {"agent_llm_time_ratio", m.agent_llm_time_ratio}};
}

json to_json(const TradeoffSummary& s) {
  json per_set = json::object();
  for (const auto& [name, m] : s.per_set) per_set[name] = to_json(m);
  return {{"per_set", per_set},
          {"mean_of_set_ratios", to_json(s.mean_of_set_ratios)},
          {"ratio_of_pooled_means", to_json(s.ratio_of_pooled_means)}};
}

}  // namespace routegate
