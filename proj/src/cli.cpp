#include "routegate/cli.hpp"

#include <algorithm>
#include <csignal>
#include <fstream>
#include <future>
#include <iostream>
#include <mutex>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "parallel.hpp"
#include "routegate/gateway_service.hpp"
#include "routegate/solver_backends.hpp"

namespace routegate::cli {

using nlohmann::json;

namespace {

constexpr EvalSet kSets[] = {EvalSet::Base, EvalSet::Rephrase, EvalSet::Advanced};

struct SeedQuestion {
  std::string id;
  std::string question;
  std::optional<std::string> source;
};

std::vector<SeedQuestion> load_questions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::FileNotFound, fmt::format("cannot open questions file '{}'", path.string()));
  std::vector<SeedQuestion> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error&) {
      Error e(ErrorCode::MalformedLine, fmt::format("line {}: invalid JSON", line_no));
      e.line_no = line_no;
      throw e;
    }
    if (!obj.is_object() || !obj.contains("question") || !obj["question"].is_string()) {
      Error e(ErrorCode::MalformedLine, fmt::format("line {}: expected an object with a 'question' string", line_no));
      e.line_no = line_no;
      throw e;
    }
    SeedQuestion q;
    q.question = obj["question"].get<std::string>();
    q.id = obj.contains("id") && obj["id"].is_string() ? obj["id"].get<std::string>() : auto_record_id(out.size() + 1);
    if (obj.contains("source") && obj["source"].is_string()) q.source = obj["source"].get<std::string>();
    out.push_back(std::move(q));
  }
  return out;
}

std::shared_ptr<CompletionBackend> router_backend(const AppConfig& config) {
  return std::make_shared<ChatClient>(config.router.backend);
}

PromptTemplates templates_for(const AppConfig& config) {
  return config.router.template_dir.empty() ? PromptTemplates::builtin()
                                            : PromptTemplates::with_overrides(config.router.template_dir);
}

std::shared_ptr<Router> make_router(const AppConfig& config, const LoadedCorpus& corpus) {
  return std::make_shared<Router>(config.router.engine, router_backend(config), corpus.memory, corpus.index,
                                  templates_for(config));
}

std::string f2(double v) { return format_fixed(v, 2); }

}  // namespace

int exit_code_for(const Error& error) { return is_upstream(error.code()) ? kUpstreamError : kInputError; }

SeedSummary run_seed(const std::filesystem::path& questions_path, const std::filesystem::path& output,
                     CompletionBackend& llm, AgentBackend& agent, std::size_t max_inflight, std::ostream& log) {
  const auto questions = load_questions(questions_path);
  if (questions.empty()) fail(ErrorCode::InvalidInput, fmt::format("questions file '{}' is empty", questions_path.string()));

  {
    std::ofstream probe(output, std::ios::app);
    if (!probe) fail(ErrorCode::IoError, fmt::format("cannot write memory file '{}'", output.string()));
  }

  std::vector<std::optional<ExperienceRecord>> records(questions.size());
  std::mutex log_mutex;
  detail::parallel_for(questions.size(), max_inflight, [&](std::size_t i) {
    const auto& q = questions[i];
    auto agent_future = std::async(std::launch::async, [&] { return solve_with_agent(q.question, agent); });
    SolverResult llm_result = solve_with_llm(q.question, llm);
    SolverResult agent_result = agent_future.get();
    try {
      records[i] = record_experience(q.id, q.question, llm_result, agent_result, q.source);
    } catch (const Error& e) {
      std::lock_guard lock(log_mutex);
      fmt::print(log, "skipping question '{}': {}\n", q.id, e.what());
    }
  });

  Memory memory;
  SeedSummary summary;
  for (auto& r : records) {
    if (!r) {
      ++summary.failed;
      continue;
    }
    memory.append(std::move(*r));
    ++summary.processed;
  }
  memory.set_built_at(utc_timestamp_now());
  if (summary.processed > 0) save_memory(memory, output);
  return summary;
}

LoadedCorpus load_corpus(const AppConfig& config, bool required, std::ostream& log) {
  LoadedCorpus corpus;
  if (config.memory.path.empty() || !std::filesystem::exists(config.memory.path)) {
    if (required)
      fail(ErrorCode::IndexMissing,
           config.memory.path.empty()
               ? std::string("strategy needs an experience memory; set --memory or memory.path")
               : fmt::format("experience memory '{}' not found", config.memory.path));
    return corpus;
  }
  MemoryLoadOptions opts;
  opts.strict = config.memory.strict || config.strict;
  opts.warn = [&log](const std::string& msg) { fmt::print(log, "warning: {}\n", msg); };
  auto memory = std::make_shared<Memory>(load_memory(config.memory.path, opts));
  if (memory->empty()) {
    if (required) fail(ErrorCode::IndexMissing, fmt::format("experience memory '{}' is empty", config.memory.path));
    corpus.memory = memory;
    return corpus;
  }

  std::shared_ptr<Index> index;
  if (!config.memory.index_path.empty() && std::filesystem::exists(config.memory.index_path)) {
    auto cached = std::make_shared<Index>(load_index(config.memory.index_path));
    if (cached->config() == config.retrieval && index_matches(*cached, *memory))
      index = cached;
    else
      fmt::print(log, "warning: index '{}' is stale for the current memory/config; rebuilding\n",
                 config.memory.index_path);
  }
  if (!index) index = std::make_shared<Index>(build_index(*memory, config.retrieval));
  corpus.memory = memory;
  corpus.index = index;
  return corpus;
}

EvalRun run_eval(const std::vector<BenchInstance>& bench, const Router& router, const AppConfig& config) {
  EvalOptions options;
  options.max_inflight = config.max_inflight;
  options.verify_labels = config.verify_labels;

  EvalRun run;
  run.sets = evaluate_bench(bench, router, options);
  std::vector<SetTradeoffInput> inputs;
  std::vector<double> scores;
  for (const auto& s : run.sets) {
    inputs.push_back(tradeoff_input(s));
    scores.push_back(s.score);
  }
  run.tradeoffs = aggregate_tradeoffs(inputs);
  run.overall = overall_score(scores);

  json sets = json::array();
  for (const auto& s : run.sets) sets.push_back(to_json(s));
  run.report = {{"tool", "routegate"},
                {"version", ROUTEGATE_VERSION},
                {"generated_at", utc_timestamp_now()},
                {"config", config_to_json(config)},
                {"strategy", to_string(router.config().strategy)},
                {"sets", sets},
                {"overall_routebench_score", run.overall},
                {"tradeoffs", to_json(run.tradeoffs)}};
  return run;
}

void print_eval_table(const EvalRun& run, std::ostream& out) {
  fmt::print(out, "{:<10} {:>5} {:>8} {:>9} {:>11} {:>9} {:>11} {:>7} {:>10}\n", "set", "n", "acc", "MMLU-LLM",
             "MMLU-Agent", "GAIA-LLM", "GAIA-Agent", "score", "fallbacks");
  for (const auto& s : run.sets) {
    const auto& mmlu = s.per_source.at(TaskSource::MMLU);
    const auto& gaia = s.per_source.at(TaskSource::GAIA);
    fmt::print(out, "{:<10} {:>5} {:>8} {:>9} {:>11} {:>9} {:>11} {:>7} {:>10}\n", to_string(s.set), s.count,
               format_fixed(s.routing_accuracy, 3), f2(mmlu.llm.f1), f2(mmlu.agent.f1), f2(gaia.llm.f1),
               f2(gaia.agent.f1), f2(s.score), s.fallback_count);
  }
  fmt::print(out, "RouteBenchScore (overall): {}\n", format_fixed(run.overall, 3));

  fmt::print(out, "\n{:<10} {:>14} {:>14} {:>14} {:>16} {:>16}\n", "set", "acc LLM-only", "acc Agent-only",
             "acc routed", "time LLM-only", "time routed");
  for (const auto& s : run.sets)
    fmt::print(out, "{:<10} {:>14} {:>14} {:>14} {:>16} {:>16}\n", to_string(s.set), format_fixed(s.llm_only.accuracy, 3),
               format_fixed(s.agent_only.accuracy, 3), format_fixed(s.routed.accuracy, 3),
               format_fixed(s.llm_only.mean_latency_s, 2), format_fixed(s.routed.mean_latency_s, 2));
  const auto& pooled = run.tradeoffs.ratio_of_pooled_means;
  fmt::print(out, "pooled: accuracy gain vs LLM-only {}%, time reduction vs Agent-only {}%, Agent/LLM time ratio {}x\n",
             format_fixed(pooled.routed_accuracy_gain_vs_llm * 100.0, 1),
             format_fixed(pooled.routed_time_reduction_vs_agent * 100.0, 1), format_fixed(pooled.agent_llm_time_ratio, 1));
}

std::vector<ScoreRow> load_score_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::FileNotFound, fmt::format("cannot open score file '{}'", path.string()));
  std::vector<ScoreRow> rows;
  std::string line;
  std::size_t line_no = 0;
  auto bad = [&](const std::string& why) {
    Error e(ErrorCode::MalformedLine, fmt::format("line {}: {}", line_no, why));
    e.line_no = line_no;
    throw e;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error&) {
      bad("invalid JSON");
    }
    ScoreRow row;
    if (!obj.is_object() || !obj.contains("model") || !obj["model"].is_string()) bad("'model' must be a string");
    row.model = obj["model"].get<std::string>();
    auto set = obj.contains("set") && obj["set"].is_string() ? parse_eval_set(obj["set"].get<std::string>()) : std::nullopt;
    if (!set) bad("'set' must be base, rephrase or advanced");
    row.set = *set;
    const char* keys[] = {"gaia_llm", "gaia_agent", "mmlu_llm", "mmlu_agent"};
    const bool has_f1 = std::all_of(std::begin(keys), std::end(keys),
                                    [&](const char* k) { return obj.contains(k) && obj[k].is_number(); });
    if (has_f1) {
      std::array<double, 4> f1{};
      for (std::size_t i = 0; i < 4; ++i) f1[i] = obj[keys[i]].get<double>();
      row.f1 = f1;
    } else if (obj.contains("score") && obj["score"].is_number()) {
      row.score = obj["score"].get<double>();
    } else {
      bad("need gaia_llm, gaia_agent, mmlu_llm, mmlu_agent or a 'score'");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorCode::EmptyInput, fmt::format("score file '{}' has no rows", path.string()));
  return rows;
}

std::vector<ModelScore> compute_scores(const std::vector<ScoreRow>& rows) {
  std::vector<ModelScore> models;
  for (const auto& row : rows) {
    auto it = std::find_if(models.begin(), models.end(), [&](const ModelScore& m) { return m.model == row.model; });
    if (it == models.end()) {
      models.push_back({row.model, {}, 0.0});
      it = std::prev(models.end());
    }
    const double score = row.f1 ? routebench_score((*row.f1)[0], (*row.f1)[1], (*row.f1)[2], (*row.f1)[3]) : *row.score;
    if (!(score >= 0.0 && score <= 1.0)) fail(ErrorCode::OutOfRange, fmt::format("score {} is outside [0, 1]", score));
    if (!it->set_scores.emplace(row.set, score).second)
      fail(ErrorCode::DuplicateId, fmt::format("model '{}' has two rows for set {}", row.model, to_string(row.set)));
  }
  for (auto& m : models) {
    std::vector<double> values;
    for (const auto& [_, v] : m.set_scores) values.push_back(v);
    m.overall = overall_score(values);
  }
  std::stable_sort(models.begin(), models.end(), [](const ModelScore& a, const ModelScore& b) { return a.overall > b.overall; });
  return models;
}

void print_score_table(const std::vector<ModelScore>& scores, std::ostream& out) {
  fmt::print(out, "{:<24} {:>8} {:>9} {:>9} {:>8} {:>16}\n", "model", "base", "rephrase", "advanced", "overall",
             "full precision");
  for (const auto& m : scores) {
    std::string cells[3];
    for (std::size_t i = 0; i < 3; ++i) {
      auto it = m.set_scores.find(kSets[i]);
      cells[i] = it == m.set_scores.end() ? "-" : f2(it->second);
    }
    fmt::print(out, "{:<24} {:>8} {:>9} {:>9} {:>8} {:>16}\n", m.model, cells[0], cells[1], cells[2],
               format_fixed(m.overall, 3), fmt::format("{:.10g}", m.overall));
  }
}

namespace {

GatewayServer* g_server = nullptr;

void handle_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"routegate: route queries between a direct LLM and an agent using early experience"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_version_flag("--version", ROUTEGATE_VERSION);

  std::vector<std::string> config_files;
  std::vector<std::string> overrides;
  std::optional<std::string> memory_path, index_path, strategy;
  std::optional<std::size_t> k, max_inflight;
  std::optional<double> alpha;
  bool strict = false;
  app.add_option("--config", config_files, "INI configuration file(s); later files win")->allow_extra_args(false);
  app.add_option("--memory", memory_path, "experience memory (JSONL)");
  app.add_option("--index", index_path, "cached index file");
  app.add_option("--strategy", strategy, "prompt_only | rag_direct | regular_cot | rubric_cot");
  app.add_option("--k", k, "number of retrieved cases");
  app.add_option("--alpha", alpha, "sparse weight in the fused retrieval score");
  app.add_option("--max-inflight", max_inflight, "concurrent solver/router calls");
  app.add_option("--set", overrides, "override any key, e.g. --set router.model=gpt-5")->allow_extra_args(false);
  app.add_flag("--strict", strict, "reject unknown configuration and memory keys");

  auto* seed = app.add_subcommand("seed", "run both solvers on seed questions and write the memory");
  std::string questions_path, seed_out;
  seed->add_option("--questions", questions_path, "JSONL of {id, question, source}")->required();
  seed->add_option("--out", seed_out, "memory file to write")->required();

  auto* index_cmd = app.add_subcommand("index", "build and cache the retrieval index");
  std::string index_out;
  index_cmd->add_option("--out", index_out, "index file to write")->required();

  auto* route_cmd = app.add_subcommand("route", "print the routing decision for one question");
  std::string question;
  route_cmd->add_option("--question", question)->required();

  auto* answer_cmd = app.add_subcommand("answer", "route one question and run the chosen solver");
  answer_cmd->add_option("--question", question)->required();

  auto* eval_cmd = app.add_subcommand("eval", "evaluate routing on a bench file");
  std::string bench_path, report_path;
  eval_cmd->add_option("--bench", bench_path, "bench JSONL")->required();
  eval_cmd->add_option("--report", report_path, "write the JSON report here");

  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP gateway");
  std::optional<std::string> host;
  std::optional<int> port;
  serve_cmd->add_option("--host", host);
  serve_cmd->add_option("--port", port);

  auto* score_cmd = app.add_subcommand("score", "compute scores from precomputed per-set F1 values");
  std::string scores_path;
  score_cmd->add_option("--scores", scores_path, "JSONL of per-set F1 values or set scores")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (score_cmd->parsed()) {
      print_score_table(compute_scores(load_score_rows(scores_path)), out);
      return kOk;
    }

    ConfigSources sources;
    sources.files.assign(config_files.begin(), config_files.end());
    sources.environment = routegate_environment();
    sources.strict = strict;
    sources.warn = [&err](const std::string& msg) { fmt::print(err, "warning: {}\n", msg); };
    if (memory_path) sources.flags["memory.path"] = *memory_path;
    if (index_path) sources.flags["memory.index_path"] = *index_path;
    if (strategy) sources.flags["router.strategy"] = *strategy;
    if (k) sources.flags["retrieval.k"] = std::to_string(*k);
    if (alpha) sources.flags["retrieval.alpha"] = fmt::format("{}", *alpha);
    if (max_inflight) sources.flags["max_inflight"] = std::to_string(*max_inflight);
    if (host) sources.flags["service.host"] = *host;
    if (port) sources.flags["service.port"] = std::to_string(*port);
    for (const auto& kv : overrides) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) fail(ErrorCode::ConfigInvalid, fmt::format("--set expects key=value, got '{}'", kv));
      sources.flags[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    const AppConfig config = load_config(sources);
    const bool needs_corpus = uses_retrieval(config.router.engine.strategy);

    if (seed->parsed()) {
      ChatClient llm(config.llm);
      AgentClient agent(config.agent);
      const SeedSummary summary = run_seed(questions_path, seed_out, llm, agent, config.max_inflight, err);
      fmt::print(out, "{{\"processed\": {}, \"failed\": {}}}\n", summary.processed, summary.failed);
      if (summary.processed == 0) {
        fmt::print(err, "error: every question failed; no memory written\n");
        return kUpstreamError;
      }
      return kOk;
    }

    if (index_cmd->parsed()) {
      LoadedCorpus corpus = load_corpus(config, true, err);
      save_index(*corpus.index, index_out);
      fmt::print(out, "indexed {} records into {}\n", corpus.index->size(), index_out);
      return kOk;
    }

    if (route_cmd->parsed()) {
      auto router = make_router(config, load_corpus(config, needs_corpus, err));
      fmt::print(out, "{}\n", decision_to_json(router->decide(question)).dump(2));
      return kOk;
    }

    if (answer_cmd->parsed()) {
      GatewayDeps deps;
      LoadedCorpus corpus = load_corpus(config, needs_corpus, err);
      deps.memory = corpus.memory;
      deps.index = corpus.index;
      deps.router = make_router(config, corpus);
      deps.llm = std::make_shared<ChatClient>(config.llm);
      deps.agent = std::make_shared<AgentClient>(config.agent);
      GatewayService service(deps);
      HttpReply reply = service.handle_answer(json{{"question", question}});
      fmt::print(out, "{}\n", reply.body.dump(2));
      if (reply.status == 200) return kOk;
      return reply.status == 400 ? kInputError : kUpstreamError;
    }

    if (eval_cmd->parsed()) {
      const auto bench = load_bench(bench_path);
      auto router = make_router(config, load_corpus(config, needs_corpus, err));
      EvalRun run = run_eval(bench, *router, config);
      print_eval_table(run, out);
      if (!report_path.empty()) {
        std::ofstream report(report_path, std::ios::binary | std::ios::trunc);
        if (!report) fail(ErrorCode::IoError, fmt::format("cannot write report '{}'", report_path));
        report << run.report.dump(2) << '\n';
      }
      return kOk;
    }

    if (serve_cmd->parsed()) {
      GatewayDeps deps;
      LoadedCorpus corpus = load_corpus(config, needs_corpus, err);
      deps.memory = corpus.memory;
      deps.index = corpus.index;
      deps.router = make_router(config, corpus);
      deps.llm = std::make_shared<ChatClient>(config.llm);
      deps.agent = std::make_shared<AgentClient>(config.agent);
      GatewayService service(deps);
      GatewayServer server(service);
      const int bound = server.start(config.service.host, config.service.port);
      g_server = &server;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      fmt::print(out, "listening on {}:{}\n", config.service.host, bound);
      out.flush();
      server.wait();
      g_server = nullptr;
      return kOk;
    }
  } catch (const Error& e) {
    fmt::print(err, "error: {}\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kFailure;
  }
  return kFailure;
}

}  // namespace routegate::cli
