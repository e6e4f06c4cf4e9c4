#include "routegate/config.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

extern char** environ;

namespace routegate {

using nlohmann::json;

namespace {

constexpr std::string_view kEnvPrefix = "ROUTEGATE_";

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(std::string_view text) {
  const std::string s = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw std::invalid_argument(fmt::format("'{}' is not a number", s));
  return v;
}

long long to_integer(std::string_view text) {
  const std::string s = trim(text);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument(fmt::format("'{}' is not an integer", s));
  return v;
}

std::size_t to_count(std::string_view text, long long min_value) {
  const long long v = to_integer(text);
  if (v < min_value) throw std::invalid_argument(fmt::format("must be >= {}, got {}", min_value, v));
  return static_cast<std::size_t>(v);
}

double to_positive(std::string_view text) {
  const double v = to_double(text);
  if (!(v > 0.0)) throw std::invalid_argument(fmt::format("must be > 0, got {}", v));
  return v;
}

double to_unit_interval(std::string_view text) {
  const double v = to_double(text);
  if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(fmt::format("must be in [0, 1], got {}", v));
  return v;
}

bool to_bool(std::string_view text) {
  std::string s = trim(text);
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument(fmt::format("'{}' is not a boolean", s));
}

struct Entry {
  std::string_view key;
  std::function<void(AppConfig&, std::string_view)> set;
  std::function<json(const AppConfig&)> get;
};

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = {
      {"retrieval.k", [](AppConfig& c, std::string_view v) { c.retrieval.k = to_count(v, 1); },
       [](const AppConfig& c) { return json(c.retrieval.k); }},
      {"retrieval.alpha", [](AppConfig& c, std::string_view v) { c.retrieval.alpha = to_unit_interval(v); },
       [](const AppConfig& c) { return json(c.retrieval.alpha); }},
      {"retrieval.bm25_k1",
       [](AppConfig& c, std::string_view v) {
         const double k1 = to_double(v);
         if (k1 < 0.0) throw std::invalid_argument(fmt::format("must be >= 0, got {}", k1));
         c.retrieval.bm25_k1 = k1;
       },
       [](const AppConfig& c) { return json(c.retrieval.bm25_k1); }},
      {"retrieval.bm25_b", [](AppConfig& c, std::string_view v) { c.retrieval.bm25_b = to_unit_interval(v); },
       [](const AppConfig& c) { return json(c.retrieval.bm25_b); }},
      {"retrieval.embed_dim", [](AppConfig& c, std::string_view v) { c.retrieval.embed_dim = to_count(v, 1); },
       [](const AppConfig& c) { return json(c.retrieval.embed_dim); }},

      {"router.strategy",
       [](AppConfig& c, std::string_view v) {
         auto s = parse_strategy(trim(v));
         if (!s) throw std::invalid_argument("must be one of prompt_only, rag_direct, regular_cot, rubric_cot");
         c.router.engine.strategy = *s;
       },
       [](const AppConfig& c) { return json(to_string(c.router.engine.strategy)); }},
      {"router.model", [](AppConfig& c, std::string_view v) { c.router.backend.model = trim(v); },
       [](const AppConfig& c) { return json(c.router.backend.model); }},
      {"router.base_url", [](AppConfig& c, std::string_view v) { c.router.backend.base_url = trim(v); },
       [](const AppConfig& c) { return json(c.router.backend.base_url); }},
      {"router.api_key_env", [](AppConfig& c, std::string_view v) { c.router.backend.api_key_env = trim(v); },
       [](const AppConfig& c) { return json(c.router.backend.api_key_env); }},
      {"router.fallback_route",
       [](AppConfig& c, std::string_view v) {
         auto r = parse_route(trim(v));
         if (!r) throw std::invalid_argument("must be LLM or Agent");
         c.router.engine.fallback_route = *r;
       },
       [](const AppConfig& c) { return json(to_string(c.router.engine.fallback_route)); }},
      {"router.max_retries",
       [](AppConfig& c, std::string_view v) { c.router.backend.max_retries = to_count(v, 0); },
       [](const AppConfig& c) { return json(c.router.backend.max_retries); }},
      {"router.parse_retries",
       [](AppConfig& c, std::string_view v) { c.router.engine.parse_retries = to_count(v, 0); },
       [](const AppConfig& c) { return json(c.router.engine.parse_retries); }},
      {"router.example_truncate_chars",
       [](AppConfig& c, std::string_view v) { c.router.engine.example_truncate_chars = to_count(v, 1); },
       [](const AppConfig& c) { return json(c.router.engine.example_truncate_chars); }},
      {"router.template_dir", [](AppConfig& c, std::string_view v) { c.router.template_dir = trim(v); },
       [](const AppConfig& c) { return json(c.router.template_dir); }},
      {"router.timeout_s", [](AppConfig& c, std::string_view v) { c.router.backend.timeout_s = to_positive(v); },
       [](const AppConfig& c) { return json(c.router.backend.timeout_s); }},
      {"router.max_inflight",
       [](AppConfig& c, std::string_view v) { c.router.backend.max_inflight = to_count(v, 1); },
       [](const AppConfig& c) { return json(c.router.backend.max_inflight); }},

      {"llm.base_url", [](AppConfig& c, std::string_view v) { c.llm.base_url = trim(v); },
       [](const AppConfig& c) { return json(c.llm.base_url); }},
      {"llm.model", [](AppConfig& c, std::string_view v) { c.llm.model = trim(v); },
       [](const AppConfig& c) { return json(c.llm.model); }},
      {"llm.api_key_env", [](AppConfig& c, std::string_view v) { c.llm.api_key_env = trim(v); },
       [](const AppConfig& c) { return json(c.llm.api_key_env); }},
      {"llm.timeout_s", [](AppConfig& c, std::string_view v) { c.llm.timeout_s = to_positive(v); },
       [](const AppConfig& c) { return json(c.llm.timeout_s); }},
      {"llm.max_retries", [](AppConfig& c, std::string_view v) { c.llm.max_retries = to_count(v, 0); },
       [](const AppConfig& c) { return json(c.llm.max_retries); }},
      {"llm.max_inflight", [](AppConfig& c, std::string_view v) { c.llm.max_inflight = to_count(v, 1); },
       [](const AppConfig& c) { return json(c.llm.max_inflight); }},

      {"agent.url", [](AppConfig& c, std::string_view v) { c.agent.url = trim(v); },
       [](const AppConfig& c) { return json(c.agent.url); }},
      {"agent.api_key_env", [](AppConfig& c, std::string_view v) { c.agent.api_key_env = trim(v); },
       [](const AppConfig& c) { return json(c.agent.api_key_env); }},
      {"agent.timeout_s", [](AppConfig& c, std::string_view v) { c.agent.timeout_s = to_positive(v); },
       [](const AppConfig& c) { return json(c.agent.timeout_s); }},
      {"agent.max_retries", [](AppConfig& c, std::string_view v) { c.agent.max_retries = to_count(v, 0); },
       [](const AppConfig& c) { return json(c.agent.max_retries); }},
      {"agent.max_inflight", [](AppConfig& c, std::string_view v) { c.agent.max_inflight = to_count(v, 1); },
       [](const AppConfig& c) { return json(c.agent.max_inflight); }},

      {"memory.path", [](AppConfig& c, std::string_view v) { c.memory.path = trim(v); },
       [](const AppConfig& c) { return json(c.memory.path); }},
      {"memory.index_path", [](AppConfig& c, std::string_view v) { c.memory.index_path = trim(v); },
       [](const AppConfig& c) { return json(c.memory.index_path); }},
      {"memory.strict", [](AppConfig& c, std::string_view v) { c.memory.strict = to_bool(v); },
       [](const AppConfig& c) { return json(c.memory.strict); }},

      {"service.host", [](AppConfig& c, std::string_view v) { c.service.host = trim(v); },
       [](const AppConfig& c) { return json(c.service.host); }},
      {"service.port",
       [](AppConfig& c, std::string_view v) {
         const long long port = to_integer(v);
         if (port < 0 || port > 65535) throw std::invalid_argument(fmt::format("must be in [0, 65535], got {}", port));
         c.service.port = static_cast<int>(port);
       },
       [](const AppConfig& c) { return json(c.service.port); }},
      {"service.request_timeout_s",
       [](AppConfig& c, std::string_view v) { c.service.request_timeout_s = to_positive(v); },
       [](const AppConfig& c) { return json(c.service.request_timeout_s); }},

      {"eval.verify_labels", [](AppConfig& c, std::string_view v) { c.verify_labels = to_bool(v); },
       [](const AppConfig& c) { return json(c.verify_labels); }},
      {"max_inflight", [](AppConfig& c, std::string_view v) { c.max_inflight = to_count(v, 1); },
       [](const AppConfig& c) { return json(c.max_inflight); }},
  };
  return entries;
}

const Entry* find_entry(std::string_view key) {
  for (const auto& e : registry())
    if (e.key == key) return &e;
  return nullptr;
}

void flatten(const boost::property_tree::ptree& tree, const std::string& prefix,
             std::vector<std::pair<std::string, std::string>>& out) {
  for (const auto& [name, child] : tree) {
    const std::string key = prefix.empty() ? name : prefix + "." + name;
    if (child.empty())
      out.emplace_back(key, child.data());
    else
      flatten(child, key, out);
  }
}

}  // namespace

AppConfig::AppConfig() {
  router.backend.base_url = "https://api.openai.com/v1";
  router.backend.model = "gpt-4o";
  router.backend.api_key_env = "OPENAI_API_KEY";
  router.backend.system_prompt = "You are a routing assistant.";
  router.backend.timeout_s = 60.0;
  router.backend.max_retries = 2;
  llm.base_url = "https://api.openai.com/v1";
  llm.model = "gpt-4o";
  llm.api_key_env = "OPENAI_API_KEY";
  llm.timeout_s = 60.0;
  agent.url = "http://127.0.0.1:8090/v1/agent";
  agent.timeout_s = 900.0;
}

std::string_view to_string(ConfigLayer layer) {
  switch (layer) {
    case ConfigLayer::Default: return "default";
    case ConfigLayer::File: return "file";
    case ConfigLayer::Environment: return "environment";
    case ConfigLayer::Flag: return "flag";
  }
  return "unknown";
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& e : registry()) keys.emplace_back(e.key);
  return keys;
}

std::string env_var_for(std::string_view key) {
  std::string out(kEnvPrefix);
  for (char c : key) out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

void apply_config_value(AppConfig& config, std::string_view key, std::string_view value, ConfigLayer layer,
                        bool strict, const std::function<void(const std::string&)>& warn) {
  const Entry* entry = find_entry(key);
  if (entry == nullptr) {
    const std::string msg = fmt::format("unknown configuration key '{}' ({} layer)", key, to_string(layer));
    if (strict) fail(ErrorCode::ConfigInvalid, msg);
    if (warn) warn(msg);
    return;
  }
  try {
    entry->set(config, value);
  } catch (const std::invalid_argument& e) {
    fail(ErrorCode::ConfigInvalid, fmt::format("{} ({} layer): {}", key, to_string(layer), e.what()));
  }
}

AppConfig load_config(const ConfigSources& sources) {
  AppConfig config;
  config.strict = sources.strict;

  for (const auto& path : sources.files) {
    if (!std::filesystem::exists(path))
      fail(ErrorCode::FileNotFound, fmt::format("config file '{}' not found", path.string()));
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      fail(ErrorCode::ConfigInvalid, fmt::format("config file '{}': {}", path.string(), e.what()));
    }
    std::vector<std::pair<std::string, std::string>> pairs;
    flatten(tree, "", pairs);
    for (const auto& [key, value] : pairs)
      apply_config_value(config, key, value, ConfigLayer::File, sources.strict, sources.warn);
  }

  for (const auto& entry : registry()) {
    auto it = sources.environment.find(env_var_for(entry.key));
    if (it != sources.environment.end())
      apply_config_value(config, entry.key, it->second, ConfigLayer::Environment, sources.strict, sources.warn);
  }

  for (const auto& [key, value] : sources.flags)
    apply_config_value(config, key, value, ConfigLayer::Flag, sources.strict, sources.warn);

  validate(config.retrieval);
  config.router.engine.k = config.retrieval.k;
  return config;
}

std::map<std::string, std::string> routegate_environment() {
  std::map<std::string, std::string> out;
  for (char** env = environ; env != nullptr && *env != nullptr; ++env) {
    std::string_view entry(*env);
    if (entry.substr(0, kEnvPrefix.size()) != kEnvPrefix) continue;
    auto eq = entry.find('=');
    if (eq == std::string_view::npos) continue;
    out.emplace(std::string(entry.substr(0, eq)), std::string(entry.substr(eq + 1)));
  }
  return out;
}

json config_to_json(const AppConfig& config) {
  json out = json::object();
  for (const auto& e : registry()) out[std::string(e.key)] = e.get(config);
  out["strict"] = config.strict;
  return out;
}

}  // namespace routegate
