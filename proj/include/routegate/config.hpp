#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "routegate/hybrid_retrieval.hpp"
#include "routegate/routing_engine.hpp"
#include "routegate/solver_backends.hpp"

namespace routegate {

struct RouterSettings {
  RouterConfig engine;
  ChatBackendConfig backend;
  std::string template_dir;  // empty: built-in templates
};

struct MemorySettings {
  std::string path;
  std::string index_path;  // optional cached index
  bool strict = false;
};

struct ServiceSettings {
  std::string host = "127.0.0.1";
  int port = 8080;
  double request_timeout_s = 960.0;
};

struct AppConfig {
  RetrievalConfig retrieval;
  RouterSettings router;
  ChatBackendConfig llm;
  AgentEndpointConfig agent;
  MemorySettings memory;
  ServiceSettings service;
  bool verify_labels = true;
  std::size_t max_inflight = 4;
  bool strict = false;

  AppConfig();
};

/// Where a value came from; used in validation messages.
enum class ConfigLayer { Default, File, Environment, Flag };
std::string_view to_string(ConfigLayer layer);

/// Every recognized dotted key, in documentation order.
std::vector<std::string> config_keys();

/// "retrieval.bm25_k1" -> "ROUTEGATE_RETRIEVAL_BM25_K1".
std::string env_var_for(std::string_view key);

/// Sets one key from its textual value. Throws ConfigInvalid naming the key
/// and layer; unknown keys throw only when strict is set.
void apply_config_value(AppConfig& config, std::string_view key, std::string_view value, ConfigLayer layer,
                        bool strict, const std::function<void(const std::string&)>& warn = {});

struct ConfigSources {
  std::vector<std::filesystem::path> files;     // INI, later files win
  std::map<std::string, std::string> environment;  // raw variable name -> value
  std::map<std::string, std::string> flags;        // dotted key -> value
  bool strict = false;
  std::function<void(const std::string&)> warn;
};

/// Layers defaults < files < environment < flags, then validates the result.
AppConfig load_config(const ConfigSources& sources);

/// Snapshot of the current process environment restricted to ROUTEGATE_*.
std::map<std::string, std::string> routegate_environment();

/// Resolved configuration as a flat key -> value object (no secrets: only
/// environment-variable names are recorded for credentials).
nlohmann::json config_to_json(const AppConfig& config);

}  // namespace routegate
