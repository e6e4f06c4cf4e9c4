#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "routegate/errors.hpp"

namespace routegate {

/// Binary routing decision. Class A in the metrics is LLM, class B is Agent.
enum class Route { LLM, Agent };

std::string_view to_string(Route route);
/// Accepts "LLM" / "Agent" case-insensitively.
std::optional<Route> parse_route(std::string_view text);

struct SolverFailure {
  ErrorCode code;
  std::string message;
};

/// One solver invocation. Latency is recorded even when the call failed.
struct SolverResult {
  std::string answer;
  double latency_s = 0.0;
  Route solver = Route::LLM;
  std::optional<SolverFailure> error;

  bool ok() const { return !error.has_value(); }
};

}  // namespace routegate
