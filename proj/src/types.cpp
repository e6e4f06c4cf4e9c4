#include "routegate/types.hpp"

#include <algorithm>
#include <cctype>

namespace routegate {

std::string_view to_string(Route route) { return route == Route::LLM ? "LLM" : "Agent"; }

std::optional<Route> parse_route(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "llm") return Route::LLM;
  if (lower == "agent") return Route::Agent;
  return std::nullopt;
}

}  // namespace routegate
