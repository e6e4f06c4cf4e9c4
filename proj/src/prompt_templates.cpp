#include "routegate/prompt_templates.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "routegate/errors.hpp"

namespace routegate {

namespace {
constexpr Strategy kAll[] = {Strategy::PromptOnly, Strategy::RagDirect, Strategy::RegularCoT,
                             Strategy::RubricCoT};
}

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::PromptOnly: return "prompt_only";
    case Strategy::RagDirect: return "rag_direct";
    case Strategy::RegularCoT: return "regular_cot";
    case Strategy::RubricCoT: return "rubric_cot";
  }
  return "unknown";
}

std::optional<Strategy> parse_strategy(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (Strategy s : kAll)
    if (to_string(s) == lower) return s;
  return std::nullopt;
}

std::string template_file_name(Strategy strategy) { return fmt::format("{}.txt", to_string(strategy)); }

PromptTemplates PromptTemplates::builtin() {
  PromptTemplates t;
  t.set(Strategy::PromptOnly, std::string(builtin_prompts::kPromptOnly));
  t.set(Strategy::RagDirect, std::string(builtin_prompts::kRagDirect));
  t.set(Strategy::RegularCoT, std::string(builtin_prompts::kRegularCot));
  t.set(Strategy::RubricCoT, std::string(builtin_prompts::kRubricCot));
  return t;
}

PromptTemplates PromptTemplates::with_overrides(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    fail(ErrorCode::TemplateMissing, fmt::format("template directory '{}' does not exist", dir.string()));
  PromptTemplates t = builtin();
  for (Strategy s : kAll) {
    auto path = dir / template_file_name(s);
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (buf.str().empty())
      fail(ErrorCode::TemplateMissing, fmt::format("template '{}' is empty", path.string()));
    t.set(s, buf.str());
  }
  return t;
}

const std::string& PromptTemplates::get(Strategy strategy) const {
  const auto& slot = slots_[static_cast<std::size_t>(strategy)];
  if (!slot) fail(ErrorCode::TemplateMissing, fmt::format("no template for strategy {}", to_string(strategy)));
  return *slot;
}

void PromptTemplates::set(Strategy strategy, std::string text) {
  slots_[static_cast<std::size_t>(strategy)] = std::move(text);
}

}  // namespace routegate
