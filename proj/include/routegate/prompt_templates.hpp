#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace routegate {

enum class Strategy { PromptOnly, RagDirect, RegularCoT, RubricCoT };

/// "prompt_only", "rag_direct", "regular_cot", "rubric_cot".
std::string_view to_string(Strategy strategy);
// Case-insensitive.
std::optional<Strategy> parse_strategy(std::string_view text);

inline bool uses_retrieval(Strategy s) { return s != Strategy::PromptOnly; }
inline bool is_chain_of_thought(Strategy s) { return s == Strategy::RegularCoT || s == Strategy::RubricCoT; }

/// "<strategy>.txt"
std::string template_file_name(Strategy strategy);

inline constexpr std::string_view kQuestionPlaceholder = "{original_question}";
inline constexpr std::string_view kExamplesPlaceholder = "{retrieved_examples}";

namespace builtin_prompts {
extern const std::string_view kPromptOnly;
extern const std::string_view kRagDirect;
extern const std::string_view kRegularCot;
extern const std::string_view kRubricCot;
}  // namespace builtin_prompts

/// One template per strategy. Unset slots raise TemplateMissing on access.
class PromptTemplates {
 public:
  PromptTemplates() = default;

  /// The templates compiled into the binary.
  static PromptTemplates builtin();

  /// Built-in templates overridden by any <strategy>.txt present in dir.
  /// Throws TemplateMissing when dir does not exist.
  static PromptTemplates with_overrides(const std::filesystem::path& dir);

  const std::string& get(Strategy strategy) const;
  void set(Strategy strategy, std::string text);

 private:
  std::array<std::optional<std::string>, 4> slots_;
};

}  // namespace routegate
