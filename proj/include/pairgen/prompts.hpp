#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pairgen/gateway.hpp"
#include "pairgen/problem.hpp"
#include "pairgen/sandbox.hpp"

namespace pairgen {

inline constexpr double kPlanTemperature = 0.8;
inline constexpr double kGreedyTemperature = 0.0;
inline constexpr std::size_t kFeedbackCasesShown = 3;

// A prompt for one framework step. Analyze templates additionally carry the
// failing feedback kind they are written for. Slots are written {{name}}.
struct PromptTemplate {
  Step step = Step::reflect;
  std::optional<FeedbackKind> feedback_variant;
  std::string system;
  std::string user;

  /// File stem under a template directory, e.g. "analyze_wrong_answer".
  std::string name() const;
  /// Splits a "[system]" / "[user]" sectioned file and checks its slots.
  static PromptTemplate parse(Step step, std::optional<FeedbackKind> variant, std::string_view source);
};

/// What the generated program must look like: language and I/O convention.
struct CodeTarget {
  std::string language = "Python 3";
  TestMode mode = TestMode::stdio;
  std::optional<std::string> entry_point;

  std::string io_instructions() const;
};

CodeTarget code_target(const Problem& problem, const LanguageProfile& profile);

/// The problem description followed by its public test cases.
std::string problem_statement(const Problem& problem);

/// Error type plus details of the first `max_cases` failing cases.
std::string render_feedback(const Feedback& feedback, std::size_t max_cases = kFeedbackCasesShown);

class PromptLibrary {
 public:
  static PromptLibrary builtin();
  /// Templates found in `dir` replace the built-in ones; missing files keep
  /// the built-in text.
  static PromptLibrary load(const std::filesystem::path& dir);

  ChatRequest render_reflect(std::string_view description) const;
  ChatRequest render_plan(std::string_view description, std::string_view reflection, std::size_t batch_size,
                          double temperature = kPlanTemperature) const;
  ChatRequest render_select(std::string_view description, std::string_view reflection,
                            std::span<const std::string> candidates) const;
  ChatRequest render_analyze(std::string_view description, std::string_view code, const Feedback& feedback) const;
  ChatRequest render_code(std::string_view description, std::string_view plan,
                          const CodeTarget& target = {}) const;
  ChatRequest render_repair(std::string_view description, std::string_view code, const Feedback& feedback,
                            std::string_view strategy, const CodeTarget& target = {}) const;

  const PromptTemplate& get(const std::string& name) const;
  void set_max_tokens(int max_tokens) { max_tokens_ = max_tokens; }

 private:
  ChatRequest render(const std::string& name, const std::map<std::string, std::string_view>& slots,
                     double temperature) const;

  std::map<std::string, PromptTemplate> templates_;
  int max_tokens_ = 2048;
};

/// Splits a numbered list ("1." / "1)" / "Plan 1:") into trimmed plan texts.
/// Text before the first item is discarded. Throws Error{no_plans_found}.
std::vector<std::string> parse_plans(std::string_view model_output);

/// First integer in [1, k] found in the output. Throws Error{selection_unparsable}.
std::size_t parse_selection(std::string_view model_output, std::size_t k);

/// Body of the first fenced code block, else the longest run of code-looking
/// lines. Throws Error{no_code_found}.
std::string extract_code(std::string_view model_output);

}  // namespace pairgen
