#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pairgen/problem.hpp"

namespace pairgen {

enum class CaseStatus { ok, wrong_output, runtime_error, timeout };
enum class FeedbackKind { pass, runtime_error, wrong_answer, time_limit_exceeded };

std::string_view to_string(CaseStatus status);
std::string_view to_string(FeedbackKind kind);
CaseStatus case_status_from_string(std::string_view text);
FeedbackKind feedback_kind_from_string(std::string_view text);

struct CaseResult {
  std::size_t case_index = 0;
  CaseStatus status = CaseStatus::ok;
  std::string input;            // truncated copy, for prompts
  std::string expected_output;  // truncated copy, for prompts
  std::string actual_output;    // truncated
  std::string error_message;    // truncated (tail kept)
  Seconds wall_time{0};
};

struct Feedback {
  FeedbackKind kind = FeedbackKind::pass;
  std::vector<CaseResult> cases;
  std::string fingerprint;

  std::vector<const CaseResult*> failing_cases() const;
};

/// RuntimeError > WrongAnswer > TimeLimitExceeded > Pass.
FeedbackKind aggregate_kind(std::span<const CaseStatus> statuses);

/// Splits on LF/CRLF, strips trailing whitespace per line, drops trailing
/// empty lines, rejoins with LF.
std::string normalize_output(std::string_view raw);

struct LanguageProfile {
  std::string id;
  std::string run_command;  // whitespace-separated argv; exactly one {source}
  std::string file_extension;
  std::string version_note;
  std::string display_name;
  // Program text for assertion-mode cases. Slots: {code}, {check},
  // {entry_point}, {wa_exit}. Continuation lines of {check} inherit the
  // indentation of the placeholder line.
  std::string assertion_harness;
};

/// Throws Error{config_error} unless run_command has exactly one {source}.
void validate(const LanguageProfile& profile);

LanguageProfile default_python_profile();

class ProfileRegistry {
 public:
  /// Registry holding only the default python3 profile.
  ProfileRegistry();
  /// JSON object: id -> {run_command, file_extension, version_note,
  /// display_name?, assertion_harness?}. Loaded ids override defaults.
  static ProfileRegistry load(const std::filesystem::path& path);

  void add(LanguageProfile profile);
  const LanguageProfile& at(std::string_view id) const;

 private:
  std::map<std::string, LanguageProfile, std::less<>> profiles_;
};

inline constexpr int kAssertionFailedExit = 86;
inline constexpr std::size_t kDetailLimit = 2000;

struct SandboxOptions {
  Seconds grace{1.0};
  std::size_t detail_limit = kDetailLimit;
  std::size_t capture_limit = 8u << 20;
};

/// Builds the program text executed for one assertion-mode case.
std::string render_assertion_program(const LanguageProfile& profile, std::string_view code,
                                     std::string_view check, const std::optional<std::string>& entry_point);

/// Runs every case in a fresh child process inside a fresh temp directory
/// and classifies the suite. Throws Error{sandbox_setup_error} only for
/// infrastructure problems, never for candidate failures.
Feedback run_tests(std::string_view code, std::span<const TestCase> tests, const LanguageProfile& profile,
                   Seconds time_limit, const std::optional<std::string>& entry_point = std::nullopt,
                   const SandboxOptions& options = {});

}  // namespace pairgen
