#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pairgen {

using Seconds = std::chrono::duration<double>;

inline constexpr Seconds kDefaultTimeLimit{3.0};
inline constexpr std::string_view kDefaultLanguageProfile = "python3";

enum class TestMode { stdio, assertion };

std::string_view to_string(TestMode mode);
TestMode test_mode_from_string(std::string_view text);

// In stdio mode `input` is piped to stdin and stdout is compared to
// `expected_output`. In assertion mode `input` holds the check snippet that is
// executed after the candidate program is loaded; `expected_output` is unused.
struct TestCase {
  std::string input;
  std::optional<std::string> expected_output;
  TestMode mode = TestMode::stdio;

  bool operator==(const TestCase&) const = default;
};

struct Problem {
  std::string id;
  std::string description;
  std::optional<std::string> entry_point;
  std::vector<TestCase> public_tests;
  std::vector<TestCase> private_tests;
  std::string language_profile_id{kDefaultLanguageProfile};
  Seconds time_limit{kDefaultTimeLimit};

  TestMode mode() const;

  bool operator==(const Problem&) const = default;
};

struct Benchmark {
  std::string name;
  std::vector<Problem> problems;
};

/// How the visible tests of a problem are obtained.
struct PublicTestPolicy {
  enum class Kind { explicit_tests, first_private, first_n_private };
  Kind kind = Kind::explicit_tests;
  std::size_t n = 1;

  /// Accepts "explicit", "first_private" and "first_n:<n>".
  static PublicTestPolicy parse(std::string_view text);
  std::string to_string() const;
};

/// Throws Error{invalid_problem} when a problem breaks a model invariant
/// (empty public tests, non-positive time limit, mixed modes, bad test case).
void validate(const Problem& problem);

Problem derive_public_tests(Problem problem, const PublicTestPolicy& policy);

struct LoadOptions {
  PublicTestPolicy policy;
  // Used for records without time_limit_s.
  Seconds default_time_limit{kDefaultTimeLimit};
};

/// Loads a JSONL benchmark; problems keep file order, unknown fields are
/// ignored, blank lines are skipped. The policy is applied to every problem
/// and the result validated.
Benchmark load_benchmark(const std::filesystem::path& path, const LoadOptions& options = {});

/// Parses one JSONL record (without derivation or validation).
Problem parse_problem_record(std::string_view line, Seconds default_time_limit = kDefaultTimeLimit);
std::string problem_record(const Problem& problem);

void save_benchmark(const Benchmark& benchmark, const std::filesystem::path& path);

}  // namespace pairgen
