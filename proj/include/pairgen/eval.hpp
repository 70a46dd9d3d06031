#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pairgen/problem.hpp"
#include "pairgen/sandbox.hpp"

namespace pairgen {

struct SessionResult;

struct ProblemVerdict {
  std::string problem_id;
  bool passed_public = false;
  bool passed_private = false;
  std::optional<FeedbackKind> private_feedback_kind;  // set iff !passed_private
  int iterations_used = 0;
  int plans_attempted = 0;
  std::int64_t api_calls = 0;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;

  bool operator==(const ProblemVerdict&) const = default;
};

struct BenchmarkReport {
  std::size_t num_problems = 0;
  double pass_at_1 = 0.0;           // % of problems passing every private test
  double pass_public_rate = 0.0;    // % of problems passing every public test
  double conditional_private_rate = 0.0;  // % of public passers that also pass private
  std::map<FeedbackKind, double> error_shares;  // % of all problems, per failing kind
  double avg_api_calls = 0.0;
  double avg_kilotokens = 0.0;

  bool operator==(const BenchmarkReport&) const = default;
};

/// Runs `final_code` against the private tests (and the public ones, for
/// passed_public) with the same executor and normalization as the session.
ProblemVerdict judge(const Problem& problem, std::string_view final_code, const LanguageProfile& profile,
                     Seconds time_limit, const SandboxOptions& options = {});

/// judge() plus the session's iteration and cost counters.
ProblemVerdict judge(const Problem& problem, const SessionResult& session, const LanguageProfile& profile,
                     Seconds time_limit, const SandboxOptions& options = {});

/// Throws Error{empty_input} on an empty list.
BenchmarkReport aggregate(std::span<const ProblemVerdict> verdicts);

/// Half-up rounding to `decimals` places, as printed in reports.
double round_half_up(double value, int decimals = 2);

enum class ReportFormat { text_table, json };
ReportFormat report_format_from_string(std::string_view text);

std::string render_report(const BenchmarkReport& report, ReportFormat format);
BenchmarkReport parse_report_json(std::string_view text);

std::string verdict_record(const ProblemVerdict& verdict);
ProblemVerdict parse_verdict_record(std::string_view line);
void write_verdicts(std::span<const ProblemVerdict> verdicts, const std::filesystem::path& path);
std::vector<ProblemVerdict> read_verdicts(const std::filesystem::path& path);

}  // namespace pairgen
