#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "pairgen/gateway.hpp"
#include "pairgen/plans.hpp"
#include "pairgen/problem.hpp"
#include "pairgen/prompts.hpp"
#include "pairgen/sandbox.hpp"

namespace pairgen {

struct SessionConfig {
  int max_iterations = 10;  // r
  std::size_t num_plans = 15;  // n
  std::size_t num_clusters = 3;  // k
  std::size_t batch_size = 5;
  double plan_temperature = kPlanTemperature;
  std::uint64_t seed = 0;
  Seconds time_limit{kDefaultTimeLimit};

  /// Throws Error{config_error}.
  void validate() const;
};

// Code (H_c) and feedback (H_f) fingerprints seen under the current plan.
class MemoryStore {
 public:
  void clear();
  void remember(const std::string& code_fingerprint, const std::string& feedback_fingerprint);
  bool has_code(const std::string& fingerprint) const { return code_.count(fingerprint) > 0; }
  bool has_feedback(const std::string& fingerprint) const { return feedback_.count(fingerprint) > 0; }
  std::size_t code_size() const { return code_.size(); }
  std::size_t feedback_size() const { return feedback_.size(); }

 private:
  std::set<std::string> code_;
  std::set<std::string> feedback_;
};

enum class Direction { new_plan, repair };

std::string_view to_string(Direction direction);
Direction direction_from_string(std::string_view text);

/// New plan on the first iteration or when the code or its feedback repeats
/// something remembered under the current plan; keeps repairing once the
/// candidate pool is exhausted.
Direction decide_direction(int iteration, std::string_view code, const Feedback& feedback,
                           const MemoryStore& memory, const CandidatePool& pool);

struct StepRecord {
  Step tag = Step::code;
  std::string prompt_digest;
  std::string response_digest;

  bool operator==(const StepRecord&) const = default;
};

struct IterationRecord {
  int index = 0;
  Direction action = Direction::new_plan;
  int plan_id = 0;
  std::vector<StepRecord> steps;
  std::string code_fingerprint;
  FeedbackKind feedback_kind = FeedbackKind::pass;
  std::string feedback_fingerprint;
  std::size_t memory_code = 0;  // |H_c| after this iteration's action
  std::size_t memory_feedback = 0;
  bool selection_fallback = false;
  LedgerSnapshot ledger_delta;

  bool operator==(const IterationRecord&) const = default;
};

struct SessionTrace {
  std::string problem_id;
  SessionConfig config;
  std::vector<StepRecord> setup_steps;  // reflect, plan batches, embed
  std::vector<Plan> plans;
  std::vector<int> candidate_ids;
  std::vector<IterationRecord> iterations;
  bool solved_public = false;
  int iterations_used = 0;
  int plans_attempted = 0;
  int sandbox_runs = 0;
  std::string final_code_fingerprint;
  LedgerSnapshot ledger;
};

struct SessionResult {
  std::string final_code;
  bool solved_public = false;
  int iterations_used = 0;
  int plans_attempted = 0;
  int sandbox_runs = 0;
  Feedback last_feedback;
  LedgerSnapshot ledger;
  SessionTrace trace;
};

struct SessionEnvironment {
  const PromptLibrary* prompts = nullptr;  // null: built-in templates
  const LanguageProfile* profile = nullptr;  // null: default python profile
  SandboxOptions sandbox;
  // Replaces the sandbox when set.
  std::function<Feedback(std::string_view code, const Problem& problem, Seconds time_limit)> executor;
};

/// Runs the navigator/driver loop for one problem. Candidate-program failures
/// never throw; backend and sandbox infrastructure errors propagate.
SessionResult run_session(const Problem& problem, Gateway& gateway, const SessionConfig& config,
                          const SessionEnvironment& env = {});

/// Line-delimited JSON: header, one record per iteration, footer.
void write_trace(const SessionTrace& trace, std::ostream& out);
std::string trace_jsonl(const SessionTrace& trace);
/// Throws Error{parse_error} naming the byte offset of the bad record.
SessionTrace parse_trace(std::string_view content);
SessionTrace read_trace(const std::filesystem::path& path);

/// One line per iteration: action, plan, feedback kind, memory size.
std::string narrate(const SessionTrace& trace);

}  // namespace pairgen
