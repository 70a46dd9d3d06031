#include "pairgen/session.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "pairgen/digest.hpp"
#include "pairgen/error.hpp"
#include "pairgen/fingerprint.hpp"

namespace pairgen {

void SessionConfig::validate() const {
  if (max_iterations < 1) throw Error(Errc::config_error, "max iterations r must be >= 1");
  if (num_plans < 1) throw Error(Errc::config_error, "number of plans n must be >= 1");
  if (num_clusters < 1 || num_clusters > num_plans) {
    throw Error(Errc::config_error, "cluster count k must satisfy 1 <= k <= n");
  }
  if (batch_size < 1 || batch_size > num_plans) {
    throw Error(Errc::config_error, "batch size must satisfy 1 <= batch_size <= n");
  }
  if (plan_temperature < 0) throw Error(Errc::config_error, "plan temperature must be >= 0");
  if (!(time_limit.count() > 0)) throw Error(Errc::config_error, "time limit must be positive");
}

void MemoryStore::clear() {
  code_.clear();
  feedback_.clear();
}

void MemoryStore::remember(const std::string& code_fingerprint, const std::string& feedback_fingerprint) {
  code_.insert(code_fingerprint);
  feedback_.insert(feedback_fingerprint);
}

std::string_view to_string(Direction direction) {
  return direction == Direction::new_plan ? "new_plan" : "repair";
}

Direction direction_from_string(std::string_view text) {
  if (text == "new_plan") return Direction::new_plan;
  if (text == "repair") return Direction::repair;
  throw Error(Errc::parse_error, "unknown action '" + std::string(text) + "'");
}

Direction decide_direction(int iteration, std::string_view code, const Feedback& feedback,
                           const MemoryStore& memory, const CandidatePool& pool) {
  if (pool.exhausted()) return Direction::repair;
  if (iteration == 1) return Direction::new_plan;
  if (memory.has_code(fingerprint_code(code))) return Direction::new_plan;
  const std::string fb = feedback.fingerprint.empty() ? fingerprint_feedback(feedback) : feedback.fingerprint;
  if (memory.has_feedback(fb)) return Direction::new_plan;
  return Direction::repair;
}

namespace {

std::string embed_response_digest(const std::vector<EmbeddingVector>& vectors) {
  return sha256_hex(nlohmann::json(vectors).dump());
}

StepRecord step_record(const ChatRequest& req, std::string_view response) {
  nlohmann::json prompt = nlohmann::json::array();
  for (const auto& m : req.messages) prompt.push_back({std::string(to_string(m.role)), m.content});
  return StepRecord{req.tag, sha256_hex(prompt.dump()), sha256_hex(response)};
}

class Session {
 public:
  Session(const Problem& problem, Gateway& gateway, const SessionConfig& config, const SessionEnvironment& env)
      : problem_(problem),
        gateway_(gateway),
        config_(config),
        env_(env),
        prompts_(env.prompts ? *env.prompts : builtin_prompts()),
        profile_(env.profile ? *env.profile : default_profile()),
        statement_(problem_statement(problem)),
        target_(code_target(problem, profile_)) {}

  SessionResult run();

 private:
  static const PromptLibrary& builtin_prompts() {
    static const PromptLibrary lib = PromptLibrary::builtin();
    return lib;
  }
  static const LanguageProfile& default_profile() {
    static const LanguageProfile p = default_python_profile();
    return p;
  }

  std::string ask(const ChatRequest& req, std::vector<StepRecord>& steps) {
    ChatResponse resp = gateway_.complete(req);
    steps.push_back(step_record(req, resp.text));
    return resp.text;
  }

  std::string code_from(const std::string& response) {
    try {
      return extract_code(response);
    } catch (const Error& e) {
      if (e.code() != Errc::no_code_found) throw;
      spdlog::warn("{}: model reply contained no code; testing an empty program", problem_.id);
      return {};
    }
  }

  Feedback execute(const std::string& code) {
    ++sandbox_runs_;
    if (env_.executor) {
      Feedback fb = env_.executor(code, problem_, config_.time_limit);
      if (fb.fingerprint.empty()) fb.fingerprint = fingerprint_feedback(fb);
      return fb;
    }
    return run_tests(code, problem_.public_tests, profile_, config_.time_limit, problem_.entry_point, env_.sandbox);
  }

  std::vector<Plan> propose(SessionTrace& trace);
  Plan select(CandidatePool& pool, std::vector<StepRecord>& steps, bool& fallback);

  const Problem& problem_;
  Gateway& gateway_;
  const SessionConfig& config_;
  const SessionEnvironment& env_;
  const PromptLibrary& prompts_;
  const LanguageProfile& profile_;
  std::string statement_;
  CodeTarget target_;
  std::string reflection_;
  int sandbox_runs_ = 0;
};

std::vector<Plan> Session::propose(SessionTrace& trace) {
  reflection_ = ask(prompts_.render_reflect(statement_), trace.setup_steps);

  SampleStats stats;
  std::vector<Plan> plans = sample_plans(gateway_, prompts_, statement_, reflection_, config_.num_plans,
                                         config_.batch_size, config_.plan_temperature, &stats);
  for (std::size_t i = 0; i < stats.prompts.size(); ++i) {
    trace.setup_steps.push_back(step_record(stats.prompts[i], stats.responses[i]));
  }
  trace.plans = plans;

  if (plans.size() <= config_.num_clusters) return plans;

  std::vector<std::string> texts;
  for (const auto& p : plans) texts.push_back(p.text);
  auto vectors = gateway_.embed(texts);
  nlohmann::json joined(texts);
  trace.setup_steps.push_back(StepRecord{Step::embed, sha256_hex(joined.dump()), embed_response_digest(vectors)});
  for (std::size_t i = 0; i < plans.size(); ++i) plans[i].embedding = std::move(vectors[i]);
  auto reps = cluster_plans(plans, config_.num_clusters, config_.seed);
  for (auto& r : reps) r.embedding.reset();
  return reps;
}

Plan Session::select(CandidatePool& pool, std::vector<StepRecord>& steps, bool& fallback) {
  const auto& remaining = pool.remaining();
  if (remaining.size() == 1) return pool.take(remaining.front().id);
  std::vector<std::string> texts;
  for (const auto& p : remaining) texts.push_back(p.text);
  std::string reply = ask(prompts_.render_select(statement_, reflection_, texts), steps);
  std::size_t index = 1;
  try {
    index = parse_selection(reply, texts.size());
  } catch (const Error& e) {
    if (e.code() != Errc::selection_unparsable) throw;
    spdlog::warn("{}: could not parse plan selection, taking candidate 1", problem_.id);
    fallback = true;
  }
  return pool.take(remaining[index - 1].id);
}

SessionResult Session::run() {
  config_.validate();
  validate(problem_);

  SessionTrace trace;
  trace.problem_id = problem_.id;
  trace.config = config_;
  const LedgerSnapshot start = gateway_.ledger().snapshot();

  CandidatePool pool(propose(trace));
  for (const auto& p : pool.remaining()) trace.candidate_ids.push_back(p.id);

  MemoryStore memory;
  std::string code;
  Feedback feedback;
  int current_plan = 0;
  SessionResult result;

  for (int j = 1; j <= config_.max_iterations; ++j) {
    const LedgerSnapshot before = gateway_.ledger().snapshot();
    IterationRecord rec;
    rec.index = j;
    rec.action = decide_direction(j, code, feedback, memory, pool);
    if (rec.action == Direction::new_plan) {
      Plan plan = select(pool, rec.steps, rec.selection_fallback);
      current_plan = plan.id;
      memory.clear();
      code = code_from(ask(prompts_.render_code(statement_, plan.text, target_), rec.steps));
    } else {
      memory.remember(fingerprint_code(code), feedback.fingerprint);
      std::string strategy = ask(prompts_.render_analyze(statement_, code, feedback), rec.steps);
      if (strategy.find_first_not_of(" \t\r\n") == std::string::npos) {
        strategy = "Fix the failing test cases shown in the execution feedback.";
      }
      code = code_from(ask(prompts_.render_repair(statement_, code, feedback, strategy, target_), rec.steps));
    }
    rec.plan_id = current_plan;
    rec.memory_code = memory.code_size();
    rec.memory_feedback = memory.feedback_size();

    feedback = execute(code);
    rec.code_fingerprint = fingerprint_code(code);
    rec.feedback_kind = feedback.kind;
    rec.feedback_fingerprint = feedback.fingerprint;
    rec.ledger_delta = gateway_.ledger().snapshot() - before;
    trace.iterations.push_back(std::move(rec));
    if (feedback.kind == FeedbackKind::pass) break;
  }

  result.final_code = code;
  result.solved_public = feedback.kind == FeedbackKind::pass && !trace.iterations.empty();
  result.iterations_used = static_cast<int>(trace.iterations.size());
  result.plans_attempted = static_cast<int>(pool.attempted().size());
  result.sandbox_runs = sandbox_runs_;
  result.last_feedback = feedback;
  result.ledger = gateway_.ledger().snapshot() - start;

  trace.solved_public = result.solved_public;
  trace.iterations_used = result.iterations_used;
  trace.plans_attempted = result.plans_attempted;
  trace.sandbox_runs = result.sandbox_runs;
  trace.final_code_fingerprint = fingerprint_code(code);
  trace.ledger = result.ledger;
  result.trace = std::move(trace);
  return result;
}

}  // namespace

SessionResult run_session(const Problem& problem, Gateway& gateway, const SessionConfig& config,
                          const SessionEnvironment& env) {
  return Session(problem, gateway, config, env).run();
}

}  // namespace pairgen
