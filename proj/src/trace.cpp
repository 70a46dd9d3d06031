#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "pairgen/error.hpp"
#include "pairgen/session.hpp"

namespace pairgen {

using nlohmann::json;

namespace {

json ledger_json(const LedgerSnapshot& l) {
  json per_tag = json::object();
  for (const auto& [tag, u] : l.per_tag) {
    per_tag[tag] = {{"calls", u.calls}, {"input_tokens", u.input_tokens}, {"output_tokens", u.output_tokens}};
  }
  return {{"api_calls", l.api_calls},
          {"input_tokens", l.input_tokens},
          {"output_tokens", l.output_tokens},
          {"per_tag", std::move(per_tag)}};
}

LedgerSnapshot ledger_from(const json& j) {
  LedgerSnapshot l;
  l.api_calls = j.at("api_calls").get<std::int64_t>();
  l.input_tokens = j.at("input_tokens").get<std::int64_t>();
  l.output_tokens = j.at("output_tokens").get<std::int64_t>();
  for (const auto& [tag, u] : j.at("per_tag").items()) {
    l.per_tag[tag] = TagUsage{u.at("calls").get<std::int64_t>(), u.at("input_tokens").get<std::int64_t>(),
                              u.at("output_tokens").get<std::int64_t>()};
  }
  return l;
}

json steps_json(const std::vector<StepRecord>& steps) {
  json arr = json::array();
  for (const auto& s : steps) {
    arr.push_back({{"tag", std::string(to_string(s.tag))},
                   {"prompt_digest", s.prompt_digest},
                   {"response_digest", s.response_digest}});
  }
  return arr;
}

std::vector<StepRecord> steps_from(const json& arr) {
  std::vector<StepRecord> steps;
  for (const auto& s : arr) {
    steps.push_back(StepRecord{step_from_string(s.at("tag").get<std::string>()),
                               s.at("prompt_digest").get<std::string>(), s.at("response_digest").get<std::string>()});
  }
  return steps;
}

json config_json(const SessionConfig& c) {
  return {{"max_iterations", c.max_iterations}, {"num_plans", c.num_plans},
          {"num_clusters", c.num_clusters},     {"batch_size", c.batch_size},
          {"plan_temperature", c.plan_temperature}, {"seed", c.seed},
          {"time_limit_s", c.time_limit.count()}};
}

SessionConfig config_from(const json& j) {
  SessionConfig c;
  c.max_iterations = j.at("max_iterations").get<int>();
  c.num_plans = j.at("num_plans").get<std::size_t>();
  c.num_clusters = j.at("num_clusters").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.plan_temperature = j.at("plan_temperature").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.time_limit = Seconds(j.at("time_limit_s").get<double>());
  return c;
}

}  // namespace

void write_trace(const SessionTrace& trace, std::ostream& out) {
  json plans = json::array();
  for (const auto& p : trace.plans) plans.push_back({{"id", p.id}, {"text", p.text}});
  json header = {{"type", "header"},
                 {"problem_id", trace.problem_id},
                 {"config", config_json(trace.config)},
                 {"setup_steps", steps_json(trace.setup_steps)},
                 {"plans", std::move(plans)},
                 {"candidates", trace.candidate_ids}};
  out << header.dump() << '\n';
  for (const auto& r : trace.iterations) {
    json rec = {{"type", "iteration"},
                {"index", r.index},
                {"action", std::string(to_string(r.action))},
                {"plan_id", r.plan_id},
                {"steps", steps_json(r.steps)},
                {"code_fingerprint", r.code_fingerprint},
                {"feedback_kind", std::string(to_string(r.feedback_kind))},
                {"feedback_fingerprint", r.feedback_fingerprint},
                {"memory", {{"code", r.memory_code}, {"feedback", r.memory_feedback}}},
                {"selection_fallback", r.selection_fallback},
                {"ledger_delta", ledger_json(r.ledger_delta)}};
    out << rec.dump() << '\n';
  }
  json footer = {{"type", "footer"},
                 {"solved_public", trace.solved_public},
                 {"iterations_used", trace.iterations_used},
                 {"plans_attempted", trace.plans_attempted},
                 {"sandbox_runs", trace.sandbox_runs},
                 {"final_code_fingerprint", trace.final_code_fingerprint},
                 {"ledger", ledger_json(trace.ledger)}};
  out << footer.dump() << '\n';
}

std::string trace_jsonl(const SessionTrace& trace) {
  std::ostringstream out;
  write_trace(trace, out);
  return out.str();
}

SessionTrace parse_trace(std::string_view content) {
  SessionTrace trace;
  bool have_header = false, have_footer = false;
  std::size_t offset = 0;
  while (offset < content.size()) {
    std::size_t nl = content.find('\n', offset);
    std::string_view line = content.substr(offset, nl == std::string_view::npos ? content.size() - offset : nl - offset);
    const std::size_t line_offset = offset;
    offset = nl == std::string_view::npos ? content.size() : nl + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    auto fail = [&](const std::string& why) {
      return Error(Errc::parse_error, "trace record at byte offset " + std::to_string(line_offset) + ": " + why);
    };
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw fail("not a JSON object");
    try {
      const std::string type = j.at("type").get<std::string>();
      if (have_footer) throw fail("record after footer");
      if (type == "header") {
        if (have_header) throw fail("duplicate header");
        have_header = true;
        trace.problem_id = j.at("problem_id").get<std::string>();
        trace.config = config_from(j.at("config"));
        trace.setup_steps = steps_from(j.at("setup_steps"));
        for (const auto& p : j.at("plans")) {
          trace.plans.push_back(Plan{p.at("id").get<int>(), p.at("text").get<std::string>(), std::nullopt});
        }
        trace.candidate_ids = j.at("candidates").get<std::vector<int>>();
      } else if (type == "iteration") {
        if (!have_header) throw fail("iteration before header");
        IterationRecord r;
        r.index = j.at("index").get<int>();
        r.action = direction_from_string(j.at("action").get<std::string>());
        r.plan_id = j.at("plan_id").get<int>();
        r.steps = steps_from(j.at("steps"));
        r.code_fingerprint = j.at("code_fingerprint").get<std::string>();
        r.feedback_kind = feedback_kind_from_string(j.at("feedback_kind").get<std::string>());
        r.feedback_fingerprint = j.at("feedback_fingerprint").get<std::string>();
        r.memory_code = j.at("memory").at("code").get<std::size_t>();
        r.memory_feedback = j.at("memory").at("feedback").get<std::size_t>();
        r.selection_fallback = j.value("selection_fallback", false);
        r.ledger_delta = ledger_from(j.at("ledger_delta"));
        trace.iterations.push_back(std::move(r));
      } else if (type == "footer") {
        if (!have_header) throw fail("footer before header");
        have_footer = true;
        trace.solved_public = j.at("solved_public").get<bool>();
        trace.iterations_used = j.at("iterations_used").get<int>();
        trace.plans_attempted = j.at("plans_attempted").get<int>();
        trace.sandbox_runs = j.at("sandbox_runs").get<int>();
        trace.final_code_fingerprint = j.at("final_code_fingerprint").get<std::string>();
        trace.ledger = ledger_from(j.at("ledger"));
      } else {
        throw fail("unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw fail(e.what());
    } catch (const Error& e) {
      if (e.code() == Errc::parse_error && std::string(e.what()).find("byte offset") != std::string::npos) throw;
      throw fail(e.what());
    }
  }
  if (!have_header) throw Error(Errc::parse_error, "trace has no header (byte offset 0)");
  if (!have_footer) {
    throw Error(Errc::parse_error, "trace truncated: no footer record before byte offset " +
                                       std::to_string(content.size()));
  }
  return trace;
}

SessionTrace read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot read trace " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_trace(ss.str());
}

std::string narrate(const SessionTrace& trace) {
  std::string out;
  for (const auto& r : trace.iterations) {
    out += "iteration " + std::to_string(r.index) + ": " + std::string(to_string(r.action)) + " on plan " +
           std::to_string(r.plan_id) + " -> " + std::string(to_string(r.feedback_kind)) + " (memory " +
           std::to_string(r.memory_code) + " code / " + std::to_string(r.memory_feedback) + " feedback)";
    if (r.selection_fallback) out += " [selection fallback]";
    out += '\n';
  }
  return out;
}

}  // namespace pairgen
