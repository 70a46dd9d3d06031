#include "pairgen/eval.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "pairgen/error.hpp"
#include "pairgen/session.hpp"

namespace pairgen {

using nlohmann::json;

namespace {

constexpr FeedbackKind kFailingKinds[] = {FeedbackKind::runtime_error, FeedbackKind::wrong_answer,
                                          FeedbackKind::time_limit_exceeded};

double percent(std::size_t part, std::size_t whole) {
  return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

}  // namespace

ProblemVerdict judge(const Problem& problem, std::string_view final_code, const LanguageProfile& profile,
                     Seconds time_limit, const SandboxOptions& options) {
  if (problem.private_tests.empty()) {
    throw Error(Errc::insufficient_tests, problem.id + ": no private tests to judge against");
  }
  ProblemVerdict v;
  v.problem_id = problem.id;
  Feedback pub = run_tests(final_code, problem.public_tests, profile, time_limit, problem.entry_point, options);
  v.passed_public = pub.kind == FeedbackKind::pass;
  Feedback priv = run_tests(final_code, problem.private_tests, profile, time_limit, problem.entry_point, options);
  v.passed_private = priv.kind == FeedbackKind::pass;
  if (!v.passed_private) v.private_feedback_kind = priv.kind;
  return v;
}

ProblemVerdict judge(const Problem& problem, const SessionResult& session, const LanguageProfile& profile,
                     Seconds time_limit, const SandboxOptions& options) {
  ProblemVerdict v = judge(problem, session.final_code, profile, time_limit, options);
  v.iterations_used = session.iterations_used;
  v.plans_attempted = session.plans_attempted;
  v.api_calls = session.ledger.api_calls;
  v.tokens_in = session.ledger.input_tokens;
  v.tokens_out = session.ledger.output_tokens;
  return v;
}

BenchmarkReport aggregate(std::span<const ProblemVerdict> verdicts) {
  if (verdicts.empty()) throw Error(Errc::empty_input, "no verdicts to aggregate");
  std::size_t pub = 0, priv = 0, both = 0;
  std::map<FeedbackKind, std::size_t> failures;
  double calls = 0.0, tokens = 0.0;
  for (const auto& v : verdicts) {
    if (v.passed_public) ++pub;
    if (v.passed_private) {
      ++priv;
      if (v.passed_public) ++both;
    } else {
      if (!v.private_feedback_kind || *v.private_feedback_kind == FeedbackKind::pass) {
        throw Error(Errc::parse_error, v.problem_id + ": failing verdict without a failing feedback kind");
      }
      ++failures[*v.private_feedback_kind];
    }
    calls += static_cast<double>(v.api_calls);
    tokens += static_cast<double>(v.tokens_in + v.tokens_out);
  }
  const std::size_t n = verdicts.size();
  BenchmarkReport r;
  r.num_problems = n;
  r.pass_at_1 = percent(priv, n);
  r.pass_public_rate = percent(pub, n);
  r.conditional_private_rate = percent(both, pub);
  for (FeedbackKind k : kFailingKinds) r.error_shares[k] = percent(failures[k], n);
  r.avg_api_calls = calls / static_cast<double>(n);
  r.avg_kilotokens = tokens / static_cast<double>(n) / 1000.0;
  return r;
}

double round_half_up(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::floor(value * scale + 0.5 + 1e-9) / scale;
}

ReportFormat report_format_from_string(std::string_view text) {
  if (text == "text" || text == "text_table" || text == "table") return ReportFormat::text_table;
  if (text == "json") return ReportFormat::json;
  throw Error(Errc::config_error, "report format must be text|json, got '" + std::string(text) + "'");
}

std::string render_report(const BenchmarkReport& report, ReportFormat format) {
  if (format == ReportFormat::json) {
    json shares = json::object();
    for (const auto& [k, v] : report.error_shares) shares[std::string(to_string(k))] = v;
    json j = {{"num_problems", report.num_problems},
              {"pass_at_1", report.pass_at_1},
              {"pass_public_rate", report.pass_public_rate},
              {"conditional_private_rate", report.conditional_private_rate},
              {"error_shares", std::move(shares)},
              {"avg_api_calls", report.avg_api_calls},
              {"avg_kilotokens", report.avg_kilotokens}};
    return j.dump(2) + "\n";
  }
  auto share = [&](FeedbackKind k) {
    auto it = report.error_shares.find(k);
    return round_half_up(it == report.error_shares.end() ? 0.0 : it->second);
  };
  auto pct = [](double v) { return fmt::format("{:.2f}", round_half_up(v)); };
  std::string out = fmt::format("Benchmark report ({} problems)\n\n", report.num_problems);
  out += fmt::format("{:<12}{:>10}{:>10}{:>10}{:>10}{:>10}\n", "", "Pass T_v", "Pass T_h", "RE", "WA", "TLE");
  out += fmt::format("{:<12}{:>10}{:>10}{:>10.2f}{:>10.2f}{:>10.2f}\n", "Rate (%)", pct(report.pass_public_rate),
                     pct(report.pass_at_1), share(FeedbackKind::runtime_error), share(FeedbackKind::wrong_answer),
                     share(FeedbackKind::time_limit_exceeded));
  out += "\n";
  out += fmt::format("{:<36}{:>10}\n", "pass@1 (%)", pct(report.pass_at_1));
  out += fmt::format("{:<36}{:>10}\n", "public pass rate (%)", pct(report.pass_public_rate));
  out += fmt::format("{:<36}{:>10}\n", "conditional private pass rate (%)", pct(report.conditional_private_rate));
  out += fmt::format("{:<36}{:>10.2f}\n", "avg API calls per problem", round_half_up(report.avg_api_calls));
  out += fmt::format("{:<36}{:>10.2f}\n", "avg tokens per problem (k)", round_half_up(report.avg_kilotokens));
  return out;
}

BenchmarkReport parse_report_json(std::string_view text) {
  try {
    json j = json::parse(text);
    BenchmarkReport r;
    r.num_problems = j.at("num_problems").get<std::size_t>();
    r.pass_at_1 = j.at("pass_at_1").get<double>();
    r.pass_public_rate = j.at("pass_public_rate").get<double>();
    r.conditional_private_rate = j.at("conditional_private_rate").get<double>();
    for (const auto& [k, v] : j.at("error_shares").items()) r.error_shares[feedback_kind_from_string(k)] = v.get<double>();
    r.avg_api_calls = j.at("avg_api_calls").get<double>();
    r.avg_kilotokens = j.at("avg_kilotokens").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("report: ") + e.what());
  }
}

std::string verdict_record(const ProblemVerdict& v) {
  json j = {{"problem_id", v.problem_id},
            {"passed_public", v.passed_public},
            {"passed_private", v.passed_private},
            {"private_feedback_kind",
             v.private_feedback_kind ? json(std::string(to_string(*v.private_feedback_kind))) : json(nullptr)},
            {"iterations_used", v.iterations_used},
            {"plans_attempted", v.plans_attempted},
            {"api_calls", v.api_calls},
            {"tokens_in", v.tokens_in},
            {"tokens_out", v.tokens_out}};
  return j.dump();
}

ProblemVerdict parse_verdict_record(std::string_view line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::parse_error, "verdict record is not a JSON object");
  try {
    ProblemVerdict v;
    v.problem_id = j.at("problem_id").get<std::string>();
    v.passed_public = j.at("passed_public").get<bool>();
    v.passed_private = j.at("passed_private").get<bool>();
    if (auto it = j.find("private_feedback_kind"); it != j.end() && !it->is_null()) {
      v.private_feedback_kind = feedback_kind_from_string(it->get<std::string>());
    }
    v.iterations_used = j.value("iterations_used", 0);
    v.plans_attempted = j.value("plans_attempted", 0);
    v.api_calls = j.value("api_calls", std::int64_t{0});
    v.tokens_in = j.value("tokens_in", std::int64_t{0});
    v.tokens_out = j.value("tokens_out", std::int64_t{0});
    if (v.passed_private == v.private_feedback_kind.has_value()) {
      throw Error(Errc::parse_error, v.problem_id + ": private_feedback_kind must be set iff not passed_private");
    }
    return v;
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, e.what());
  }
}

void write_verdicts(std::span<const ProblemVerdict> verdicts, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  for (const auto& v : verdicts) out << verdict_record(v) << '\n';
}

std::vector<ProblemVerdict> read_verdicts(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot read " + path.string());
  std::vector<ProblemVerdict> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_verdict_record(line));
    } catch (const Error& e) {
      throw Error(Errc::parse_error, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace pairgen
