#include "pairgen/problem.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "pairgen/error.hpp"

namespace pairgen {

using nlohmann::json;

std::string_view to_string(TestMode mode) {
  return mode == TestMode::stdio ? "stdio" : "assertion";
}

TestMode test_mode_from_string(std::string_view text) {
  if (text == "stdio") return TestMode::stdio;
  if (text == "assertion") return TestMode::assertion;
  throw Error(Errc::parse_error, "unknown test mode '" + std::string(text) + "'");
}

TestMode Problem::mode() const {
  if (!public_tests.empty()) return public_tests.front().mode;
  if (!private_tests.empty()) return private_tests.front().mode;
  return TestMode::stdio;
}

PublicTestPolicy PublicTestPolicy::parse(std::string_view text) {
  if (text == "explicit") return {Kind::explicit_tests, 0};
  if (text == "first_private") return {Kind::first_private, 1};
  constexpr std::string_view prefix = "first_n:";
  if (text.substr(0, prefix.size()) == prefix) {
    std::string_view digits = text.substr(prefix.size());
    std::size_t n = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec == std::errc{} && ptr == digits.data() + digits.size() && n >= 1) {
      return {Kind::first_n_private, n};
    }
  }
  throw Error(Errc::config_error,
              "public test policy must be explicit|first_private|first_n:<n>, got '" +
                  std::string(text) + "'");
}

std::string PublicTestPolicy::to_string() const {
  switch (kind) {
    case Kind::explicit_tests: return "explicit";
    case Kind::first_private: return "first_private";
    case Kind::first_n_private: return "first_n:" + std::to_string(n);
  }
  return "explicit";
}

namespace {

void validate_case(const Problem& problem, const TestCase& tc, TestMode mode) {
  if (tc.mode != mode) {
    throw Error(Errc::invalid_problem, problem.id + ": public and private tests must share one mode");
  }
  if (tc.mode == TestMode::stdio && !tc.expected_output) {
    throw Error(Errc::invalid_problem, problem.id + ": stdio test case without expected output");
  }
  if (tc.mode == TestMode::assertion && tc.input.empty()) {
    throw Error(Errc::invalid_problem, problem.id + ": assertion test case with empty check");
  }
}

}  // namespace

void validate(const Problem& problem) {
  if (problem.id.empty()) throw Error(Errc::invalid_problem, "problem with empty id");
  if (problem.description.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(Errc::invalid_problem, problem.id + ": empty description");
  }
  if (problem.public_tests.empty()) {
    throw Error(Errc::invalid_problem, problem.id + ": no public tests");
  }
  if (!(problem.time_limit.count() > 0)) {
    throw Error(Errc::invalid_problem, problem.id + ": time limit must be positive");
  }
  const TestMode mode = problem.mode();
  for (const auto& tc : problem.public_tests) validate_case(problem, tc, mode);
  for (const auto& tc : problem.private_tests) validate_case(problem, tc, mode);
}

Problem derive_public_tests(Problem problem, const PublicTestPolicy& policy) {
  std::size_t take = 0;
  switch (policy.kind) {
    case PublicTestPolicy::Kind::explicit_tests:
      return problem;
    case PublicTestPolicy::Kind::first_private: take = 1; break;
    case PublicTestPolicy::Kind::first_n_private: take = policy.n; break;
  }
  if (take == 0 || problem.private_tests.size() < take) {
    throw Error(Errc::insufficient_tests,
                problem.id + ": policy " + policy.to_string() + " needs " + std::to_string(take) +
                    " private tests, have " + std::to_string(problem.private_tests.size()));
  }
  problem.public_tests.assign(problem.private_tests.begin(),
                              problem.private_tests.begin() + static_cast<std::ptrdiff_t>(take));
  return problem;
}

namespace {

std::vector<TestCase> tests_from_json(const json& arr, TestMode mode) {
  std::vector<TestCase> out;
  if (arr.is_null()) return out;
  if (!arr.is_array()) throw Error(Errc::parse_error, "tests must be an array");
  for (const auto& item : arr) {
    TestCase tc;
    tc.mode = mode;
    tc.input = item.at("input").get<std::string>();
    if (auto it = item.find("output"); it != item.end() && !it->is_null()) {
      tc.expected_output = it->get<std::string>();
    }
    out.push_back(std::move(tc));
  }
  return out;
}

json tests_to_json(const std::vector<TestCase>& tests) {
  json arr = json::array();
  for (const auto& tc : tests) {
    json item = {{"input", tc.input}};
    item["output"] = tc.expected_output ? json(*tc.expected_output) : json(nullptr);
    arr.push_back(std::move(item));
  }
  return arr;
}

}  // namespace

Problem parse_problem_record(std::string_view line, Seconds default_time_limit) {
  json record;
  try {
    record = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(Errc::parse_error, e.what());
  }
  if (!record.is_object()) throw Error(Errc::parse_error, "record is not a JSON object");
  try {
    Problem p;
    p.time_limit = default_time_limit;
    p.id = record.at("id").get<std::string>();
    p.description = record.at("description").get<std::string>();
    if (auto it = record.find("entry_point"); it != record.end() && !it->is_null()) {
      p.entry_point = it->get<std::string>();
    }
    TestMode mode = test_mode_from_string(record.value("mode", std::string("stdio")));
    p.public_tests = tests_from_json(record.value("public_tests", json()), mode);
    p.private_tests = tests_from_json(record.value("private_tests", json()), mode);
    if (auto it = record.find("time_limit_s"); it != record.end() && !it->is_null()) {
      p.time_limit = Seconds(it->get<double>());
    }
    if (auto it = record.find("language"); it != record.end() && !it->is_null()) {
      p.language_profile_id = it->get<std::string>();
    }
    return p;
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, e.what());
  }
}

std::string problem_record(const Problem& problem) {
  json record;
  record["id"] = problem.id;
  record["description"] = problem.description;
  record["entry_point"] = problem.entry_point ? json(*problem.entry_point) : json(nullptr);
  record["mode"] = std::string(to_string(problem.mode()));
  record["public_tests"] = tests_to_json(problem.public_tests);
  record["private_tests"] = tests_to_json(problem.private_tests);
  record["time_limit_s"] = problem.time_limit.count();
  record["language"] = problem.language_profile_id;
  return record.dump();
}

Benchmark load_benchmark(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot read " + path.string());

  Benchmark bench;
  bench.name = path.stem().string();
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Problem p;
    try {
      p = parse_problem_record(line, options.default_time_limit);
    } catch (const Error& e) {
      throw Error(Errc::parse_error, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(p.id).second) throw Error(Errc::duplicate_id, p.id);
    p = derive_public_tests(std::move(p), options.policy);
    validate(p);
    bench.problems.push_back(std::move(p));
  }
  if (bench.problems.empty()) throw Error(Errc::non_empty_required, path.string() + " has no problems");
  return bench;
}

void save_benchmark(const Benchmark& benchmark, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  for (const auto& p : benchmark.problems) out << problem_record(p) << '\n';
}

}  // namespace pairgen
