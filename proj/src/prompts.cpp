#include "pairgen/prompts.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "pairgen/error.hpp"

namespace pairgen {

namespace detail {
const std::map<std::string, std::string>& builtin_template_sources();
}

namespace {

struct TemplateSpec {
  const char* name;
  Step step;
  std::optional<FeedbackKind> variant;
  std::set<std::string> slots;
};

const std::vector<TemplateSpec>& template_specs() {
  static const std::vector<TemplateSpec> specs{
      {"reflect", Step::reflect, std::nullopt, {"problem"}},
      {"plan", Step::plan, std::nullopt, {"problem", "reflection", "count"}},
      {"select", Step::select, std::nullopt, {"problem", "reflection", "candidates", "count"}},
      {"analyze_runtime_error", Step::analyze, FeedbackKind::runtime_error, {"problem", "code", "feedback"}},
      {"analyze_wrong_answer", Step::analyze, FeedbackKind::wrong_answer, {"problem", "code", "feedback"}},
      {"analyze_time_limit", Step::analyze, FeedbackKind::time_limit_exceeded, {"problem", "code", "feedback"}},
      {"code", Step::code, std::nullopt, {"problem", "plan", "language", "io_instructions"}},
      {"repair", Step::repair, std::nullopt,
       {"problem", "code", "feedback", "strategy", "language", "io_instructions"}},
  };
  return specs;
}

const TemplateSpec& spec_for(Step step, std::optional<FeedbackKind> variant) {
  for (const auto& s : template_specs()) {
    if (s.step == step && s.variant == variant) return s;
  }
  throw Error(Errc::template_error, "no template for step " + std::string(to_string(step)));
}

std::set<std::string> slots_in(std::string_view text) {
  std::set<std::string> found;
  for (std::size_t pos = text.find("{{"); pos != std::string_view::npos; pos = text.find("{{", pos + 2)) {
    auto end = text.find("}}", pos + 2);
    if (end == std::string_view::npos) break;
    found.emplace(text.substr(pos + 2, end - pos - 2));
  }
  return found;
}

// Single left-to-right pass; inserted values are never rescanned.
std::string fill(std::string_view body, const std::map<std::string, std::string_view>& slots) {
  std::string out;
  std::size_t pos = 0;
  while (pos < body.size()) {
    auto open = body.find("{{", pos);
    if (open == std::string_view::npos) break;
    auto close = body.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    out.append(body.substr(pos, open - pos));
    std::string name(body.substr(open + 2, close - open - 2));
    if (auto it = slots.find(name); it != slots.end()) {
      out.append(it->second);
    } else {
      out.append(body.substr(open, close + 2 - open));
    }
    pos = close + 2;
  }
  out.append(body.substr(pos));
  return out;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    auto line = text.substr(start, nl == std::string_view::npos ? text.size() - start : nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return lines;
}

void require_non_empty(std::string_view value, const char* what) {
  if (value.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw Error(Errc::empty_input, std::string(what) + " must not be empty");
  }
}

}  // namespace

std::string PromptTemplate::name() const { return spec_for(step, feedback_variant).name; }

PromptTemplate PromptTemplate::parse(Step step, std::optional<FeedbackKind> variant, std::string_view source) {
  const auto& spec = spec_for(step, variant);
  PromptTemplate t;
  t.step = step;
  t.feedback_variant = variant;
  std::string* section = nullptr;
  for (auto line : split_lines(source)) {
    std::string marker = trim(line);
    if (marker == "[system]") {
      section = &t.system;
      continue;
    }
    if (marker == "[user]") {
      section = &t.user;
      continue;
    }
    if (!section) {
      if (marker.empty()) continue;
      section = &t.user;
    }
    *section += line;
    *section += '\n';
  }
  t.system = trim(t.system);
  t.user = trim(t.user);
  if (t.user.empty()) throw Error(Errc::template_error, std::string(spec.name) + ": empty [user] section");

  std::set<std::string> used = slots_in(t.system);
  used.merge(slots_in(t.user));
  for (const auto& s : spec.slots) {
    if (!used.count(s)) {
      throw Error(Errc::template_error, std::string(spec.name) + ": missing slot {{" + s + "}}");
    }
  }
  for (const auto& s : used) {
    if (!spec.slots.count(s)) {
      throw Error(Errc::template_error, std::string(spec.name) + ": unknown slot {{" + s + "}}");
    }
  }
  return t;
}

std::string CodeTarget::io_instructions() const {
  if (mode == TestMode::stdio) {
    return "Read all input from standard input and write the answer to standard output, printing nothing "
           "else.";
  }
  if (entry_point) {
    return "Implement the function `" + *entry_point +
           "` with exactly the signature the problem describes; tests call it directly. Do not read from "
           "standard input.";
  }
  return "Implement the functions the problem describes; tests call them directly. Do not read from "
         "standard input.";
}

CodeTarget code_target(const Problem& problem, const LanguageProfile& profile) {
  CodeTarget t;
  t.language = profile.display_name.empty() ? profile.id : profile.display_name;
  t.mode = problem.mode();
  t.entry_point = problem.entry_point;
  return t;
}

std::string problem_statement(const Problem& problem) {
  std::string out = trim(problem.description);
  if (problem.public_tests.empty()) return out;
  out += "\n\nPublic test cases:";
  for (std::size_t i = 0; i < problem.public_tests.size(); ++i) {
    const auto& tc = problem.public_tests[i];
    out += "\n\nTest " + std::to_string(i + 1) + ":\n";
    if (tc.mode == TestMode::stdio) {
      out += "Input:\n" + tc.input;
      if (!tc.input.empty() && tc.input.back() != '\n') out += '\n';
      out += "Expected output:\n" + tc.expected_output.value_or("");
    } else {
      out += tc.input;
    }
  }
  return out;
}

std::string render_feedback(const Feedback& feedback, std::size_t max_cases) {
  auto failing = feedback.failing_cases();
  std::string out = "Result: " + std::string(to_string(feedback.kind)) + " (" + std::to_string(failing.size()) +
                    " of " + std::to_string(feedback.cases.size()) + " test cases failed)";
  for (std::size_t i = 0; i < failing.size() && i < max_cases; ++i) {
    const CaseResult& c = *failing[i];
    out += "\n\nFailing test case " + std::to_string(c.case_index + 1) + " (" +
           std::string(to_string(c.status)) + "):\n";
    out += "Input:\n" + c.input + "\n";
    switch (c.status) {
      case CaseStatus::wrong_output:
        if (!c.expected_output.empty()) out += "Expected output:\n" + c.expected_output + "\n";
        out += "Actual output:\n" + c.actual_output;
        if (!c.error_message.empty()) out += "\nMessage:\n" + c.error_message;
        break;
      case CaseStatus::runtime_error:
        out += "Error message:\n" + c.error_message;
        break;
      case CaseStatus::timeout:
        out += "The program did not finish within the time limit.";
        break;
      case CaseStatus::ok:
        break;
    }
  }
  if (failing.size() > max_cases) {
    out += "\n\n(" + std::to_string(failing.size() - max_cases) + " more failing test cases not shown)";
  }
  return out;
}

PromptLibrary PromptLibrary::builtin() {
  PromptLibrary lib;
  const auto& sources = detail::builtin_template_sources();
  for (const auto& spec : template_specs()) {
    lib.templates_[spec.name] = PromptTemplate::parse(spec.step, spec.variant, sources.at(spec.name));
  }
  return lib;
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(Errc::config_error, "template directory not found: " + dir.string());
  }
  PromptLibrary lib = builtin();
  for (const auto& spec : template_specs()) {
    auto path = dir / (std::string(spec.name) + ".txt");
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    lib.templates_[spec.name] = PromptTemplate::parse(spec.step, spec.variant, ss.str());
  }
  return lib;
}

const PromptTemplate& PromptLibrary::get(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw Error(Errc::template_error, "no template '" + name + "'");
  return it->second;
}

ChatRequest PromptLibrary::render(const std::string& name, const std::map<std::string, std::string_view>& slots,
                                  double temperature) const {
  const PromptTemplate& t = get(name);
  ChatRequest req;
  if (!t.system.empty()) req.messages.push_back({Role::system, fill(t.system, slots)});
  req.messages.push_back({Role::user, fill(t.user, slots)});
  req.temperature = temperature;
  req.max_tokens = max_tokens_;
  req.tag = t.step;
  return req;
}

ChatRequest PromptLibrary::render_reflect(std::string_view description) const {
  require_non_empty(description, "problem description");
  return render("reflect", {{"problem", description}}, kGreedyTemperature);
}

ChatRequest PromptLibrary::render_plan(std::string_view description, std::string_view reflection,
                                       std::size_t batch_size, double temperature) const {
  require_non_empty(description, "problem description");
  if (batch_size < 1) throw Error(Errc::empty_input, "batch size must be at least 1");
  const std::string count = std::to_string(batch_size);
  return render("plan", {{"problem", description}, {"reflection", reflection}, {"count", count}}, temperature);
}

ChatRequest PromptLibrary::render_select(std::string_view description, std::string_view reflection,
                                         std::span<const std::string> candidates) const {
  if (candidates.empty()) throw Error(Errc::empty_candidates, "no candidate plans to select from");
  std::string listing;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (i) listing += "\n\n";
    listing += "Plan " + std::to_string(i + 1) + ":\n" + trim(candidates[i]);
  }
  const std::string count = std::to_string(candidates.size());
  return render("select",
                {{"problem", description}, {"reflection", reflection}, {"candidates", listing}, {"count", count}},
                kGreedyTemperature);
}

ChatRequest PromptLibrary::render_analyze(std::string_view description, std::string_view code,
                                          const Feedback& feedback) const {
  if (feedback.kind == FeedbackKind::pass) {
    throw Error(Errc::invalid_feedback_kind, "cannot analyze passing code");
  }
  const std::string fb = render_feedback(feedback);
  const std::string name = spec_for(Step::analyze, feedback.kind).name;
  return render(name, {{"problem", description}, {"code", code}, {"feedback", fb}}, kGreedyTemperature);
}

ChatRequest PromptLibrary::render_code(std::string_view description, std::string_view plan,
                                       const CodeTarget& target) const {
  require_non_empty(description, "problem description");
  require_non_empty(plan, "plan");
  const std::string io = target.io_instructions();
  return render("code",
                {{"problem", description}, {"plan", plan}, {"language", target.language}, {"io_instructions", io}},
                kGreedyTemperature);
}

ChatRequest PromptLibrary::render_repair(std::string_view description, std::string_view code,
                                         const Feedback& feedback, std::string_view strategy,
                                         const CodeTarget& target) const {
  if (feedback.kind == FeedbackKind::pass) {
    throw Error(Errc::invalid_feedback_kind, "cannot repair passing code");
  }
  if (strategy.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw Error(Errc::empty_strategy, "repair strategy is empty");
  }
  const std::string fb = render_feedback(feedback);
  const std::string io = target.io_instructions();
  return render("repair",
                {{"problem", description},
                 {"code", code},
                 {"feedback", fb},
                 {"strategy", strategy},
                 {"language", target.language},
                 {"io_instructions", io}},
                kGreedyTemperature);
}

namespace {

struct ListMarker {
  std::size_t indent = 0;
  int style = 0;  // 0: "N." 1: "N)" 2: "Plan N"
  long number = 0;
  std::string rest;
};

std::optional<ListMarker> list_marker(std::string_view line) {
  static const std::regex kMarker(
      R"(^([ \t]*)(?:#+[ \t]*)?(?:[*_]{1,2})?(?:([Pp]lan|PLAN)[ \t]+(\d+)[ \t]*[:.)\-]?|(\d+)([.)])(?=\s|$|[*_]))(?:[*_]{1,2})?[ \t]*(.*)$)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_match(line.begin(), line.end(), m, kMarker)) return std::nullopt;
  ListMarker mk;
  mk.indent = static_cast<std::size_t>(m.length(1));
  std::string digits;
  if (m[2].matched) {
    mk.style = 2;
    digits = m[3].str();
  } else {
    mk.style = m[5].str() == "." ? 0 : 1;
    digits = m[4].str();
  }
  auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), mk.number);
  if (ec != std::errc{}) return std::nullopt;
  mk.rest = m[6].str();
  return mk;
}

}  // namespace

std::vector<std::string> parse_plans(std::string_view model_output) {
  std::vector<std::string> raw;
  std::optional<ListMarker> first;
  long expected = 0;
  std::string current;
  bool in_item = false;
  for (auto line : split_lines(model_output)) {
    auto mk = list_marker(line);
    bool starts_item = false;
    if (mk) {
      if (!first) {
        first = mk;
        starts_item = true;
      } else {
        starts_item = mk->indent == first->indent && mk->style == first->style && mk->number == expected;
      }
    }
    if (starts_item) {
      if (in_item) raw.push_back(current);
      current = mk->rest;
      in_item = true;
      expected = mk->number + 1;
    } else if (in_item) {
      current += '\n';
      current += line;
    }
  }
  if (in_item) raw.push_back(current);

  std::vector<std::string> plans;
  for (const auto& item : raw) {
    std::string t = trim(item);
    if (!t.empty()) plans.push_back(std::move(t));
  }
  if (plans.empty()) throw Error(Errc::no_plans_found, "model output contains no numbered plans");
  return plans;
}

std::size_t parse_selection(std::string_view model_output, std::size_t k) {
  if (k < 1) throw Error(Errc::selection_unparsable, "k must be at least 1");
  std::size_t i = 0;
  while (i < model_output.size()) {
    if (model_output[i] < '0' || model_output[i] > '9') {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < model_output.size() && model_output[j] >= '0' && model_output[j] <= '9') ++j;
    std::size_t value = 0;
    auto [p, ec] = std::from_chars(model_output.data() + i, model_output.data() + j, value);
    if (ec == std::errc{} && value >= 1 && value <= k) return value;
    i = j;
  }
  throw Error(Errc::selection_unparsable,
              "no plan index in 1.." + std::to_string(k) + " found in '" +
                  std::string(model_output.substr(0, 80)) + "'");
}

namespace {

bool is_blank(std::string_view line) { return line.find_first_not_of(" \t") == std::string_view::npos; }

bool plausible_code_line(std::string_view line) {
  if (is_blank(line)) return false;
  if (line.front() == ' ' || line.front() == '\t') return true;
  static const std::regex kBlock(
      R"(^(async\s+def|def|class|if|elif|else|for|while|try|except|finally|with)\b.*:\s*(#.*)?$)");
  static const std::regex kStatement(
      R"(^((import|from)\s+[A-Za-z_][A-Za-z0-9_.]*|(return|raise|assert|yield|pass|break|continue|global|nonlocal)\b).*)");
  static const std::regex kOther(R"(^(#|@|\}|\{|//)|^[A-Za-z_][A-Za-z0-9_.\[\]]*(\s*[-+*/%|&^]?=[^=]|\(|\[)|[;{]\s*$)");
  std::string s(line);
  return std::regex_match(s, kBlock) || std::regex_match(s, kStatement) || std::regex_search(s, kOther);
}

std::string join_trimmed(const std::vector<std::string_view>& lines, std::size_t begin, std::size_t end) {
  while (begin < end && is_blank(lines[begin])) ++begin;
  while (end > begin && is_blank(lines[end - 1])) --end;
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out += '\n';
    out += lines[i];
  }
  return out;
}

}  // namespace

std::string extract_code(std::string_view model_output) {
  auto lines = split_lines(model_output);
  auto is_fence = [](std::string_view line) {
    auto b = line.find_first_not_of(" \t");
    return b != std::string_view::npos && line.substr(b, 3) == "```";
  };
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!is_fence(lines[i])) continue;
    std::size_t j = i + 1;
    while (j < lines.size() && !is_fence(lines[j])) ++j;
    std::string body = join_trimmed(lines, i + 1, j);
    if (!body.empty()) return body;
    i = j;
  }

  // No fenced block: longest run of code-looking lines, blank lines allowed
  // inside a run.
  std::size_t best_begin = 0, best_len = 0;
  std::size_t i = 0;
  while (i < lines.size()) {
    if (!plausible_code_line(lines[i])) {
      ++i;
      continue;
    }
    std::size_t begin = i, last_code = i;
    std::size_t j = i + 1;
    while (j < lines.size() && (plausible_code_line(lines[j]) || is_blank(lines[j]))) {
      if (!is_blank(lines[j])) last_code = j;
      ++j;
    }
    std::size_t len = last_code - begin + 1;
    if (len > best_len) {
      best_begin = begin;
      best_len = len;
    }
    i = j;
  }
  if (best_len == 0) throw Error(Errc::no_code_found, "model output contains no code");
  return join_trimmed(lines, best_begin, best_begin + best_len);
}

}  // namespace pairgen
