#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>

#include "pairgen/error.hpp"
#include "pairgen/fingerprint.hpp"
#include "pairgen/sandbox.hpp"
#include "test_support.hpp"

using namespace pairgen;
using pairgen::testing::ScratchDir;
using pairgen::testing::spit;

namespace {

TestCase io(std::string in, std::string out) { return {std::move(in), std::move(out), TestMode::stdio}; }
TestCase check(std::string snippet) { return {std::move(snippet), std::nullopt, TestMode::assertion}; }

Feedback run(std::string_view code, std::vector<TestCase> tests, double limit = 3.0,
             std::optional<std::string> entry = std::nullopt) {
  return run_tests(code, tests, default_python_profile(), Seconds(limit), entry);
}

}  // namespace

TEST(Normalize, TrailingWhitespaceAndLineEndings) {
  EXPECT_EQ(normalize_output("1 2  \r\n3\t\n\n\n"), "1 2\n3");
  EXPECT_EQ(normalize_output(""), "");
  EXPECT_EQ(normalize_output("\n\n"), "");
  EXPECT_EQ(normalize_output("  a"), "  a");
  EXPECT_NE(normalize_output("a\n\nb"), normalize_output("a\nb"));
}

TEST(Aggregate, Precedence) {
  using S = CaseStatus;
  auto agg = [](std::vector<S> v) { return aggregate_kind(v); };
  EXPECT_EQ(agg({}), FeedbackKind::pass);
  EXPECT_EQ(agg({S::ok, S::ok}), FeedbackKind::pass);
  EXPECT_EQ(agg({S::timeout, S::ok}), FeedbackKind::time_limit_exceeded);
  EXPECT_EQ(agg({S::timeout, S::wrong_output}), FeedbackKind::wrong_answer);
  EXPECT_EQ(agg({S::wrong_output, S::runtime_error, S::timeout}), FeedbackKind::runtime_error);
}

TEST(KindNames, RoundTrip) {
  for (auto k : {FeedbackKind::pass, FeedbackKind::runtime_error, FeedbackKind::wrong_answer,
                 FeedbackKind::time_limit_exceeded}) {
    EXPECT_EQ(feedback_kind_from_string(to_string(k)), k);
  }
  EXPECT_EQ(to_string(FeedbackKind::time_limit_exceeded), "TimeLimitExceeded");
  for (auto s : {CaseStatus::ok, CaseStatus::wrong_output, CaseStatus::runtime_error, CaseStatus::timeout}) {
    EXPECT_EQ(case_status_from_string(to_string(s)), s);
  }
}

TEST(Sandbox, StdioPassAndWrongAnswer) {
  const char* code = "a, b = map(int, input().split())\nprint(a + b)\n";
  Feedback ok = run(code, {io("1 2\n", "3\n"), io("5 5", "10")});
  EXPECT_EQ(ok.kind, FeedbackKind::pass);
  ASSERT_EQ(ok.cases.size(), 2u);
  EXPECT_TRUE(ok.failing_cases().empty());

  Feedback wa = run(code, {io("1 2\n", "3\n"), io("2 2\n", "5\n")});
  EXPECT_EQ(wa.kind, FeedbackKind::wrong_answer);
  ASSERT_EQ(wa.failing_cases().size(), 1u);
  EXPECT_EQ(wa.failing_cases()[0]->case_index, 1u);
  EXPECT_EQ(wa.failing_cases()[0]->actual_output, "4\n");
  EXPECT_EQ(wa.failing_cases()[0]->expected_output, "5\n");
}

TEST(Sandbox, RuntimeErrorKeepsTraceback) {
  Feedback fb = run("raise ValueError('boom')\n", {io("", "")});
  EXPECT_EQ(fb.kind, FeedbackKind::runtime_error);
  EXPECT_NE(fb.cases[0].error_message.find("ValueError: boom"), std::string::npos);
  EXPECT_EQ(fb.cases[0].error_message.find("/tmp/"), std::string::npos);
}

TEST(Sandbox, SignalDeathIsRuntimeError) {
  Feedback fb = run("import os, signal\nos.kill(os.getpid(), signal.SIGKILL)\n", {io("", "")});
  EXPECT_EQ(fb.kind, FeedbackKind::runtime_error);
}

TEST(Sandbox, TimeoutIsEnforced) {
  auto start = std::chrono::steady_clock::now();
  Feedback fb = run("while True:\n    pass\n", {io("", "")}, 0.5);
  auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(fb.kind, FeedbackKind::time_limit_exceeded);
  EXPECT_EQ(fb.cases[0].status, CaseStatus::timeout);
  EXPECT_LT(elapsed, 0.5 + 1.0);
}

TEST(Sandbox, ChildProcessesAreKilledWithTheCandidate) {
  auto start = std::chrono::steady_clock::now();
  Feedback fb = run("import subprocess\nsubprocess.Popen(['sleep', '30'])\nwhile True:\n    pass\n", {io("", "")}, 0.5);
  auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(fb.kind, FeedbackKind::time_limit_exceeded);
  EXPECT_LT(elapsed, 1.5);
}

TEST(Sandbox, LargeInputAndOutputDoNotDeadlock) {
  std::string big(1 << 20, 'x');
  Feedback fb = run("import sys\nsys.stdout.write(sys.stdin.read())\n", {io(big, big)});
  EXPECT_EQ(fb.kind, FeedbackKind::pass);
}

TEST(Sandbox, DetailsAreTruncated) {
  Feedback fb = run("print('y' * 5000)\n", {io("", "n")});
  EXPECT_EQ(fb.kind, FeedbackKind::wrong_answer);
  EXPECT_LE(fb.cases[0].actual_output.size(), kDetailLimit + 64);
}

TEST(Sandbox, EnvironmentIsFilteredAndWorkdirIsPrivate) {
  ::setenv("PAIRGEN_TEST_SECRET", "hunter2", 1);
  Feedback fb = run("import os\nprint(os.environ.get('PAIRGEN_TEST_SECRET'))\nprint(os.getcwd())\n", {io("", "x")});
  ::unsetenv("PAIRGEN_TEST_SECRET");
  ASSERT_EQ(fb.cases.size(), 1u);
  const std::string out = fb.cases[0].actual_output;
  EXPECT_EQ(out.rfind("None\n", 0), 0u) << out;
  std::string cwd = out.substr(5);
  while (!cwd.empty() && cwd.back() == '\n') cwd.pop_back();
  EXPECT_NE(cwd, std::filesystem::current_path().string());
  EXPECT_FALSE(std::filesystem::exists(cwd));
}

TEST(Sandbox, AssertionMode) {
  const char* code = "def add(a, b):\n    return a + b\n";
  Feedback ok = run(code, {check("assert candidate(1, 2) == 3"), check("assert add(0, 0) == 0")}, 3.0, "add");
  EXPECT_EQ(ok.kind, FeedbackKind::pass);

  Feedback wa = run(code, {check("assert candidate(1, 2) == 4")}, 3.0, "add");
  EXPECT_EQ(wa.kind, FeedbackKind::wrong_answer);

  Feedback re = run(code, {check("assert candidate(1) == 1")}, 3.0, "add");
  EXPECT_EQ(re.kind, FeedbackKind::runtime_error);
  EXPECT_NE(re.cases[0].error_message.find("TypeError"), std::string::npos);

  Feedback multi = run(code, {check("x = candidate(2, 2)\nassert x == 4\nassert x > 3")}, 3.0, "add");
  EXPECT_EQ(multi.kind, FeedbackKind::pass);

  Feedback missing = run("def other():\n    pass\n", {check("assert candidate(1, 2) == 3")}, 3.0, "add");
  EXPECT_EQ(missing.kind, FeedbackKind::runtime_error);
}

TEST(Sandbox, AssertionProgramIndentsContinuationLines) {
  std::string prog = render_assertion_program(default_python_profile(), "def f():\n    return 1\n",
                                              "x = candidate()\nassert x == 1", std::string("f"));
  EXPECT_NE(prog.find("candidate = f"), std::string::npos);
  EXPECT_NE(prog.find("    assert x == 1"), std::string::npos);
}

TEST(Sandbox, MissingInterpreterIsSetupError) {
  LanguageProfile p = default_python_profile();
  p.run_command = "definitely-not-an-interpreter-xyz {source}";
  try {
    run_tests("print(1)", std::vector<TestCase>{io("", "1")}, p, Seconds(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::sandbox_setup_error);
  }
}

TEST(Profiles, ValidateAndLoad) {
  LanguageProfile p = default_python_profile();
  EXPECT_NO_THROW(validate(p));
  p.run_command = "python3";
  EXPECT_THROW(validate(p), Error);
  p.run_command = "python3 {source} {source}";
  EXPECT_THROW(validate(p), Error);

  ScratchDir dir;
  spit(dir / "profiles.json",
       R"({"py-opt":{"run_command":"python3 -O {source}","file_extension":".py","version_note":"3.x"}})");
  ProfileRegistry reg = ProfileRegistry::load(dir / "profiles.json");
  EXPECT_EQ(reg.at("py-opt").run_command, "python3 -O {source}");
  EXPECT_EQ(reg.at("python3").id, "python3");
  EXPECT_THROW(reg.at("ruby"), Error);
  spit(dir / "bad.json", R"({"x":{"run_command":"python3","file_extension":".py"}})");
  EXPECT_THROW(ProfileRegistry::load(dir / "bad.json"), Error);
}

TEST(Fingerprint, CodeIgnoresTrailingWhitespaceAndBlankLines) {
  EXPECT_EQ(fingerprint_code("x = 1  \n\n\ny = 2\n"), fingerprint_code("x = 1\ny = 2"));
  EXPECT_NE(fingerprint_code("x = 1\ny = 2"), fingerprint_code("x = 1\n y = 2"));
}

TEST(Fingerprint, FeedbackIgnoresWallTimeAndErrorDetails) {
  Feedback a = pairgen::testing::wrong_answer_feedback("2");
  Feedback b = a;
  b.cases[0].wall_time = Seconds(1.7);
  EXPECT_EQ(fingerprint_feedback(a), fingerprint_feedback(b));
  Feedback c = pairgen::testing::wrong_answer_feedback("3");
  EXPECT_NE(fingerprint_feedback(a), fingerprint_feedback(c));

  Feedback r1;
  r1.kind = FeedbackKind::runtime_error;
  CaseResult cr;
  cr.status = CaseStatus::runtime_error;
  cr.error_message = "Traceback...\n  File \"solution.py\", line 3\nIndexError: list index out of range";
  r1.cases = {cr};
  Feedback r2 = r1;
  r2.cases[0].error_message = "Traceback...\n  File \"solution.py\", line 9\nIndexError: list index out of range";
  EXPECT_EQ(fingerprint_feedback(r1), fingerprint_feedback(r2));
}

TEST(Fingerprint, ErrorClass) {
  EXPECT_EQ(error_class("Traceback\nValueError: invalid literal"), "ValueError");
  EXPECT_EQ(error_class("ZeroDivisionError: division by zero\n"), "ZeroDivisionError");
  EXPECT_EQ(error_class("segfault at 0x7ffd12 code 139"), error_class("segfault at 0x1234 code 11"));
}

TEST(Fingerprint, RealRunsAreStable) {
  const char* code = "print(int(input()) * 2)\n";
  Feedback a = run(code, {io("2\n", "5\n"), io("x\n", "1\n")});
  Feedback b = run(code, {io("2\n", "5\n"), io("x\n", "1\n")});
  EXPECT_EQ(a.kind, FeedbackKind::runtime_error);
  EXPECT_EQ(a.fingerprint, b.fingerprint);
  EXPECT_FALSE(a.fingerprint.empty());
}
