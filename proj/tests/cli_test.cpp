#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "pairgen/cli.hpp"
#include "pairgen/error.hpp"
#include "pairgen/http_backend.hpp"
#include "test_support.hpp"

using namespace pairgen;
using pairgen::testing::ScratchDir;
using pairgen::testing::slurp;

namespace {

RunConfig toy_config(const std::filesystem::path& out) {
  RunConfig c;
  c.benchmark = pairgen::testing::fixture_path("toy.jsonl");
  c.fixture = pairgen::testing::fixture_path("toy_fixture.json");
  c.out_dir = out;
  c.allow_exec = true;
  return c;
}

int cli(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  args.insert(args.begin(), "pairgen");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int rc = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return rc;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::io_error;
}

}  // namespace

TEST(Cli, RunWritesRunDirectory) {
  ScratchDir dir;
  std::ostringstream out;
  EXPECT_EQ(cmd_run(toy_config(dir / "run"), out), 0);
  for (const char* id : {"max-gap", "sum-two", "is-even"}) {
    const auto trace = dir / "run" / "traces" / (std::string(id) + ".jsonl");
    ASSERT_TRUE(std::filesystem::exists(trace)) << trace;
    EXPECT_EQ(slurp(trace), slurp(pairgen::testing::golden_path(std::string(id) + ".jsonl"))) << id;
  }
  EXPECT_EQ(slurp(dir / "run" / "verdicts.jsonl"), slurp(pairgen::testing::golden_path("toy_verdicts.jsonl")));
  EXPECT_EQ(slurp(dir / "run" / "report.json"), slurp(pairgen::testing::golden_path("toy_report.json")));
  EXPECT_EQ(slurp(dir / "run" / "report.txt"), out.str());
  EXPECT_NE(out.str().find("66.67"), std::string::npos);
}

TEST(Cli, RunRefusesWithoutAllowExec) {
  ScratchDir dir;
  RunConfig c = toy_config(dir / "run");
  c.allow_exec = false;
  std::ostringstream out;
  EXPECT_EQ(code_of([&] { cmd_run(c, out); }), Errc::config_error);
  EXPECT_FALSE(std::filesystem::exists(dir / "run"));

  std::string err;
  EXPECT_EQ(cli({"run", "--benchmark", c.benchmark.string(), "--fixture", c.fixture->string()}, nullptr, &err), 2);
  EXPECT_NE(err.find("--allow-exec"), std::string::npos);
}

TEST(Cli, LiveBackendNeedsCredential) {
  ScratchDir dir;
  RunConfig c = toy_config(dir / "run");
  c.backend = BackendKind::live;
  c.endpoint = "http://127.0.0.1:9/v1";
  c.model = "m";
  const char* saved = std::getenv(kApiKeyEnv);
  std::string keep = saved ? saved : "";
  ::unsetenv(kApiKeyEnv);
  std::ostringstream out;
  EXPECT_EQ(code_of([&] { cmd_run(c, out); }), Errc::config_error);
  if (saved) ::setenv(kApiKeyEnv, keep.c_str(), 1);
  EXPECT_FALSE(std::filesystem::exists(dir / "run"));
}

TEST(Cli, ScriptedBackendNeedsFixture) {
  ScratchDir dir;
  RunConfig c = toy_config(dir / "run");
  c.fixture.reset();
  std::ostringstream out;
  EXPECT_EQ(code_of([&] { cmd_run(c, out); }), Errc::config_error);
}

TEST(Cli, FixtureMissIsInfrastructureError) {
  ScratchDir dir;
  pairgen::testing::spit(dir / "fx.json", R"([{"tag":"reflect","text":"r"}])");
  RunConfig c = toy_config(dir / "run");
  c.fixture = dir / "fx.json";
  std::string err;
  EXPECT_EQ(cli({"run", "--benchmark", c.benchmark.string(), "--fixture", c.fixture->string(), "--allow-exec",
                 "--out", (dir / "run").string()},
                nullptr, &err),
            1);
  EXPECT_NE(err.find("FixtureMiss"), std::string::npos) << err;
}

TEST(Cli, CommandLineRunMatchesLibraryRun) {
  ScratchDir dir;
  const auto c = toy_config(dir / "unused");
  std::string out;
  ASSERT_EQ(cli({"run", "--benchmark", c.benchmark.string(), "--fixture", c.fixture->string(), "--allow-exec",
                 "--out", (dir / "a").string(), "--parallel", "2"},
                &out),
            0);
  EXPECT_EQ(slurp(dir / "a" / "report.json"), slurp(pairgen::testing::golden_path("toy_report.json")));
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
  ScratchDir dir;
  const auto c = toy_config(dir / "unused");
  pairgen::testing::spit(dir / "cfg.toml", "[run]\nbenchmark = \"" + c.benchmark.string() + "\"\nfixture = \"" +
                                               c.fixture->string() + "\"\nallow-exec = true\nmax-iters = 1\nout = \"" +
                                               (dir / "cfg").string() + "\"\n");
  ASSERT_EQ(cli({"--config", (dir / "cfg.toml").string(), "run"}), 0);
  auto from_file = read_verdicts(dir / "cfg" / "verdicts.jsonl");
  for (const auto& v : from_file) EXPECT_EQ(v.iterations_used, 1);

  ASSERT_EQ(cli({"--config", (dir / "cfg.toml").string(), "run", "--max-iters", "10"}), 0);
  EXPECT_EQ(slurp(dir / "cfg" / "report.json"), slurp(pairgen::testing::golden_path("toy_report.json")));
}

TEST(Cli, EvalRecomputesReport) {
  std::string text, json;
  EXPECT_EQ(cli({"eval", pairgen::testing::golden_path("toy_verdicts.jsonl").string()}, &text), 0);
  EXPECT_NE(text.find("pass@1 (%)"), std::string::npos);
  EXPECT_EQ(cli({"eval", pairgen::testing::golden_path("toy_verdicts.jsonl").string(), "--format", "json"}, &json), 0);
  EXPECT_EQ(json, slurp(pairgen::testing::golden_path("toy_report.json")));

  ScratchDir dir;
  pairgen::testing::spit(dir / "empty.jsonl", "");
  std::string err;
  EXPECT_EQ(cli({"eval", (dir / "empty.jsonl").string()}, nullptr, &err), 1);
  EXPECT_NE(err.find("EmptyInput"), std::string::npos) << err;
}

TEST(Cli, ReplayGoldenTraces) {
  for (const char* id : {"max-gap", "sum-two", "is-even"}) {
    std::string out;
    EXPECT_EQ(cli({"replay", pairgen::testing::golden_path(std::string(id) + ".jsonl").string()}, &out), 0) << id;
    EXPECT_NE(out.find("iteration 1:"), std::string::npos);
  }
  ScratchDir dir;
  std::string golden = slurp(pairgen::testing::golden_path("max-gap.jsonl"));
  pairgen::testing::spit(dir / "cut.jsonl", golden.substr(0, golden.size() / 2));
  std::string err;
  EXPECT_EQ(cli({"replay", (dir / "cut.jsonl").string()}, nullptr, &err), 1);
  EXPECT_NE(err.find("ParseError"), std::string::npos);
  EXPECT_NE(err.find("byte offset"), std::string::npos);
}

TEST(Cli, UsageErrors) {
  std::string err;
  EXPECT_NE(cli({}, nullptr, &err), 0);
  EXPECT_NE(cli({"run", "--backend", "magic"}, nullptr, &err), 0);
  EXPECT_EQ(cli({"run", "--allow-exec", "--fixture", "x", "--benchmark", "b", "--public-test-policy", "most"},
                nullptr, &err),
            2);
}

TEST(Cli, TraceFileNames) {
  EXPECT_EQ(trace_file_name("HumanEval/12"), "HumanEval_12.jsonl");
  EXPECT_EQ(trace_file_name("../x"), "_.._x.jsonl");
  EXPECT_EQ(trace_file_name("a-b_c.1"), "a-b_c.1.jsonl");
}
