#include "pairgen/cli.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "pairgen/error.hpp"
#include "pairgen/http_backend.hpp"
#include "pairgen/scripted_backend.hpp"

namespace pairgen {

namespace fs = std::filesystem;

void RunConfig::validate() const {
  session.validate();
  if (benchmark.empty()) throw Error(Errc::config_error, "--benchmark is required");
  if (parallel == 0) throw Error(Errc::config_error, "--parallel must be at least 1");
  if (!allow_exec) {
    throw Error(Errc::config_error,
                "refusing to execute model-generated code; pass --allow-exec to run candidates in the sandbox");
  }
  if (backend == BackendKind::scripted) {
    if (!fixture) throw Error(Errc::config_error, "the scripted backend needs --fixture");
  } else {
    if (endpoint.empty()) throw Error(Errc::config_error, "the live backend needs --endpoint");
    if (model.empty()) throw Error(Errc::config_error, "the live backend needs --model");
    if (api_key.empty()) {
      const char* env = std::getenv(kApiKeyEnv);
      if (env == nullptr || *env == '\0') {
        throw Error(Errc::config_error, std::string("missing credential: set ") + kApiKeyEnv);
      }
    }
  }
  if (retry.max_attempts < 1) throw Error(Errc::config_error, "--max-attempts must be at least 1");
}

std::string trace_file_name(const std::string& problem_id) {
  std::string name;
  for (char c : problem_id) {
    const bool safe = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                      c == '_' || c == '.';
    name += safe ? c : '_';
  }
  if (name.empty() || name.front() == '.') name.insert(name.begin(), '_');
  return name + ".jsonl";
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << content)) throw Error(Errc::io_error, "cannot write " + path.string());
}

struct Outcome {
  SessionTrace trace;
  ProblemVerdict verdict;
};

}  // namespace

int cmd_run(const RunConfig& config, std::ostream& out) {
  config.validate();

  LoadOptions load;
  load.policy = config.policy;
  load.default_time_limit = config.session.time_limit;
  const Benchmark bench = load_benchmark(config.benchmark, load);
  for (const auto& p : bench.problems) {
    if (p.private_tests.empty()) throw Error(Errc::insufficient_tests, p.id + ": no private tests to judge against");
  }

  const PromptLibrary prompts = config.template_dir ? PromptLibrary::load(*config.template_dir) : PromptLibrary::builtin();
  const ProfileRegistry profiles = config.profiles ? ProfileRegistry::load(*config.profiles) : ProfileRegistry();
  for (const auto& p : bench.problems) profiles.at(p.language_profile_id);

  std::shared_ptr<const Fixture> fixture;
  std::shared_ptr<ChatBackend> live;
  if (config.backend == BackendKind::scripted) {
    fixture = std::make_shared<const Fixture>(Fixture::load(*config.fixture));
  } else {
    HttpBackendConfig http;
    http.endpoint = config.endpoint;
    http.model = config.model;
    http.embedding_model = config.embedding_model.empty() ? config.model : config.embedding_model;
    http.api_key = config.api_key.empty() ? std::getenv(kApiKeyEnv) : config.api_key;
    live = std::make_shared<HttpBackend>(std::move(http));
  }

  const std::size_t n = bench.problems.size();
  std::vector<Outcome> outcomes(n);
  std::vector<std::exception_ptr> failures(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};

  auto worker = [&] {
    for (;;) {
      if (abort.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      const Problem& problem = bench.problems[i];
      try {
        std::shared_ptr<ChatBackend> backend = live;
        if (!backend) backend = std::make_shared<ScriptedBackend>(fixture);
        Gateway gateway(backend, config.retry);
        SessionConfig sc = config.session;
        sc.time_limit = problem.time_limit;
        SessionEnvironment env;
        env.prompts = &prompts;
        env.profile = &profiles.at(problem.language_profile_id);
        SessionResult result = run_session(problem, gateway, sc, env);
        spdlog::info("{}: {} after {} iteration(s)", problem.id, result.solved_public ? "solved" : "unsolved",
                     result.iterations_used);
        outcomes[i].verdict = judge(problem, result, *env.profile, problem.time_limit);
        outcomes[i].trace = std::move(result.trace);
      } catch (...) {
        failures[i] = std::current_exception();
        abort.store(true);
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t workers = std::min(config.parallel, n);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  fs::create_directories(config.out_dir);
  fs::create_directories(config.traces());
  std::vector<ProblemVerdict> verdicts;
  for (const auto& o : outcomes) {
    write_file(config.traces() / trace_file_name(o.trace.problem_id), trace_jsonl(o.trace));
    verdicts.push_back(o.verdict);
  }
  write_verdicts(verdicts, config.out_dir / "verdicts.jsonl");
  const BenchmarkReport report = aggregate(verdicts);
  const std::string text = render_report(report, ReportFormat::text_table);
  write_file(config.out_dir / "report.json", render_report(report, ReportFormat::json));
  write_file(config.out_dir / "report.txt", text);
  out << text;
  return 0;
}

int cmd_replay(const fs::path& trace_path, std::ostream& out) {
  out << narrate(read_trace(trace_path));
  return 0;
}

int cmd_eval(const fs::path& verdicts_path, ReportFormat format, std::ostream& out) {
  const auto verdicts = read_verdicts(verdicts_path);
  out << render_report(aggregate(verdicts), format);
  return 0;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Plan-switching pair-programming code generation"};
  app.set_config("--config", "", "TOML/INI configuration file");
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->envname("PAIRGEN_LOG_LEVEL");

  RunConfig rc;
  std::string backend = "scripted";
  std::string policy = "explicit";
  std::string fixture, trace_dir, template_dir, profiles;
  double time_limit = kDefaultTimeLimit.count();
  int backoff_ms = static_cast<int>(rc.retry.initial_backoff.count());

  auto* run = app.add_subcommand("run", "Run sessions over a benchmark and write a run directory");
  run->add_option("--benchmark", rc.benchmark, "JSONL benchmark file")->envname("PAIRGEN_BENCHMARK");
  run->add_option("--backend", backend, "live|scripted")
      ->check(CLI::IsMember({"live", "scripted"}))
      ->envname("PAIRGEN_BACKEND");
  run->add_option("--fixture", fixture, "Scripted backend fixture")->envname("PAIRGEN_FIXTURE");
  run->add_option("--out", rc.out_dir, "Run directory")->envname("PAIRGEN_OUT");
  run->add_option("--trace-dir", trace_dir, "Trace directory (default <out>/traces)");
  run->add_option("--seed", rc.session.seed, "Clustering seed")->envname("PAIRGEN_SEED");
  run->add_option("--max-iters", rc.session.max_iterations, "Iteration budget r");
  run->add_option("--plans", rc.session.num_plans, "Plans sampled per problem");
  run->add_option("--clusters", rc.session.num_clusters, "Candidate plans kept after clustering");
  run->add_option("--batch-size", rc.session.batch_size, "Plans requested per call");
  run->add_option("--plan-temperature", rc.session.plan_temperature, "Sampling temperature for plans");
  run->add_option("--time-limit", time_limit, "Per-case time limit in seconds");
  run->add_option("--public-test-policy", policy, "explicit|first_private|first_n:<n>");
  run->add_option("--templates", template_dir, "Directory overriding prompt templates");
  run->add_option("--profiles", profiles, "Language profile registry (JSON)");
  run->add_option("--parallel", rc.parallel, "Concurrent sessions")->envname("PAIRGEN_PARALLEL");
  run->add_flag("--allow-exec", rc.allow_exec, "Permit executing model-generated code");
  run->add_option("--endpoint", rc.endpoint, "Chat API base URL")->envname("PAIRGEN_ENDPOINT");
  run->add_option("--model", rc.model, "Chat model name")->envname("PAIRGEN_MODEL");
  run->add_option("--embedding-model", rc.embedding_model, "Embedding model name")
      ->envname("PAIRGEN_EMBEDDING_MODEL");
  run->add_option("--max-attempts", rc.retry.max_attempts, "Attempts per model call");
  run->add_option("--retry-backoff-ms", backoff_ms, "Initial retry backoff");

  std::string replay_path;
  auto* replay = app.add_subcommand("replay", "Print the narrative of a session trace");
  replay->add_option("trace", replay_path, "Trace file")->required();

  std::string verdicts_path;
  std::string format = "text";
  auto* eval = app.add_subcommand("eval", "Recompute the report from stored verdicts");
  eval->add_option("verdicts", verdicts_path, "verdicts.jsonl")->required();
  eval->add_option("--format", format, "text|json")->check(CLI::IsMember({"text", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    spdlog::set_level(spdlog::level::from_str(log_level));
    if (*run) {
      rc.backend = backend == "live" ? BackendKind::live : BackendKind::scripted;
      if (!fixture.empty()) rc.fixture = fixture;
      if (!trace_dir.empty()) rc.trace_dir = trace_dir;
      if (!template_dir.empty()) rc.template_dir = template_dir;
      if (!profiles.empty()) rc.profiles = profiles;
      rc.policy = PublicTestPolicy::parse(policy);
      rc.session.time_limit = Seconds(time_limit);
      rc.retry.initial_backoff = std::chrono::milliseconds(backoff_ms);
      return cmd_run(rc, out);
    }
    if (*replay) return cmd_replay(replay_path, out);
    return cmd_eval(verdicts_path, report_format_from_string(format), out);
  } catch (const Error& e) {
    err << "pairgen: " << e.what() << '\n';
    return e.code() == Errc::config_error ? 2 : 1;
  } catch (const std::exception& e) {
    err << "pairgen: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace pairgen
