#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "pairgen/eval.hpp"
#include "pairgen/gateway.hpp"
#include "pairgen/problem.hpp"
#include "pairgen/session.hpp"

namespace pairgen {

enum class BackendKind { live, scripted };

struct RunConfig {
  std::filesystem::path benchmark;
  BackendKind backend = BackendKind::scripted;
  std::optional<std::filesystem::path> fixture;
  std::filesystem::path out_dir = "pairgen-run";
  std::optional<std::filesystem::path> trace_dir;  // default: <out_dir>/traces
  SessionConfig session;
  std::optional<std::filesystem::path> template_dir;
  std::optional<std::filesystem::path> profiles;
  std::size_t parallel = 4;
  PublicTestPolicy policy;
  bool allow_exec = false;

  // live backend
  std::string endpoint;
  std::string model;
  std::string embedding_model;
  std::string api_key;  // filled from the environment when empty
  RetryPolicy retry;

  /// Throws Error{config_error}.
  void validate() const;
  std::filesystem::path traces() const { return trace_dir ? *trace_dir : out_dir / "traces"; }
};

/// Runs every problem, then writes traces, verdicts.jsonl and report.{json,txt}.
/// Returns 0 even when problems stay unsolved; configuration and
/// infrastructure failures throw Error.
int cmd_run(const RunConfig& config, std::ostream& out);

/// Prints the iteration narrative of one trace file.
int cmd_replay(const std::filesystem::path& trace_path, std::ostream& out);

/// Recomputes and prints the report from stored verdicts.
int cmd_eval(const std::filesystem::path& verdicts_path, ReportFormat format, std::ostream& out);

/// File name used for a problem's trace; ids may contain path separators.
std::string trace_file_name(const std::string& problem_id);

/// Full command-line front end. Exit codes: 0 success, 1 runtime or
/// infrastructure error, 2 usage or configuration error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pairgen
