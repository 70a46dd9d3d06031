#include "pairgen/sandbox.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "pairgen/error.hpp"
#include "pairgen/fingerprint.hpp"

extern char** environ;

namespace pairgen {

std::string_view to_string(CaseStatus status) {
  switch (status) {
    case CaseStatus::ok: return "ok";
    case CaseStatus::wrong_output: return "wrong_output";
    case CaseStatus::runtime_error: return "runtime_error";
    case CaseStatus::timeout: return "timeout";
  }
  return "ok";
}

std::string_view to_string(FeedbackKind kind) {
  switch (kind) {
    case FeedbackKind::pass: return "Pass";
    case FeedbackKind::runtime_error: return "RuntimeError";
    case FeedbackKind::wrong_answer: return "WrongAnswer";
    case FeedbackKind::time_limit_exceeded: return "TimeLimitExceeded";
  }
  return "Pass";
}

CaseStatus case_status_from_string(std::string_view text) {
  for (auto s : {CaseStatus::ok, CaseStatus::wrong_output, CaseStatus::runtime_error, CaseStatus::timeout}) {
    if (to_string(s) == text) return s;
  }
  throw Error(Errc::parse_error, "unknown case status '" + std::string(text) + "'");
}

FeedbackKind feedback_kind_from_string(std::string_view text) {
  for (auto k : {FeedbackKind::pass, FeedbackKind::runtime_error, FeedbackKind::wrong_answer,
                 FeedbackKind::time_limit_exceeded}) {
    if (to_string(k) == text) return k;
  }
  throw Error(Errc::parse_error, "unknown feedback kind '" + std::string(text) + "'");
}

std::vector<const CaseResult*> Feedback::failing_cases() const {
  std::vector<const CaseResult*> out;
  for (const auto& c : cases) {
    if (c.status != CaseStatus::ok) out.push_back(&c);
  }
  return out;
}

FeedbackKind aggregate_kind(std::span<const CaseStatus> statuses) {
  auto any = [&](CaseStatus s) { return std::find(statuses.begin(), statuses.end(), s) != statuses.end(); };
  if (any(CaseStatus::runtime_error)) return FeedbackKind::runtime_error;
  if (any(CaseStatus::wrong_output)) return FeedbackKind::wrong_answer;
  if (any(CaseStatus::timeout)) return FeedbackKind::time_limit_exceeded;
  return FeedbackKind::pass;
}

std::string normalize_output(std::string_view raw) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= raw.size()) {
    std::size_t nl = raw.find('\n', start);
    std::string_view line = raw.substr(start, nl == std::string_view::npos ? raw.size() - start : nl - start);
    std::size_t end = line.find_last_not_of(" \t\r\f\v");
    lines.push_back(end == std::string_view::npos ? std::string_view{} : line.substr(0, end + 1));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out.push_back('\n');
    out += lines[i];
  }
  return out;
}

void validate(const LanguageProfile& profile) {
  const std::string_view needle = "{source}";
  std::size_t count = 0;
  for (auto pos = profile.run_command.find(needle); pos != std::string::npos;
       pos = profile.run_command.find(needle, pos + needle.size())) {
    ++count;
  }
  if (count != 1) {
    throw Error(Errc::config_error,
                "profile '" + profile.id + "': run_command must contain exactly one {source} placeholder");
  }
}

LanguageProfile default_python_profile() {
  LanguageProfile p;
  p.id = "python3";
  p.run_command = "python3 {source}";
  p.file_extension = ".py";
  p.display_name = "Python 3";
  p.version_note = "host python3; reference environment is CPython 3.9";
  p.assertion_harness =
      "{code}\n"
      "\n"
      "\n"
      "import sys as _pairgen_sys\n"
      "try:\n"
      "    candidate = {entry_point}\n"
      "    {check}\n"
      "except AssertionError as _pairgen_err:\n"
      "    print(\"AssertionError: check failed \" + str(_pairgen_err), file=_pairgen_sys.stderr)\n"
      "    _pairgen_sys.exit({wa_exit})\n";
  return p;
}

ProfileRegistry::ProfileRegistry() { add(default_python_profile()); }

ProfileRegistry ProfileRegistry::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot read profile registry " + path.string());
  ProfileRegistry reg;
  try {
    auto j = nlohmann::json::parse(in);
    for (const auto& [id, item] : j.items()) {
      LanguageProfile p;
      p.id = id;
      p.run_command = item.at("run_command").get<std::string>();
      p.file_extension = item.at("file_extension").get<std::string>();
      p.version_note = item.value("version_note", std::string());
      p.display_name = item.value("display_name", id);
      p.assertion_harness = item.value("assertion_harness", std::string());
      reg.add(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, path.string() + ": " + e.what());
  }
  return reg;
}

void ProfileRegistry::add(LanguageProfile profile) {
  validate(profile);
  std::string id = profile.id;
  profiles_.insert_or_assign(std::move(id), std::move(profile));
}

const LanguageProfile& ProfileRegistry::at(std::string_view id) const {
  auto it = profiles_.find(id);
  if (it == profiles_.end()) {
    throw Error(Errc::config_error, "unknown language profile '" + std::string(id) + "'");
  }
  return it->second;
}

namespace {

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

std::string truncate_head(std::string_view s, std::size_t limit) {
  if (s.size() <= limit) return std::string(s);
  return std::string(s.substr(0, limit)) + "...";
}

std::string truncate_tail(std::string_view s, std::size_t limit) {
  if (s.size() <= limit) return std::string(s);
  return "..." + std::string(s.substr(s.size() - limit));
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "pairgen-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) {
      throw Error(Errc::sandbox_setup_error, std::string("cannot create temp dir: ") + std::strerror(errno));
    }
    path_ = tmpl;
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

struct Fd {
  int fd = -1;
  Fd() = default;
  explicit Fd(int f) : fd(f) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& o) noexcept : fd(std::exchange(o.fd, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    reset();
    fd = std::exchange(o.fd, -1);
    return *this;
  }
  ~Fd() { reset(); }
  void reset() {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
};

std::pair<Fd, Fd> make_pipe() {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) {
    throw Error(Errc::sandbox_setup_error, std::string("pipe: ") + std::strerror(errno));
  }
  return {Fd(fds[0]), Fd(fds[1])};
}

std::string resolve_executable(const std::string& name) {
  auto executable = [](const std::filesystem::path& p) {
    return ::access(p.c_str(), X_OK) == 0 && !std::filesystem::is_directory(p);
  };
  if (name.find('/') != std::string::npos) {
    if (executable(name)) return name;
  } else if (const char* path = std::getenv("PATH")) {
    std::istringstream dirs(path);
    std::string dir;
    while (std::getline(dirs, dir, ':')) {
      if (dir.empty()) continue;
      auto candidate = std::filesystem::path(dir) / name;
      if (executable(candidate)) return candidate.string();
    }
  }
  throw Error(Errc::sandbox_setup_error, "interpreter '" + name + "' not found on host");
}

std::vector<std::string> filtered_environment(const std::filesystem::path& workdir) {
  static constexpr const char* kAllow[] = {"PATH", "LANG", "LC_ALL", "LC_CTYPE", "TZ"};
  std::vector<std::string> env;
  for (const char* key : kAllow) {
    if (const char* v = std::getenv(key)) env.push_back(std::string(key) + "=" + v);
  }
  env.push_back("HOME=" + workdir.string());
  env.push_back("TMPDIR=" + workdir.string());
  env.push_back("PYTHONDONTWRITEBYTECODE=1");
  env.push_back("PYTHONIOENCODING=utf-8");
  env.push_back("PYTHONHASHSEED=0");
  return env;
}

struct RawRun {
  bool timed_out = false;
  int exit_code = 0;
  int term_signal = 0;
  std::string out;
  std::string err;
  Seconds wall{0};
};

using Clock = std::chrono::steady_clock;

void append_capped(std::string& dst, const char* buf, std::size_t n, std::size_t cap) {
  if (dst.size() < cap) dst.append(buf, std::min(n, cap - dst.size()));
}

RawRun run_process(const std::vector<std::string>& argv, const std::vector<std::string>& env,
                   const std::filesystem::path& workdir, std::string_view stdin_data, Seconds limit,
                   std::size_t capture_limit) {
  auto [in_r, in_w] = make_pipe();
  auto [out_r, out_w] = make_pipe();
  auto [err_r, err_w] = make_pipe();
  auto [exec_r, exec_w] = make_pipe();

  std::vector<char*> cargv;
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);
  std::vector<char*> cenv;
  for (const auto& e : env) cenv.push_back(const_cast<char*>(e.c_str()));
  cenv.push_back(nullptr);

  const auto start = Clock::now();
  pid_t pid = ::fork();
  if (pid < 0) throw Error(Errc::sandbox_setup_error, std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(in_r.fd, STDIN_FILENO);
    ::dup2(out_w.fd, STDOUT_FILENO);
    ::dup2(err_w.fd, STDERR_FILENO);
    int err = 0;
    if (::chdir(workdir.c_str()) == 0) {
      ::execve(cargv[0], cargv.data(), cenv.data());
    }
    err = errno;
    [[maybe_unused]] auto w = ::write(exec_w.fd, &err, sizeof err);
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  in_r.reset();
  out_w.reset();
  err_w.reset();
  exec_w.reset();

  int exec_errno = 0;
  ssize_t got = 0;
  do {
    got = ::read(exec_r.fd, &exec_errno, sizeof exec_errno);
  } while (got < 0 && errno == EINTR);
  if (got == static_cast<ssize_t>(sizeof exec_errno)) {
    ::waitpid(pid, nullptr, 0);
    throw Error(Errc::sandbox_setup_error, "cannot execute '" + argv[0] + "': " + std::strerror(exec_errno));
  }

  for (int fd : {in_w.fd, out_r.fd, err_r.fd}) ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) | O_NONBLOCK);
  if (stdin_data.empty()) in_w.reset();

  RawRun run;
  const auto deadline = start + std::chrono::duration_cast<Clock::duration>(limit);
  std::size_t written = 0;
  bool exited = false;
  int status = 0;
  char buf[65536];

  while (true) {
    if (!exited) {
      pid_t r = ::waitpid(pid, &status, WNOHANG);
      if (r == pid) {
        exited = true;
        run.wall = Clock::now() - start;
        // Reap anything the candidate left behind holding our pipes.
        ::kill(-pid, SIGKILL);
        in_w.reset();
      }
    }
    if (exited && out_r.fd < 0 && err_r.fd < 0) break;

    auto now = Clock::now();
    if (!exited && now >= deadline) {
      ::kill(-pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      run.timed_out = true;
      run.wall = Clock::now() - start;
      // Drain whatever is already buffered without waiting for more.
      for (Fd* fd : {&out_r, &err_r}) {
        if (fd->fd < 0) continue;
        ssize_t n;
        while ((n = ::read(fd->fd, buf, sizeof buf)) > 0) {
          append_capped(fd == &out_r ? run.out : run.err, buf, static_cast<std::size_t>(n), capture_limit);
        }
      }
      return run;
    }

    std::vector<pollfd> fds;
    if (out_r.fd >= 0) fds.push_back({out_r.fd, POLLIN, 0});
    if (err_r.fd >= 0) fds.push_back({err_r.fd, POLLIN, 0});
    if (in_w.fd >= 0) fds.push_back({in_w.fd, POLLOUT, 0});
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
    int timeout_ms = exited ? 50 : static_cast<int>(std::clamp<long long>(remaining, 0, 10));
    int pr = fds.empty() ? 0 : ::poll(fds.data(), fds.size(), timeout_ms);
    if (fds.empty()) ::usleep(static_cast<useconds_t>(timeout_ms) * 1000);
    if (pr < 0 && errno != EINTR) {
      ::kill(-pid, SIGKILL);
      ::waitpid(pid, nullptr, 0);
      throw Error(Errc::sandbox_setup_error, std::string("poll: ") + std::strerror(errno));
    }
    bool progressed = false;
    for (const auto& p : fds) {
      if (p.revents == 0) continue;
      if (p.fd == in_w.fd) {
        if (p.revents & (POLLERR | POLLHUP)) {
          in_w.reset();
          continue;
        }
        ssize_t n = ::write(in_w.fd, stdin_data.data() + written, stdin_data.size() - written);
        if (n > 0) {
          written += static_cast<std::size_t>(n);
          if (written == stdin_data.size()) in_w.reset();
        } else if (n < 0 && errno != EAGAIN && errno != EINTR) {
          in_w.reset();
        }
        progressed = true;
        continue;
      }
      Fd& src = p.fd == out_r.fd ? out_r : err_r;
      ssize_t n = ::read(src.fd, buf, sizeof buf);
      if (n > 0) {
        append_capped(&src == &out_r ? run.out : run.err, buf, static_cast<std::size_t>(n), capture_limit);
        progressed = true;
      } else if (n == 0 || (errno != EAGAIN && errno != EINTR)) {
        src.reset();
        progressed = true;
      }
    }
    if (exited && !progressed && pr == 0) {
      // Child gone and pipes quiet; stop waiting on stray writers.
      break;
    }
  }

  if (WIFEXITED(status)) run.exit_code = WEXITSTATUS(status);
  if (WIFSIGNALED(status)) run.term_signal = WTERMSIG(status);
  return run;
}

std::vector<std::string> split_command(const std::string& command, const std::string& source) {
  std::vector<std::string> argv;
  std::istringstream in(command);
  std::string tok;
  while (in >> tok) {
    replace_all(tok, "{source}", source);
    argv.push_back(tok);
  }
  if (argv.empty()) throw Error(Errc::sandbox_setup_error, "empty run command");
  return argv;
}

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

}  // namespace

std::string render_assertion_program(const LanguageProfile& profile, std::string_view code,
                                     std::string_view check, const std::optional<std::string>& entry_point) {
  if (profile.assertion_harness.empty()) {
    throw Error(Errc::sandbox_setup_error, "profile '" + profile.id + "' has no assertion harness");
  }
  std::string program = profile.assertion_harness;
  // Indent continuation lines of the check like the placeholder line.
  if (auto pos = program.find("{check}"); pos != std::string::npos) {
    auto line_start = program.rfind('\n', pos);
    line_start = line_start == std::string::npos ? 0 : line_start + 1;
    std::string indent = program.substr(line_start, pos - line_start);
    if (indent.find_first_not_of(" \t") != std::string::npos) indent.clear();
    std::string body(check);
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
    std::string indented;
    for (char c : body) {
      indented.push_back(c);
      if (c == '\n') indented += indent;
    }
    program.replace(pos, 7, indented);
  }
  replace_all(program, "{entry_point}", entry_point ? std::string_view(*entry_point) : "None");
  replace_all(program, "{wa_exit}", std::to_string(kAssertionFailedExit));
  if (auto pos = program.find("{code}"); pos != std::string::npos) program.replace(pos, 6, code);
  return program;
}

Feedback run_tests(std::string_view code, std::span<const TestCase> tests, const LanguageProfile& profile,
                   Seconds time_limit, const std::optional<std::string>& entry_point,
                   const SandboxOptions& options) {
  if (tests.empty()) throw Error(Errc::empty_input, "run_tests needs at least one test case");
  validate(profile);
  ignore_sigpipe();

  const std::string command_head = split_command(profile.run_command, "x").front();
  const std::string executable = resolve_executable(command_head);
  const auto suite_budget = time_limit * static_cast<double>(tests.size()) + options.grace;
  const auto suite_start = Clock::now();

  Feedback fb;
  for (std::size_t i = 0; i < tests.size(); ++i) {
    const TestCase& tc = tests[i];
    CaseResult cr;
    cr.case_index = i;
    cr.input = truncate_head(tc.input, options.detail_limit);
    cr.expected_output = truncate_head(tc.expected_output.value_or(""), options.detail_limit);

    Seconds elapsed = Clock::now() - suite_start;
    Seconds left = suite_budget - elapsed;
    if (left <= Seconds(0)) {
      cr.status = CaseStatus::timeout;
      cr.error_message = "suite time budget exhausted";
      fb.cases.push_back(std::move(cr));
      continue;
    }

    TempDir dir;
    const auto source = dir.path() / ("solution" + profile.file_extension);
    {
      std::ofstream out(source, std::ios::binary);
      if (tc.mode == TestMode::assertion) {
        out << render_assertion_program(profile, code, tc.input, entry_point);
      } else {
        out << code;
      }
      if (!out) throw Error(Errc::sandbox_setup_error, "cannot write " + source.string());
    }
    auto argv = split_command(profile.run_command, source.filename().string());
    argv.front() = executable;

    const Seconds limit = std::min(time_limit, left);
    RawRun run = run_process(argv, filtered_environment(dir.path()), dir.path(),
                             tc.mode == TestMode::stdio ? std::string_view(tc.input) : std::string_view{},
                             limit, options.capture_limit);
    cr.wall_time = run.wall;
    replace_all(run.err, dir.path().string() + "/", "");
    cr.actual_output = truncate_head(run.out, options.detail_limit);
    if (run.timed_out) {
      cr.status = CaseStatus::timeout;
      cr.error_message = limit < time_limit ? "suite time budget exhausted" : "time limit exceeded";
    } else if (run.term_signal != 0) {
      cr.status = CaseStatus::runtime_error;
      cr.error_message = truncate_tail(run.err, options.detail_limit);
      if (cr.error_message.empty()) {
        cr.error_message = std::string("terminated by signal ") + ::strsignal(run.term_signal);
      }
    } else if (run.exit_code != 0) {
      if (tc.mode == TestMode::assertion && run.exit_code == kAssertionFailedExit) {
        cr.status = CaseStatus::wrong_output;
      } else {
        cr.status = CaseStatus::runtime_error;
      }
      cr.error_message = truncate_tail(run.err, options.detail_limit);
      if (cr.error_message.empty()) cr.error_message = "exit code " + std::to_string(run.exit_code);
    } else if (tc.mode == TestMode::stdio &&
               normalize_output(run.out) != normalize_output(tc.expected_output.value_or(""))) {
      cr.status = CaseStatus::wrong_output;
    } else {
      cr.status = CaseStatus::ok;
    }
    fb.cases.push_back(std::move(cr));
  }

  std::vector<CaseStatus> statuses;
  for (const auto& c : fb.cases) statuses.push_back(c.status);
  fb.kind = aggregate_kind(statuses);
  fb.fingerprint = fingerprint_feedback(fb);
  return fb;
}

}  // namespace pairgen
