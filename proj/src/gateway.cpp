#include "pairgen/gateway.hpp"

#include <cctype>
#include <cmath>
#include <thread>

#include <spdlog/spdlog.h>

#include "pairgen/error.hpp"

namespace pairgen {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

std::string_view to_string(Step step) {
  switch (step) {
    case Step::reflect: return "reflect";
    case Step::plan: return "plan";
    case Step::select: return "select";
    case Step::analyze: return "analyze";
    case Step::code: return "code";
    case Step::repair: return "repair";
    case Step::embed: return "embed";
  }
  return "code";
}

Step step_from_string(std::string_view text) {
  for (Step s : {Step::reflect, Step::plan, Step::select, Step::analyze, Step::code, Step::repair,
                 Step::embed}) {
    if (to_string(s) == text) return s;
  }
  throw Error(Errc::parse_error, "unknown step tag '" + std::string(text) + "'");
}

std::string ChatRequest::rendered() const {
  std::string out;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (i) out.push_back('\n');
    out += messages[i].content;
  }
  return out;
}

std::int64_t whitespace_token_count(std::string_view text) {
  std::int64_t count = 0;
  bool in_token = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++count;
    }
  }
  return count;
}

std::int64_t LedgerSnapshot::calls_for(Step step) const {
  auto it = per_tag.find(std::string(to_string(step)));
  return it == per_tag.end() ? 0 : it->second.calls;
}

LedgerSnapshot LedgerSnapshot::operator-(const LedgerSnapshot& earlier) const {
  LedgerSnapshot d;
  d.api_calls = api_calls - earlier.api_calls;
  d.input_tokens = input_tokens - earlier.input_tokens;
  d.output_tokens = output_tokens - earlier.output_tokens;
  for (const auto& [tag, usage] : per_tag) {
    TagUsage before;
    if (auto it = earlier.per_tag.find(tag); it != earlier.per_tag.end()) before = it->second;
    TagUsage delta{usage.calls - before.calls, usage.input_tokens - before.input_tokens,
                   usage.output_tokens - before.output_tokens};
    if (delta != TagUsage{}) d.per_tag[tag] = delta;
  }
  return d;
}

void CostLedger::record(Step tag, std::int64_t calls, std::int64_t input_tokens,
                        std::int64_t output_tokens) {
  std::lock_guard lock(mutex_);
  state_.api_calls += calls;
  state_.input_tokens += input_tokens;
  state_.output_tokens += output_tokens;
  auto& usage = state_.per_tag[std::string(to_string(tag))];
  usage.calls += calls;
  usage.input_tokens += input_tokens;
  usage.output_tokens += output_tokens;
}

LedgerSnapshot CostLedger::snapshot() const {
  std::lock_guard lock(mutex_);
  return state_;
}

Gateway::Gateway(std::shared_ptr<ChatBackend> backend, RetryPolicy retry,
                 std::shared_ptr<CostLedger> parent_ledger)
    : backend_(std::move(backend)),
      retry_(retry),
      parent_(std::move(parent_ledger)),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
  if (!backend_) throw Error(Errc::config_error, "gateway needs a backend");
  if (retry_.max_attempts < 1) retry_.max_attempts = 1;
}

void Gateway::charge(Step tag, std::int64_t calls, std::int64_t in, std::int64_t out) {
  ledger_.record(tag, calls, in, out);
  if (parent_) parent_->record(tag, calls, in, out);
}

template <typename Fn>
auto Gateway::with_retry(Step tag, Fn&& fn) {
  auto backoff = retry_.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    charge(tag, 1, 0, 0);
    try {
      return fn();
    } catch (const TransientBackendError& e) {
      if (attempt >= retry_.max_attempts) {
        throw Error(Errc::backend_unavailable, std::string(to_string(tag)) + " failed after " +
                                                   std::to_string(attempt) + " attempts: " + e.what());
      }
      spdlog::warn("{} request attempt {} failed ({}); retrying in {} ms", to_string(tag), attempt,
                   e.what(), backoff.count());
      sleeper_(backoff);
      backoff *= 2;
    }
  }
}

ChatResponse Gateway::complete(const ChatRequest& request) {
  if (request.messages.empty()) throw Error(Errc::empty_input, "chat request without messages");
  if (request.messages.front().role == Role::assistant) {
    throw Error(Errc::empty_input, "first chat message must be system or user");
  }
  ChatResponse resp = with_retry(request.tag, [&] { return backend_->chat(request); });
  charge(request.tag, 0, resp.input_tokens, resp.output_tokens);
  return resp;
}

std::vector<EmbeddingVector> Gateway::embed(std::span<const std::string> texts) {
  if (texts.empty()) throw Error(Errc::empty_input, "embed called with no texts");
  EmbedResponse resp = with_retry(Step::embed, [&] { return backend_->embed(texts); });
  if (resp.vectors.size() != texts.size()) {
    throw Error(Errc::backend_unavailable, "embedding backend returned " +
                                               std::to_string(resp.vectors.size()) + " vectors for " +
                                               std::to_string(texts.size()) + " texts");
  }
  const std::size_t dim = resp.vectors.front().size();
  for (const auto& v : resp.vectors) {
    if (v.empty() || v.size() != dim) throw Error(Errc::dimension_mismatch, "embedding dimensions differ");
    for (double x : v) {
      if (!std::isfinite(x)) throw Error(Errc::backend_unavailable, "non-finite embedding entry");
    }
  }
  charge(Step::embed, 0, resp.input_tokens, 0);
  return std::move(resp.vectors);
}

}  // namespace pairgen
