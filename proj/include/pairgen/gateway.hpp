#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pairgen {

enum class Role { system, user, assistant };

std::string_view to_string(Role role);

/// Which framework step issued a model call. `embed` is only used for
/// embedding batches.
enum class Step { reflect, plan, select, analyze, code, repair, embed };

std::string_view to_string(Step step);
Step step_from_string(std::string_view text);

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 2048;
  Step tag = Step::code;

  /// Message contents joined by newlines; what scripted matchers search.
  std::string rendered() const;

  bool operator==(const ChatRequest&) const = default;
};

struct ChatResponse {
  std::string text;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
};

using EmbeddingVector = std::vector<double>;

struct EmbedResponse {
  std::vector<EmbeddingVector> vectors;
  std::int64_t input_tokens = 0;
};

/// Number of maximal non-whitespace runs in `text`.
std::int64_t whitespace_token_count(std::string_view text);

/// Thrown by backends for failures worth retrying (transport errors, 429, 5xx).
class TransientBackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse chat(const ChatRequest& request) = 0;
  virtual EmbedResponse embed(std::span<const std::string> texts) = 0;
};

struct TagUsage {
  std::int64_t calls = 0;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;

  bool operator==(const TagUsage&) const = default;
};

struct LedgerSnapshot {
  std::int64_t api_calls = 0;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  std::map<std::string, TagUsage> per_tag;

  std::int64_t calls_for(Step step) const;
  LedgerSnapshot operator-(const LedgerSnapshot& earlier) const;
  bool operator==(const LedgerSnapshot&) const = default;
};

// API-call and token accounting. Totals always equal the per-tag sums.
class CostLedger {
 public:
  void record(Step tag, std::int64_t calls, std::int64_t input_tokens, std::int64_t output_tokens);
  LedgerSnapshot snapshot() const;

 private:
  mutable std::mutex mutex_;
  LedgerSnapshot state_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
};

/// Front door to a backend: retries transient failures with exponential
/// backoff and charges every physical attempt to the ledger(s).
class Gateway {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit Gateway(std::shared_ptr<ChatBackend> backend, RetryPolicy retry = {},
                   std::shared_ptr<CostLedger> parent_ledger = nullptr);

  ChatResponse complete(const ChatRequest& request);
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts);

  const CostLedger& ledger() const { return ledger_; }
  void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }

 private:
  void charge(Step tag, std::int64_t calls, std::int64_t in, std::int64_t out);
  template <typename Fn>
  auto with_retry(Step tag, Fn&& fn);

  std::shared_ptr<ChatBackend> backend_;
  RetryPolicy retry_;
  std::shared_ptr<CostLedger> parent_;
  CostLedger ledger_;
  Sleeper sleeper_;
};

}  // namespace pairgen
