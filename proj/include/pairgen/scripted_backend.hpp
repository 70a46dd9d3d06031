#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pairgen/gateway.hpp"

namespace pairgen {

// One canned model reply. Entries with `match` are keyed: they apply only when
// the literal substring occurs in the rendered prompt (or, for embed entries,
// in the text being embedded) and are preferred over unkeyed entries.
struct FixtureEntry {
  Step tag = Step::code;
  std::optional<std::string> match;
  std::string text;
  std::optional<std::int64_t> input_tokens;
  std::optional<std::int64_t> output_tokens;
  std::optional<EmbeddingVector> embedding;
  bool repeat = false;
};

struct Fixture {
  std::vector<FixtureEntry> entries;

  /// Accepts a JSON array, an object with an "entries" array, or JSONL.
  static Fixture parse(std::string_view content);
  static Fixture load(const std::filesystem::path& path);
};

/// Deterministic backend replaying a fixture. Each instance keeps its own
/// consumption cursors, so give every session its own instance.
class ScriptedBackend final : public ChatBackend {
 public:
  explicit ScriptedBackend(std::shared_ptr<const Fixture> fixture);

  ChatResponse chat(const ChatRequest& request) override;
  EmbedResponse embed(std::span<const std::string> texts) override;

 private:
  std::optional<std::size_t> take(Step tag, std::string_view haystack, bool embedding);

  std::shared_ptr<const Fixture> fixture_;
  std::vector<bool> consumed_;
  std::mutex mutex_;
};

std::shared_ptr<ScriptedBackend> scripted_backend(const std::filesystem::path& fixture);

}  // namespace pairgen
