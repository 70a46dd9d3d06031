#pragma once

#include <chrono>
#include <string>

#include "pairgen/gateway.hpp"

namespace pairgen {

inline constexpr const char* kApiKeyEnv = "PAIRGEN_API_KEY";

struct HttpBackendConfig {
  // Base URL up to and including the version segment, e.g.
  // "https://api.openai.com/v1"; requests go to <base>/chat/completions and
  // <base>/embeddings.
  std::string endpoint;
  std::string model;
  std::string embedding_model;
  std::string api_key;
  std::chrono::seconds timeout{120};
};

/// Client for the JSON chat-completions / embeddings HTTP interface.
/// Stateless between calls, so one instance can serve concurrent sessions.
class HttpBackend final : public ChatBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);

  ChatResponse chat(const ChatRequest& request) override;
  EmbedResponse embed(std::span<const std::string> texts) override;

 private:
  std::string post(const std::string& route, const std::string& body);

  HttpBackendConfig config_;
  std::string origin_;  // scheme://host[:port]
  std::string base_path_;
};

}  // namespace pairgen
