#include "pairgen/http_backend.hpp"

#include <httplib.h>

#include <json.hpp>

#include "pairgen/error.hpp"

namespace pairgen {

using nlohmann::json;

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  const std::string& url = config_.endpoint;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(Errc::config_error, "endpoint must be an absolute http(s) URL: '" + url + "'");
  }
  auto path_start = url.find('/', scheme_end + 3);
  origin_ = url.substr(0, path_start);
  base_path_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
  if (config_.model.empty()) throw Error(Errc::config_error, "model name is required");
}

std::string HttpBackend::post(const std::string& route, const std::string& body) {
  httplib::Client client(origin_);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  auto res = client.Post(base_path_ + route, headers, body, "application/json");
  if (!res) throw TransientBackendError("transport error: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500) {
    throw TransientBackendError("HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw Error(Errc::backend_unavailable,
                "HTTP " + std::to_string(res->status) + " from " + route + ": " + res->body.substr(0, 500));
  }
  return res->body;
}

ChatResponse HttpBackend::chat(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  }
  json body = {{"model", config_.model},
               {"messages", std::move(messages)},
               {"temperature", request.temperature},
               {"max_tokens", request.max_tokens}};
  const std::string raw = post("/chat/completions", body.dump());
  try {
    json j = json::parse(raw);
    ChatResponse r;
    const auto& content = j.at("choices").at(0).at("message").at("content");
    r.text = content.is_null() ? std::string() : content.get<std::string>();
    if (auto it = j.find("usage"); it != j.end() && it->is_object()) {
      r.input_tokens = it->value("prompt_tokens", std::int64_t{0});
      r.output_tokens = it->value("completion_tokens", std::int64_t{0});
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(Errc::backend_unavailable, std::string("malformed chat response: ") + e.what());
  }
}

EmbedResponse HttpBackend::embed(std::span<const std::string> texts) {
  json body = {{"model", config_.embedding_model.empty() ? config_.model : config_.embedding_model},
               {"input", std::vector<std::string>(texts.begin(), texts.end())}};
  const std::string raw = post("/embeddings", body.dump());
  try {
    json j = json::parse(raw);
    EmbedResponse r;
    const auto& data = j.at("data");
    r.vectors.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      std::size_t slot = data[i].value("index", i);
      if (slot >= r.vectors.size()) throw Error(Errc::backend_unavailable, "embedding index out of range");
      r.vectors[slot] = data[i].at("embedding").get<EmbeddingVector>();
    }
    if (auto it = j.find("usage"); it != j.end() && it->is_object()) {
      r.input_tokens = it->value("prompt_tokens", std::int64_t{0});
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(Errc::backend_unavailable, std::string("malformed embeddings response: ") + e.what());
  }
}

}  // namespace pairgen
