#include "pairgen/scripted_backend.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pairgen/error.hpp"

namespace pairgen {

using nlohmann::json;

namespace {

FixtureEntry entry_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::fixture_parse_error, "fixture entry is not an object");
  FixtureEntry e;
  try {
    e.tag = step_from_string(j.at("tag").get<std::string>());
    if (auto it = j.find("match"); it != j.end() && !it->is_null()) e.match = it->get<std::string>();
    e.text = j.value("text", std::string());
    if (auto it = j.find("input_tokens"); it != j.end() && !it->is_null()) {
      e.input_tokens = it->get<std::int64_t>();
    }
    if (auto it = j.find("output_tokens"); it != j.end() && !it->is_null()) {
      e.output_tokens = it->get<std::int64_t>();
    }
    if (auto it = j.find("embedding"); it != j.end() && !it->is_null()) {
      e.embedding = it->get<EmbeddingVector>();
    }
    e.repeat = j.value("repeat", false);
  } catch (const json::exception& ex) {
    throw Error(Errc::fixture_parse_error, ex.what());
  } catch (const Error& ex) {
    throw Error(Errc::fixture_parse_error, ex.what());
  }
  if (e.tag == Step::embed && !e.embedding) {
    throw Error(Errc::fixture_parse_error, "embed entry without embedding");
  }
  if (e.match && e.match->empty()) throw Error(Errc::fixture_parse_error, "empty matcher");
  return e;
}

}  // namespace

Fixture Fixture::parse(std::string_view content) {
  Fixture fx;
  json whole = json::parse(content, nullptr, /*allow_exceptions=*/false);
  if (!whole.is_discarded() && (whole.is_array() || whole.contains("entries"))) {
    const json& arr = whole.is_array() ? whole : whole["entries"];
    if (!arr.is_array()) throw Error(Errc::fixture_parse_error, "\"entries\" must be an array");
    for (const auto& j : arr) fx.entries.push_back(entry_from_json(j));
    return fx;
  }
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error(Errc::fixture_parse_error, "line " + std::to_string(line_no) + " is not valid JSON");
    }
    fx.entries.push_back(entry_from_json(j));
  }
  return fx;
}

Fixture Fixture::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::fixture_parse_error, "cannot read fixture " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

ScriptedBackend::ScriptedBackend(std::shared_ptr<const Fixture> fixture)
    : fixture_(std::move(fixture)), consumed_(fixture_ ? fixture_->entries.size() : 0, false) {
  if (!fixture_) throw Error(Errc::config_error, "scripted backend needs a fixture");
}

std::optional<std::size_t> ScriptedBackend::take(Step tag, std::string_view haystack, bool embedding) {
  const auto& entries = fixture_->entries;
  auto available = [&](std::size_t i) { return entries[i].repeat || !consumed_[i]; };
  auto claim = [&](std::size_t i) {
    if (!entries[i].repeat && !(embedding && entries[i].match)) consumed_[i] = true;
    return i;
  };
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.tag == tag && e.match && available(i) && haystack.find(*e.match) != std::string_view::npos) {
      return claim(i);
    }
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].tag == tag && !entries[i].match && available(i)) return claim(i);
  }
  return std::nullopt;
}

ChatResponse ScriptedBackend::chat(const ChatRequest& request) {
  const std::string prompt = request.rendered();
  std::lock_guard lock(mutex_);
  auto idx = take(request.tag, prompt, false);
  if (!idx) {
    throw Error(Errc::fixture_miss,
                "no scripted response left for tag '" + std::string(to_string(request.tag)) + "'");
  }
  const auto& e = fixture_->entries[*idx];
  ChatResponse r;
  r.text = e.text;
  r.input_tokens = e.input_tokens.value_or(whitespace_token_count(prompt));
  r.output_tokens = e.output_tokens.value_or(whitespace_token_count(e.text));
  return r;
}

EmbedResponse ScriptedBackend::embed(std::span<const std::string> texts) {
  std::lock_guard lock(mutex_);
  EmbedResponse r;
  for (const auto& text : texts) {
    auto idx = take(Step::embed, text, true);
    if (!idx) {
      throw Error(Errc::fixture_miss, "no scripted embedding for text '" + text.substr(0, 60) + "'");
    }
    r.vectors.push_back(*fixture_->entries[*idx].embedding);
    r.input_tokens += whitespace_token_count(text);
  }
  return r;
}

std::shared_ptr<ScriptedBackend> scripted_backend(const std::filesystem::path& fixture) {
  return std::make_shared<ScriptedBackend>(std::make_shared<const Fixture>(Fixture::load(fixture)));
}

}  // namespace pairgen
